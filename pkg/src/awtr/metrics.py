"""Top-N list extraction and ranking metrics."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ParameterError


def top_n(scores: np.ndarray, N: int) -> np.ndarray:
    """Per-row indices of the N largest scores, descending, ties to the
    lower column index."""
    scores = np.asarray(scores, dtype=float)
    if not 1 <= N <= scores.shape[1]:
        raise ParameterError(f"N={N} outside [1, {scores.shape[1]}]")
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :N]


def _check_lists(truth: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    truth = np.atleast_2d(np.asarray(truth, dtype=int))
    pred = np.atleast_2d(np.asarray(pred, dtype=int))
    if truth.shape != pred.shape:
        raise ParameterError(f"list shapes differ: {truth.shape} vs {pred.shape}")
    return truth, pred


def hit_rate(truth: np.ndarray, pred: np.ndarray) -> float:
    """Mean fraction of true top-N members recovered, averaged over rows."""
    truth, pred = _check_lists(truth, pred)
    m, N = truth.shape
    hits = sum(len(set(truth[i]) & set(pred[i])) for i in range(m))
    return hits / (N * m)


def ndcg(truth: np.ndarray, pred: np.ndarray) -> float:
    """Position-exact discounted gain, normalized by the all-correct list.

    A position z scores only when the predicted and true lists name the
    same patient at that exact slot.
    """
    truth, pred = _check_lists(truth, pred)
    N = truth.shape[1]
    discounts = 1.0 / np.log2(np.arange(1, N + 1) + 1)
    r = (truth == pred).astype(float)
    dcg = r @ discounts
    idcg = discounts.sum()
    return float(np.mean(dcg / idcg))


def nrmse(truth: np.ndarray, pred: np.ndarray, mask: np.ndarray) -> float:
    """RMSE over the masked entries, divided by the truth range there."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if truth.shape != pred.shape or truth.shape != mask.shape:
        raise ParameterError("truth, pred and mask shapes must match")
    t = truth[mask]
    if t.size == 0:
        raise ParameterError("empty evaluation index set")
    span = float(t.max() - t.min())
    if span == 0.0:
        raise DegenerateInputError("constant truth over the evaluation set")
    rmse = float(np.sqrt(np.mean((t - pred[mask]) ** 2)))
    return rmse / span
