"""Proximal operators and elementary maps used by the ADMM updates."""
from __future__ import annotations

import numpy as np

from .errors import NumericError, ParameterError

# Singular values below this are treated as zero when reporting rank.
RANK_TOL = 1e-12


def soft_threshold(x: np.ndarray, lam: float) -> np.ndarray:
    """Shrink each entry toward zero by lam, clipping at zero.

    Solves min_t 0.5*(x - t)^2 + lam*|t| elementwise.
    """
    if lam < 0:
        raise ParameterError(f"threshold must be nonnegative, got {lam}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def singular_value_threshold(A: np.ndarray, lam: float) -> np.ndarray:
    """Soft-threshold the singular values of A.

    Solves min_H lam*||H||_* + 0.5*||H - A||_F^2 via the thin SVD.
    """
    if lam < 0:
        raise ParameterError(f"threshold must be nonnegative, got {lam}")
    A = np.asarray(A, dtype=float)
    if not np.isfinite(A).all():
        raise NumericError("non-finite input to singular value thresholding")
    P, s, Qt = np.linalg.svd(A, full_matrices=False)
    s = np.maximum(s - lam, 0.0)
    return (P * s) @ Qt


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function; output in the open (0, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def frobenius_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=float), "fro"))


def nuclear_norm(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if not np.isfinite(A).all():
        raise NumericError("non-finite input to nuclear norm")
    return float(np.linalg.svd(A, compute_uv=False).sum())


def norms(A: np.ndarray) -> tuple[float, float]:
    """Return (frobenius, nuclear) norms of A."""
    return frobenius_norm(A), nuclear_norm(A)


def numerical_rank(A: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s > tol * s[0]).sum())
