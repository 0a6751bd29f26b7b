"""Weighted low-rank + sparse-regression model fit by ADMM with block updates.

The model explains the masked score matrix as a low-rank component plus a
linear term in the pair covariates; per-entry weights are refreshed every
iteration from a sigmoid of the latest prediction so that high-scoring
pairs dominate the loss. Splitting variables H (for the nuclear norm) and
g (for the L1 term) are tied to R and beta through scaled dual ascent.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, NumericError, ParameterError
from .matrices import CovariateTable, MaskedResponseMatrix, standardize
from .metrics import nrmse
from .prox import sigmoid, singular_value_threshold, soft_threshold, nuclear_norm

COARSE_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
# Nonzero-coefficient threshold for feature selection.
SELECT_TOL = 1e-10
# Required relative consensus gap between each primal pair at convergence.
CONSENSUS_TOL = 1e-3


@dataclass(frozen=True)
class SolverConfig:
    lambda1: float = 1.0
    lambda2: float = 0.1
    mu1: float = 1.0
    mu2: float = 1.0
    tol: float = 1e-6
    max_iterations: int = 5000
    weight_floor: float = 1e-6
    init_mode: str = "prime_warm_start"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ParameterError("lambda1 and lambda2 must be nonnegative")
        if self.mu1 <= 0 or self.mu2 <= 0:
            raise ParameterError("mu1 and mu2 must be positive")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be a positive integer")
        if not 0.0 < self.weight_floor < 0.5:
            raise ParameterError("weight_floor must lie in (0, 0.5)")
        if self.init_mode not in ("identity_weights", "prime_warm_start"):
            raise ParameterError(f"unknown init_mode {self.init_mode!r}")


@dataclass
class SolverState:
    """All ADMM iterates; weights W live in [weight_floor, 1)."""

    R: np.ndarray
    beta: np.ndarray
    H: np.ndarray
    g: np.ndarray
    U: np.ndarray
    v: np.ndarray
    W: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, m: int, n: int, p: int, W0: np.ndarray | None = None) -> "SolverState":
        W = np.ones((m, n)) if W0 is None else np.asarray(W0, dtype=float)
        return cls(
            R=np.zeros((m, n)),
            beta=np.zeros(p),
            H=np.zeros((m, n)),
            g=np.zeros(p),
            U=np.zeros((m, n)),
            v=np.zeros(p),
            W=W,
        )


@dataclass(frozen=True)
class FitResult:
    predicted: np.ndarray
    beta_hat: np.ndarray
    selected_features: list[int]
    iterations_used: int
    converged: bool
    final_residual_change: float
    # Prediction of the warm-start model (original scale), when one ran.
    warm_start_predicted: np.ndarray | None = None
    trace: list[dict] | None = None


def update_R(state: SolverState, Y: MaskedResponseMatrix, X: CovariateTable,
             config: SolverConfig) -> np.ndarray:
    """Closed-form minimizer of the R subproblem at fixed weights.

    On observed entries the weighted data residual pulls R toward
    sqrt(W)*(y - X beta); on unobserved entries only the H-coupling terms
    remain, giving R = H - U/mu1.
    """
    sw = np.sqrt(state.W)
    xb = (X.rows @ state.beta).reshape(Y.m, Y.n)
    z = sw * (Y.values - xb)
    r_obs = (z - state.U + config.mu1 * state.H) / (1.0 + config.mu1)
    r_unobs = state.H - state.U / config.mu1
    return np.where(Y.mask, r_obs, r_unobs)


def update_beta(state: SolverState, Y: MaskedResponseMatrix, X: CovariateTable,
                config: SolverConfig) -> np.ndarray:
    """Ridge-like normal-equations solve of the beta subproblem.

    Only covariate rows of observed entries enter the data term.
    """
    omega = Y.mask.reshape(-1)
    X_o = X.rows[omega]
    sw_o = np.sqrt(state.W.reshape(-1)[omega])
    y_o = Y.values.reshape(-1)[omega]
    r_o = state.R.reshape(-1)[omega]
    A = X_o * sw_o[:, None]
    G = A.T @ A
    G[np.diag_indices_from(G)] += config.mu2
    rhs = A.T @ (sw_o * y_o - r_o) - state.v + config.mu2 * state.g
    try:
        return cho_solve(cho_factor(G), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - mu2 > 0 prevents this
        raise NumericError("beta subproblem solve failed") from exc


def update_H(state: SolverState, config: SolverConfig) -> np.ndarray:
    """Singular value thresholding of R + U/mu1 at level lambda1/mu1."""
    return singular_value_threshold(state.R + state.U / config.mu1,
                                    config.lambda1 / config.mu1)


def update_g(state: SolverState, config: SolverConfig) -> np.ndarray:
    """Soft thresholding of beta + v/mu2 at level lambda2/mu2."""
    return soft_threshold(state.beta + state.v / config.mu2,
                          config.lambda2 / config.mu2)


def update_duals(state: SolverState, config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    U = state.U + config.mu1 * (state.R - state.H)
    v = state.v + config.mu2 * (state.beta - state.g)
    return U, v


def predict_and_update_weights(state: SolverState, Y: MaskedResponseMatrix,
                               X: CovariateTable, config: SolverConfig
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Current prediction per entry and the next sigmoid weight matrix.

    On observed entries the prediction is y minus the weighted fit
    residual; off the mask, where y is unknown, the same formula at zero
    residual reduces to X beta + R / sqrt(W).
    """
    sw = np.sqrt(state.W)
    xb = (X.rows @ state.beta).reshape(Y.m, Y.n)
    y_hat_obs = -(sw * (Y.values - xb) - state.R) + Y.values
    y_hat_unobs = xb + state.R / sw
    y_hat = np.where(Y.mask, y_hat_obs, y_hat_unobs)
    W_next = np.clip(sigmoid(y_hat), config.weight_floor, 1.0 - config.weight_floor)
    return y_hat.reshape(-1), W_next


def masked_objective(state: SolverState, Y: MaskedResponseMatrix, X: CovariateTable,
                     config: SolverConfig) -> float:
    """Model loss at (R, beta): weighted masked residual + both penalties."""
    sw = np.sqrt(state.W)
    xb = (X.rows @ state.beta).reshape(Y.m, Y.n)
    resid = (sw * (Y.values - xb) - state.R)[Y.mask]
    return (0.5 * float(resid @ resid)
            + config.lambda1 * nuclear_norm(state.R)
            + config.lambda2 * float(np.abs(state.beta).sum()))


def _weighted_residual(state: SolverState, Y: MaskedResponseMatrix,
                       X: CovariateTable) -> np.ndarray:
    """sqrt(W)*(y - X beta) - r over the observed entries only."""
    sw = np.sqrt(state.W)
    xb = (X.rows @ state.beta).reshape(Y.m, Y.n)
    return (sw * (Y.values - xb) - state.R)[Y.mask]


def _consensus_ok(state: SolverState) -> bool:
    gap_R = np.linalg.norm(state.R - state.H) / max(1.0, np.linalg.norm(state.H))
    gap_b = np.linalg.norm(state.beta - state.g) / max(1.0, np.linalg.norm(state.g))
    return gap_R <= CONSENSUS_TOL and gap_b <= CONSENSUS_TOL


def _check_finite(state: SolverState) -> None:
    for name in ("R", "beta", "H", "g", "U", "v", "W"):
        if not np.isfinite(getattr(state, name)).all():
            raise NumericError(
                f"non-finite iterate {name} at iteration {state.iteration}"
            )


def run_admm(Y: MaskedResponseMatrix, X: CovariateTable, config: SolverConfig,
             W0: np.ndarray | None = None, adapt_weights: bool = True,
             collect_trace: bool = False) -> tuple[SolverState, bool, float, list[dict]]:
    """Core block-update loop on a standardized problem.

    Returns (final state, converged flag, last residual-change ratio,
    per-iteration trace rows). With adapt_weights=False and W0=None this
    is the uniform-weight baseline loop.
    """
    state = SolverState.zeros(Y.m, Y.n, X.p, W0)
    z_prev = _weighted_residual(state, Y, X)
    converged = False
    change = np.inf
    trace: list[dict] = []
    for k in range(config.max_iterations):
        state.R = update_R(state, Y, X, config)
        state.beta = update_beta(state, Y, X, config)
        state.H = update_H(state, config)
        state.g = update_g(state, config)
        if adapt_weights:
            _, state.W = predict_and_update_weights(state, Y, X, config)
        state.U, state.v = update_duals(state, config)
        state.iteration = k + 1
        _check_finite(state)
        z = _weighted_residual(state, Y, X)
        denom = max(float(z_prev @ z_prev), np.finfo(float).tiny)
        diff = z - z_prev
        change = float(diff @ diff) / denom
        z_prev = z
        if collect_trace:
            trace.append({
                "iteration": state.iteration,
                "residual_change": change,
                "consensus_R": float(np.linalg.norm(state.R - state.H)),
                "consensus_beta": float(np.linalg.norm(state.beta - state.g)),
                "objective": masked_objective(state, Y, X, config),
            })
        # Stop on the relative-change test, but only once both splits
        # actually agree; otherwise the consensus contract at exit could
        # be violated by an early plateau.
        if change <= config.tol and _consensus_ok(state):
            converged = True
            break
    return state, converged, change, trace


def _predicted_matrix(state: SolverState, Y: MaskedResponseMatrix,
                      X: CovariateTable) -> np.ndarray:
    """Complete prediction on the standardized scale.

    Observed entries keep the weighted-residual correction of the known
    score (which tends to y itself as the fit tightens); unobserved ones
    use the zero-residual form X*g + R / sqrt(W).
    """
    sw = np.sqrt(state.W)
    xb = (X.rows @ state.g).reshape(Y.m, Y.n)
    pred_obs = Y.values - (sw * (Y.values - xb) - state.R)
    pred_unobs = xb + state.R / sw
    return np.where(Y.mask, pred_obs, pred_unobs)


def _finish(state: SolverState, predicted_std: np.ndarray, shift: float, scale: float,
            converged: bool, change: float, warm_start: np.ndarray | None,
            trace: list[dict]) -> FitResult:
    beta_hat = state.g.copy()
    selected = [int(j) for j in np.nonzero(np.abs(beta_hat) > SELECT_TOL)[0]]
    return FitResult(
        predicted=shift + scale * predicted_std,
        beta_hat=beta_hat,
        selected_features=selected,
        iterations_used=state.iteration,
        converged=converged,
        final_residual_change=change,
        warm_start_predicted=warm_start,
        trace=trace or None,
    )


def solve(Y: MaskedResponseMatrix, X: CovariateTable, config: SolverConfig,
          collect_trace: bool = False) -> FitResult:
    """Fit the adaptively weighted model and return the completed matrix.

    Y is standardized internally (observed entries to mean 0 / sd 1) and
    the returned prediction is mapped back to the original scale. X must
    already be column-standardized by the caller.
    """
    if X.rows.shape[0] != Y.m * Y.n:
        raise ParameterError(
            f"covariate table has {X.rows.shape[0]} rows, expected {Y.m * Y.n}"
        )
    Ys, (shift, scale) = standardize(Y)
    warm_start = None
    if config.init_mode == "prime_warm_start":
        base, _, _, _ = run_admm(Ys, X, config, W0=None, adapt_weights=False)
        y_hat0 = (X.rows @ base.g).reshape(Y.m, Y.n) + base.R
        W0 = np.clip(sigmoid(y_hat0), config.weight_floor, 1.0 - config.weight_floor)
        warm_start = shift + scale * y_hat0
    else:
        W0 = None
    state, converged, change, trace = run_admm(
        Ys, X, config, W0=W0, adapt_weights=True, collect_trace=collect_trace
    )
    predicted_std = _predicted_matrix(state, Ys, X)
    return _finish(state, predicted_std, shift, scale, converged, change,
                   warm_start, trace)


def _fold_assignments(n_obs: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random partition of observed-entry positions into folds."""
    fold_of = np.arange(n_obs) % folds
    rng.shuffle(fold_of)
    return fold_of


def _cv_score(Y: MaskedResponseMatrix, X: CovariateTable | None, config: SolverConfig,
              method: str, fold_of: np.ndarray, folds: int) -> float:
    from .baselines import solve_lormc, solve_prime  # local import: avoids a cycle

    obs_idx = np.argwhere(Y.mask)
    scores = []
    for f in range(folds):
        holdout = obs_idx[fold_of == f]
        train_mask = Y.mask.copy()
        train_mask[holdout[:, 0], holdout[:, 1]] = False
        Yt = MaskedResponseMatrix(np.where(train_mask, Y.values, 0.0), train_mask)
        if method == "awtr":
            fit = solve(Yt, X, config)
        elif method == "prime":
            fit = solve_prime(Yt, X, config)
        elif method == "lormc":
            fit = solve_lormc(Yt, config)
        else:
            raise ConfigurationError(f"unknown method {method!r}")
        eval_mask = np.zeros_like(Y.mask)
        eval_mask[holdout[:, 0], holdout[:, 1]] = True
        scores.append(nrmse(Y.values, fit.predicted, eval_mask))
    return float(np.mean(scores))


def cross_validate(Y: MaskedResponseMatrix, X: CovariateTable | None,
                   config: SolverConfig | None = None, method: str = "awtr",
                   coarse_grid: tuple[float, ...] = COARSE_GRID,
                   folds: int = 5, seed: int = 0) -> SolverConfig:
    """Two-level grid search over the penalty weights by K-fold NRMSE.

    Level 1 scans the coarse logarithmic grid; level 2 refines with a
    5-point grid spanning one decade around the level-1 winner. For the
    covariate-free baseline only lambda1 is searched.
    """
    if config is None:
        config = SolverConfig()
    if Y.n_observed < 5 * folds:
        raise ConfigurationError(
            f"need at least {5 * folds} observed entries for {folds}-fold CV, "
            f"got {Y.n_observed}"
        )
    rng = np.random.default_rng(seed)
    fold_of = _fold_assignments(Y.n_observed, folds, rng)
    with_l2 = method != "lormc"

    def score(l1: float, l2: float) -> float:
        cfg = replace(config, lambda1=l1, lambda2=l2)
        return _cv_score(Y, X, cfg, method, fold_of, folds)

    def search(grid1, grid2):
        best, best_score = None, np.inf
        pairs = (itertools.product(grid1, grid2) if with_l2
                 else ((l1, config.lambda2) for l1 in grid1))
        for l1, l2 in pairs:
            s = score(l1, l2)
            if s < best_score:
                best, best_score = (l1, l2), s
        return best

    l1, l2 = search(coarse_grid, coarse_grid)
    refine = lambda w: tuple(np.logspace(np.log10(w) - 0.5, np.log10(w) + 0.5, 5))
    if len(coarse_grid) > 1:
        l1, l2 = search(refine(l1), refine(l2) if with_l2 else (l2,))
    return replace(config, lambda1=float(l1), lambda2=float(l2))
