"""Comparator solvers built from the same ADMM machinery.

The uniform-weight baseline ("prime") is the adaptive model with weights
pinned at one; the covariate-free baseline ("lormc") is plain nuclear-norm
matrix completion on the observed entries.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericError, ParameterError
from .matrices import CovariateTable, MaskedResponseMatrix, standardize
from .prox import singular_value_threshold
from .solver import FitResult, SolverConfig, _finish, run_admm


def solve_prime(Y: MaskedResponseMatrix, X: CovariateTable,
                config: SolverConfig, collect_trace: bool = False) -> FitResult:
    """Least-squares fit: the same block loop with unit weights throughout."""
    if X.rows.shape[0] != Y.m * Y.n:
        raise ParameterError(
            f"covariate table has {X.rows.shape[0]} rows, expected {Y.m * Y.n}"
        )
    Ys, (shift, scale) = standardize(Y)
    state, converged, change, trace = run_admm(Ys, X, config, W0=None,
                                               adapt_weights=False,
                                               collect_trace=collect_trace)
    predicted_std = (X.rows @ state.g).reshape(Y.m, Y.n) + state.R
    return _finish(state, predicted_std, shift, scale, converged, change,
                   None, trace)


def solve_lormc(Y: MaskedResponseMatrix, config: SolverConfig) -> FitResult:
    """Nuclear-norm matrix completion: R/H split only, no covariate term."""
    Ys, (shift, scale) = standardize(Y)
    m, n = Ys.m, Ys.n
    mu1, lam1 = config.mu1, config.lambda1
    R = np.zeros((m, n))
    H = np.zeros((m, n))
    U = np.zeros((m, n))
    z_prev = (Ys.values - R)[Ys.mask]
    converged = False
    change = np.inf
    iteration = 0
    for k in range(config.max_iterations):
        r_obs = (Ys.values - U + mu1 * H) / (1.0 + mu1)
        r_unobs = H - U / mu1
        R = np.where(Ys.mask, r_obs, r_unobs)
        H = singular_value_threshold(R + U / mu1, lam1 / mu1)
        U = U + mu1 * (R - H)
        iteration = k + 1
        if not (np.isfinite(R).all() and np.isfinite(H).all() and np.isfinite(U).all()):
            raise NumericError(f"non-finite iterate at iteration {iteration}")
        z = (Ys.values - R)[Ys.mask]
        denom = max(float(z_prev @ z_prev), np.finfo(float).tiny)
        diff = z - z_prev
        change = float(diff @ diff) / denom
        z_prev = z
        gap = np.linalg.norm(R - H) / max(1.0, np.linalg.norm(H))
        if change <= config.tol and gap <= 1e-3:
            converged = True
            break
    return FitResult(
        predicted=shift + scale * R,
        beta_hat=np.zeros(0),
        selected_features=[],
        iterations_used=iteration,
        converged=converged,
        final_residual_change=change,
        warm_start_predicted=None,
        trace=None,
    )
