import numpy as np
import pytest

from awtr import (
    CovariateTable,
    MaskedResponseMatrix,
    SolverConfig,
    solve_lormc,
    solve_prime,
)
from awtr.matrices import standardize
from awtr.prox import numerical_rank
from awtr.solver import run_admm, _predicted_matrix
from tests.conftest import random_covariates, random_masked_matrix
from tests.test_solver import planted_linear_instance


def planted_low_rank(rng, m, n, rank, observed_fraction):
    L = (rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n)))
    L /= np.sqrt(rank)
    mask = rng.uniform(size=(m, n)) < observed_fraction
    mask[0, 0] = True
    return L, MaskedResponseMatrix(np.where(mask, L, 0.0), mask)


class TestPrime:
    def test_equals_frozen_weight_loop_bit_for_bit(self, rng):
        Y, X, _, _ = planted_linear_instance(rng)
        fit = solve_prime(Y, X, SolverConfig())
        Ys, (shift, scale) = standardize(Y)
        state, _, _, _ = run_admm(Ys, X, SolverConfig(), W0=None,
                                  adapt_weights=False)
        manual = shift + scale * ((X.rows @ state.g).reshape(Y.m, Y.n) + state.R)
        np.testing.assert_array_equal(fit.predicted, manual)

    def test_fully_observed_linear_model_fit(self, rng):
        from awtr.metrics import nrmse
        Y, X, _, Y_full = planted_linear_instance(
            rng, observed_fraction=1.0, noise=0.0)
        fit = solve_prime(Y, X, SolverConfig(lambda1=0.001, lambda2=0.001))
        err = nrmse(Y_full, fit.predicted, np.ones_like(Y.mask))
        assert err < 1e-3

    def test_objective_settles_at_its_minimum(self, rng):
        # Dual ascent can bump the loss during the first iterations, but
        # with fixed unit weights the trajectory must end at its lowest
        # point, well below where it started.
        Y, X, _, _ = planted_linear_instance(rng)
        fit = solve_prime(Y, X, SolverConfig(), collect_trace=True)
        objectives = [row["objective"] for row in fit.trace]
        assert objectives[-1] <= min(objectives) + 1e-8
        assert objectives[-1] < objectives[0]

    def test_rejects_covariate_row_mismatch(self, rng):
        from awtr.errors import ParameterError
        Y = random_masked_matrix(rng, 3, 3)
        with pytest.raises(ParameterError):
            solve_prime(Y, CovariateTable(np.zeros((4, 2))), SolverConfig())

    def test_no_warm_start_field(self, rng):
        Y, X, _, _ = planted_linear_instance(rng)
        assert solve_prime(Y, X, SolverConfig()).warm_start_predicted is None


class TestLormc:
    def test_fully_observed_zero_penalty_reproduces_input(self, rng):
        Y = random_masked_matrix(rng, 5, 5, observed_fraction=1.0)
        fit = solve_lormc(Y, SolverConfig(lambda1=0.0))
        np.testing.assert_allclose(fit.predicted, Y.values, atol=1e-4)

    def test_planted_rank3_recovery(self, rng):
        L, Y = planted_low_rank(rng, 80, 50, rank=3, observed_fraction=0.6)
        fit = solve_lormc(Y, SolverConfig(lambda1=0.05, tol=1e-8,
                                          max_iterations=10000))
        rel = np.linalg.norm(fit.predicted - L) / np.linalg.norm(L)
        assert rel < 1e-2

    def test_rank_nonincreasing_in_penalty(self, rng):
        _, Y = planted_low_rank(rng, 12, 10, rank=4, observed_fraction=0.9)
        shift, scale = standardize(Y)[1]
        ranks = []
        for lam in (0.0, 0.1, 0.5, 2.0, 8.0):
            fit = solve_lormc(Y, SolverConfig(lambda1=lam))
            completed = (fit.predicted - shift) / scale
            ranks.append(numerical_rank(completed, tol=1e-8))
        assert all(a >= b for a, b in zip(ranks, ranks[1:]))

    def test_no_covariate_outputs(self, rng):
        Y = random_masked_matrix(rng, 4, 4)
        fit = solve_lormc(Y, SolverConfig())
        assert fit.beta_hat.size == 0
        assert fit.selected_features == []

    def test_deterministic(self, rng):
        Y = random_masked_matrix(rng, 6, 6)
        a = solve_lormc(Y, SolverConfig())
        b = solve_lormc(Y, SolverConfig())
        np.testing.assert_array_equal(a.predicted, b.predicted)
