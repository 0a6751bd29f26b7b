"""Block-update correctness: each closed form is a stationary point of the
quadratic it claims to minimize, checked by central finite differences."""
import numpy as np
import pytest

from awtr import CovariateTable, MaskedResponseMatrix, SolverConfig
from awtr.solver import (
    SolverState,
    predict_and_update_weights,
    update_H,
    update_R,
    update_beta,
    update_duals,
    update_g,
)
from tests.conftest import random_covariates, random_masked_matrix


def random_state(rng, m, n, p, config):
    state = SolverState.zeros(m, n, p)
    state.R = rng.standard_normal((m, n))
    state.beta = rng.standard_normal(p)
    state.H = rng.standard_normal((m, n))
    state.g = rng.standard_normal(p)
    state.U = rng.standard_normal((m, n))
    state.v = rng.standard_normal(p)
    state.W = rng.uniform(config.weight_floor, 1.0 - config.weight_floor, (m, n))
    return state


def r_objective(R, state, Y, X, config):
    sw = np.sqrt(state.W)
    xb = (X.rows @ state.beta).reshape(Y.m, Y.n)
    resid = (sw * (Y.values - xb) - R)[Y.mask]
    coupling = R - state.H + state.U / config.mu1
    return 0.5 * float(resid @ resid) + 0.5 * config.mu1 * float(
        (coupling * coupling).sum())


def beta_objective(beta, state, Y, X, config):
    sw = np.sqrt(state.W)
    xb = (X.rows @ beta).reshape(Y.m, Y.n)
    resid = (sw * (Y.values - xb) - state.R)[Y.mask]
    coupling = beta - state.g + state.v / config.mu2
    return 0.5 * float(resid @ resid) + 0.5 * config.mu2 * float(
        coupling @ coupling)


def fd_gradient(f, x, h=1e-6):
    grad = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = f(x)
        flat[k] = orig - h
        down = f(x)
        flat[k] = orig
        out[k] = (up - down) / (2.0 * h)
    return grad


class TestUpdateR:
    def test_stationary_on_random_instances(self, rng):
        config = SolverConfig(mu1=0.7, mu2=1.3)
        for _ in range(20):
            Y = random_masked_matrix(rng, 4, 3)
            X = random_covariates(rng, 4, 3, p=3)
            state = random_state(rng, 4, 3, 3, config)
            R_star = update_R(state, Y, X, config)
            grad = fd_gradient(
                lambda R: r_objective(R, state, Y, X, config), R_star.copy())
            assert np.linalg.norm(grad) < 1e-6

    def test_unobserved_entries_track_H_and_dual(self, rng):
        config = SolverConfig(mu1=2.0)
        Y = MaskedResponseMatrix(np.array([[1.0, 0.0]]), np.array([[True, False]]))
        X = random_covariates(rng, 1, 2, p=2)
        state = random_state(rng, 1, 2, 2, config)
        R = update_R(state, Y, X, config)
        assert R[0, 1] == pytest.approx(state.H[0, 1] - state.U[0, 1] / 2.0)

    def test_improves_or_matches_objective(self, rng):
        config = SolverConfig()
        Y = random_masked_matrix(rng, 5, 4)
        X = random_covariates(rng, 5, 4)
        state = random_state(rng, 5, 4, 4, config)
        before = r_objective(state.R, state, Y, X, config)
        after = r_objective(update_R(state, Y, X, config), state, Y, X, config)
        assert after <= before + 1e-12


class TestUpdateBeta:
    def test_stationary_on_random_instances(self, rng):
        config = SolverConfig(mu1=0.9, mu2=0.4)
        for _ in range(20):
            Y = random_masked_matrix(rng, 4, 3)
            X = random_covariates(rng, 4, 3, p=3)
            state = random_state(rng, 4, 3, 3, config)
            beta_star = update_beta(state, Y, X, config)
            grad = fd_gradient(
                lambda b: beta_objective(b, state, Y, X, config),
                beta_star.copy())
            assert np.linalg.norm(grad) < 1e-6

    def test_large_mu2_pins_beta_to_g(self, rng):
        config = SolverConfig(mu2=1e8)
        Y = random_masked_matrix(rng, 4, 4)
        X = random_covariates(rng, 4, 4)
        state = random_state(rng, 4, 4, 4, config)
        state.g = np.zeros(4)
        state.v = np.zeros(4)
        beta = update_beta(state, Y, X, config)
        assert np.linalg.norm(beta) < 1e-6


class TestShrinkageUpdates:
    def test_H_is_svt_of_R_plus_scaled_dual(self, rng):
        config = SolverConfig(lambda1=0.0, mu1=2.0)
        state = random_state(rng, 3, 3, 2, config)
        np.testing.assert_allclose(update_H(state, config),
                                   state.R + state.U / 2.0, atol=1e-10)

    def test_H_diagonal_case(self):
        config = SolverConfig(lambda1=1.0, mu1=1.0)
        state = SolverState.zeros(3, 3, 1)
        state.R = np.diag([5.0, 2.0, 0.5])
        np.testing.assert_allclose(update_H(state, config),
                                   np.diag([4.0, 1.0, 0.0]), atol=1e-12)

    def test_g_soft_thresholds(self):
        config = SolverConfig(lambda2=0.5, mu2=1.0)
        state = SolverState.zeros(2, 2, 2)
        state.beta = np.array([0.7, -0.3])
        np.testing.assert_allclose(update_g(state, config), [0.2, 0.0])

    def test_g_zero_threshold_passthrough(self, rng):
        config = SolverConfig(lambda2=0.0, mu2=3.0)
        state = random_state(rng, 2, 2, 4, config)
        np.testing.assert_allclose(update_g(state, config),
                                   state.beta + state.v / 3.0)


class TestDualAscent:
    def test_direct_formula(self):
        config = SolverConfig(mu1=2.0, mu2=1.0)
        state = SolverState.zeros(2, 2, 2)
        state.R = np.full((2, 2), 0.5)
        U, v = update_duals(state, config)
        np.testing.assert_array_equal(U, np.ones((2, 2)))
        np.testing.assert_array_equal(v, np.zeros(2))

    def test_fixed_point_leaves_duals_unchanged(self, rng):
        config = SolverConfig()
        state = random_state(rng, 3, 3, 2, config)
        state.H = state.R.copy()
        state.g = state.beta.copy()
        U, v = update_duals(state, config)
        np.testing.assert_array_equal(U, state.U)
        np.testing.assert_array_equal(v, state.v)

    def test_constant_gap_accumulates_linearly(self):
        config = SolverConfig(mu1=1.5, mu2=1.0)
        state = SolverState.zeros(2, 2, 1)
        state.R = np.full((2, 2), 0.2)  # H stays 0: constant gap
        state.U, state.v = update_duals(state, config)
        state.U, state.v = update_duals(state, config)
        np.testing.assert_allclose(state.U, np.full((2, 2), 2 * 1.5 * 0.2))


class TestWeightUpdate:
    def test_zero_residual_predicts_observed_value(self, rng):
        config = SolverConfig()
        Y = random_masked_matrix(rng, 3, 3, observed_fraction=1.0)
        X = random_covariates(rng, 3, 3)
        state = random_state(rng, 3, 3, 4, config)
        # Force the weighted residual to zero on every entry.
        sw = np.sqrt(state.W)
        xb = (X.rows @ state.beta).reshape(3, 3)
        state.R = sw * (Y.values - xb)
        y_hat, _ = predict_and_update_weights(state, Y, X, config)
        np.testing.assert_allclose(y_hat.reshape(3, 3), Y.values, atol=1e-12)

    def test_zero_prediction_gives_half_weight(self, rng):
        config = SolverConfig()
        Y = random_masked_matrix(rng, 2, 2, observed_fraction=1.0)
        X = CovariateTable(np.zeros((4, 1)))
        state = SolverState.zeros(2, 2, 1)
        state.R = np.sqrt(state.W) * Y.values  # zero residual, xb = 0
        # Prediction equals y; pick y = 0 to land on the sigmoid midpoint.
        Y0 = MaskedResponseMatrix(np.zeros((2, 2)), np.ones((2, 2), bool))
        state.R = np.zeros((2, 2))
        _, W_next = predict_and_update_weights(state, Y0, X, config)
        np.testing.assert_allclose(W_next, np.full((2, 2), 0.5))

    def test_weights_clamped_and_monotone(self, rng):
        config = SolverConfig(weight_floor=1e-3)
        Y = random_masked_matrix(rng, 4, 4)
        X = random_covariates(rng, 4, 4)
        state = random_state(rng, 4, 4, 4, config)
        state.beta = state.beta * 100.0  # push predictions to the extremes
        y_hat, W_next = predict_and_update_weights(state, Y, X, config)
        assert np.all(W_next >= 1e-3) and np.all(W_next <= 1.0 - 1e-3)
        order = np.argsort(y_hat)
        assert np.all(np.diff(W_next.reshape(-1)[order]) >= 0.0)
