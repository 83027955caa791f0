"""Graphical lasso tests against an independent first-order solver."""

import numpy as np
import pytest

from hypoguard.distributions import graphical_lasso, graphical_lasso_objective
from hypoguard.errors import ConvergenceError, DataError


def _soft_offdiag(t, thr):
    out = np.sign(t) * np.maximum(np.abs(t) - thr, 0.0)
    np.fill_diagonal(out, np.diag(t))
    return out


def proximal_gradient_oracle(s, lam, iters=60_000):
    """Independent solve of min tr(ST) - logdet T + lam*|T|_off.

    Proximal gradient with backtracking; step candidates are rejected
    unless they stay positive definite and do not increase the
    objective. Slow but only first-order information is shared with
    the block-coordinate implementation under test.
    """
    t = np.diag(1.0 / np.diag(s)).copy()
    step = 0.1
    obj = graphical_lasso_objective(s, t, lam)
    for _ in range(iters):
        grad = s - np.linalg.inv(t)
        while True:
            cand = t - step * grad
            cand = _soft_offdiag(cand, step * lam)
            cand = 0.5 * (cand + cand.T)
            if np.linalg.eigvalsh(cand).min() > 1e-10:
                cand_obj = graphical_lasso_objective(s, cand, lam)
                if cand_obj <= obj + 1e-15:
                    break
            step *= 0.5
            if step < 1e-14:
                return t
        if abs(obj - cand_obj) < 1e-15 and np.max(np.abs(cand - t)) < 1e-12:
            return cand
        t, obj = cand, cand_obj
        step *= 1.05
    return t


def _random_spd(rng, d=3):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + 0.5 * np.eye(d)


class TestGraphicalLasso:
    def test_unpenalized_is_inverse(self):
        rng = np.random.default_rng(0)
        s = _random_spd(rng, 4)
        t = graphical_lasso(s, 0.0)
        np.testing.assert_allclose(t, np.linalg.inv(s), atol=1e-6)

    @pytest.mark.parametrize("lam", [0.0, 0.05, 0.5])
    def test_diagonal_input_stays_diagonal(self, lam):
        s = np.diag([2.0, 0.5, 1.3])
        t = graphical_lasso(s, lam)
        np.testing.assert_allclose(t, np.diag([0.5, 2.0, 1.0 / 1.3]), atol=1e-9)

    @pytest.mark.parametrize("seed", [1, 2, 3])
    @pytest.mark.parametrize("lam", [0.0, 0.05, 0.1])
    def test_matches_projected_gradient_oracle(self, seed, lam):
        s = _random_spd(np.random.default_rng(seed))
        t = graphical_lasso(s, lam)
        t_oracle = proximal_gradient_oracle(s, lam)
        assert np.linalg.norm(t - t_oracle) < 1e-4

    def test_output_symmetric_positive_definite(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            s = _random_spd(rng, 5)
            t = graphical_lasso(s, 0.08)
            np.testing.assert_allclose(t, t.T, atol=1e-12)
            assert np.linalg.eigvalsh(t).min() > 0

    def test_objective_never_increases(self):
        s = _random_spd(np.random.default_rng(21), 5)
        _, trace = graphical_lasso(s, 0.07, return_objective_trace=True)
        assert np.all(np.diff(trace) <= 1e-9)

    def test_penalty_shrinks_offdiagonals(self):
        s = _random_spd(np.random.default_rng(4))
        off = lambda m: np.abs(m - np.diag(np.diag(m))).sum()
        t0 = graphical_lasso(s, 0.0)
        t1 = graphical_lasso(s, 0.3)
        assert off(t1) < off(t0)

    def test_nonsymmetric_rejected(self):
        s = np.array([[1.0, 0.5], [0.1, 1.0]])
        with pytest.raises(DataError):
            graphical_lasso(s, 0.1)

    def test_negative_penalty_rejected(self):
        with pytest.raises(DataError):
            graphical_lasso(np.eye(2), -0.1)

    def test_convergence_error_carries_iterate(self):
        # A strongly coupled matrix cannot settle in a single sweep at
        # this tolerance.
        s = np.array([[1.0, 0.9, 0.8], [0.9, 1.0, 0.9], [0.8, 0.9, 1.0]])
        with pytest.raises(ConvergenceError) as excinfo:
            graphical_lasso(s, 0.01, max_sweeps=1)
        assert excinfo.value.last_iterate is not None
        assert excinfo.value.last_iterate.shape == (3, 3)

    def test_one_dimensional(self):
        assert graphical_lasso(np.array([[4.0]]), 0.2)[0, 0] == pytest.approx(0.25)

    def test_known_correlation_matrix(self):
        # Equicorrelated 3x3 with rho=0.6 against the first-order oracle
        # at a penalty strong enough to start zeroing entries.
        s = np.full((3, 3), 0.6)
        np.fill_diagonal(s, 1.0)
        for lam in (0.0, 0.1, 0.4):
            t = graphical_lasso(s, lam)
            t_oracle = proximal_gradient_oracle(s, lam)
            assert np.linalg.norm(t - t_oracle) < 1e-4
        # analytic inverse of the equicorrelation matrix at lam=0
        t0 = graphical_lasso(s, 0.0)
        rho = 0.6
        diag = (1 + (3 - 2) * rho) / ((1 - rho) * (1 + (3 - 1) * rho))
        off = -rho / ((1 - rho) * (1 + (3 - 1) * rho))
        expected = np.full((3, 3), off)
        np.fill_diagonal(expected, diag)
        np.testing.assert_allclose(t0, expected, atol=1e-8)
