import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imsmc.nlsolve import LmOptions, fd_jacobian, levenberg_marquardt


class TestFdJacobian:
    def test_linear_exact(self):
        a = np.array([[1.0, 2.0, -1.0], [0.5, -3.0, 4.0]])
        jac = fd_jacobian(lambda x: a @ x, np.array([0.3, -0.7, 1.1]))
        assert np.abs(jac - a).max() < 1e-9

    def test_product_rule(self):
        jac = fd_jacobian(lambda x: np.array([x[0] * x[1]]), np.array([2.0, 3.0]))
        assert np.allclose(jac, [[3.0, 2.0]], atol=1e-8)

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            fd_jacobian(lambda x: x, np.zeros(2), h=0.0)

    def test_non_finite_raises(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            with pytest.raises(FloatingPointError):
                fd_jacobian(lambda x: np.log(x), np.array([0.0]))


class TestLevenbergMarquardt:
    def test_scalar_linear(self):
        res = levenberg_marquardt(lambda x: x - 3.0, np.array([0.0]))
        assert res.converged
        assert abs(res.x[0] - 3.0) < 1e-9
        assert res.residual_norm < 1e-9

    def test_circle_diagonal_intersection(self):
        def residual(x):
            return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[0] - x[1]])

        res = levenberg_marquardt(residual, np.array([1.0, 0.0]))
        assert res.converged
        assert np.allclose(res.x, [np.sqrt(2) / 2, np.sqrt(2) / 2], atol=1e-7)

    def test_monotone_accepted_steps(self):
        def residual(x):
            return np.array([x[0] ** 2 - 2.0, np.sin(x[1]) - 0.5, x[0] * x[1] - 1.0])

        # accepted steps never increase the norm, so the final residual is
        # bounded by the starting one even when the solve stalls
        for x0 in ([3.0, 3.0], [-1.0, 4.0], [0.1, 0.1]):
            start = float(np.linalg.norm(residual(np.array(x0))))
            res = levenberg_marquardt(residual, np.array(x0))
            assert res.residual_norm <= start + 1e-15

    def test_determinism(self):
        def residual(x):
            return np.array([x[0] ** 3 - x[1], x[1] ** 2 - 2.0 * x[0] - 1.0])

        a = levenberg_marquardt(residual, np.array([0.5, -0.5]))
        b = levenberg_marquardt(residual, np.array([0.5, -0.5]))
        assert np.array_equal(a.x, b.x)
        assert a.residual_norm == b.residual_norm
        assert a.iterations == b.iterations
        assert a.damping_trace == b.damping_trace

    @given(st.floats(0.1, 10.0))
    @settings(max_examples=20, deadline=None)
    def test_scale_sanity(self, scale):
        def residual(x):
            return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[0] - x[1]])

        base = levenberg_marquardt(residual, np.array([1.0, 0.0]))
        scaled = levenberg_marquardt(lambda x: scale * residual(x), np.array([1.0, 0.0]))
        assert np.allclose(base.x, scaled.x, atol=1e-6)

    def test_budget_exhaustion_flagged(self):
        # residual with no zero: min of |x^2 + 1| is 1, never below tolerance
        res = levenberg_marquardt(lambda x: x ** 2 + 1.0, np.array([5.0]),
                                  LmOptions(max_iter=5, tol_step=1e-300))
        assert res.residual_norm >= 1.0

    def test_non_finite_initial_raises(self):
        with pytest.raises(FloatingPointError):
            levenberg_marquardt(lambda x: np.array([np.nan]), np.array([1.0]))


class TestLmOptions:
    def test_defaults_valid(self):
        opts = LmOptions()
        assert opts.max_iter == 200
        assert opts.lambda_up > 1.0 > opts.lambda_down > 0.0

    @pytest.mark.parametrize("kwargs", [
        {"max_iter": 0},
        {"tol_residual": -1e-3},
        {"lambda_init": 0.0},
        {"lambda_up": 0.5},
        {"lambda_down": 1.5},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LmOptions(**kwargs)
