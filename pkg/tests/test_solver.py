import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import crandn
from mimo_glasso.channel import DimensionError
from mimo_glasso.solver import (InfeasibleError, NumericDivergenceError, SolverConfig, block_soft_threshold,
                                data_fit, kkt_bound, kkt_residual, l21_norm, objective, smooth_gradient,
                                solve_constrained, solve_rls, spectral_norm, zero_threshold)
from oracles import (constrained_optimum, finite_difference_gradient, objective_terms,
                     projected_subgradient, prox_condition_residual)

H22 = np.array([[0.72751167 - 0.98485839j, 1.16101279 + 0.047515j],
                [0.81085316 + 0.60906708j, -0.68814183 + 0.36004944j]])
V22 = np.array([[1.28006521 - 0.78327423j, 0.53092651 + 1.04963326j],
                [0.45237832 + 0.03458629j, -0.51712311 + 0.57383138j]])
# objective_terms(H22, V22, lam=0.3, mu=0.7, beta=1.5)
OBJ22 = 10.308167548054099


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.lam, cfg.mu, cfg.beta, cfg.eta) == (0.0, 0.0, 1.0, 1.0)
        assert cfg.tolerance == 1e-8 and cfg.max_iterations == 5000 and cfg.acceleration

    @pytest.mark.parametrize("bad", [dict(lam=-1), dict(mu=-0.1), dict(beta=0), dict(eta=0),
                                     dict(tolerance=0), dict(max_iterations=0)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


class TestObjective:
    def test_zero_matrix(self, rng):
        h = crandn(rng, 3, 4)
        cfg = SolverConfig(lam=1, mu=1, beta=1)
        assert objective(h, np.zeros((3, 4)), cfg) == pytest.approx(4.0)

    def test_scalar(self):
        cfg = SolverConfig(lam=1, mu=1, beta=1)
        assert objective(np.array([[1.0]]), np.array([[1.0]]), cfg) == pytest.approx(2.0)

    def test_frozen_fixture(self):
        cfg = SolverConfig(lam=0.3, mu=0.7, beta=1.5)
        assert objective(H22, V22, cfg) == pytest.approx(OBJ22, rel=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_loops(self, seed):
        r = np.random.default_rng(seed)
        h, v = crandn(r, 3, 4), crandn(r, 3, 4)
        cfg = SolverConfig(lam=0.2, mu=0.4, beta=0.8)
        assert objective(h, v, cfg) == pytest.approx(objective_terms(h, v, 0.2, 0.4, 0.8), rel=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            objective(crandn(rng, 3, 4), crandn(rng, 4, 3), SolverConfig())

    def test_l21(self):
        v = np.array([[3.0, 0.0], [4.0, 1j]])
        assert l21_norm(v) == pytest.approx(6.0)


class TestGradient:
    def test_stationary_point(self, rng):
        h = crandn(rng, 3, 3)
        v = 2.0 * np.linalg.inv(h.T)
        g = smooth_gradient(h, v, 0.0, 2.0)
        assert np.max(np.abs(g)) < 1e-10

    def test_pure_ridge(self, rng):
        v = crandn(rng, 2, 3)
        np.testing.assert_allclose(smooth_gradient(np.zeros((2, 3)), v, 1.0, 1.0), 2 * v)

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        h, v = crandn(r, 3, 2), crandn(r, 3, 2)
        lam, beta = 0.37, 1.2
        g = smooth_gradient(h, v, lam, beta)
        fd = finite_difference_gradient(lambda x: objective_terms(h, x, lam, 0.0, beta), v)
        for a, b in ((g.real, fd.real), (g.imag, fd.imag)):
            np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-8)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            smooth_gradient(crandn(rng, 3, 2), crandn(rng, 2, 3), 0.0, 1.0)


complex_cols = arrays(np.complex128, st.integers(1, 6),
                      elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))


class TestProx:
    def test_zero_threshold_is_identity(self, rng):
        v = crandn(rng, 3, 4)
        np.testing.assert_array_equal(block_soft_threshold(v, 0.0), v)

    def test_closed_form(self):
        v = np.array([[2.0, 0.5], [0.0, 0.0]], dtype=complex)
        out = block_soft_threshold(v, 1.0)
        np.testing.assert_allclose(out[:, 0], [1.0, 0.0])
        assert np.all(out[:, 1] == 0)

    def test_exact_zero_columns(self, rng):
        v = crandn(rng, 4, 6) * np.array([1e-3, 5, 1e-9, 2, 1e-2, 3])
        out = block_soft_threshold(v, 0.5)
        zero = np.linalg.norm(v, axis=0) <= 0.5
        assert np.all(out[:, zero] == 0)
        # nonzero-column count by exact-zero counting
        assert np.count_nonzero(np.any(out != 0, axis=0)) == np.count_nonzero(~zero)

    def test_negative_threshold(self, rng):
        with pytest.raises(ValueError):
            block_soft_threshold(crandn(rng, 2, 2), -1.0)

    @settings(max_examples=300, deadline=None)
    @given(complex_cols, st.floats(0, 100))
    def test_optimality_condition(self, col, t):
        y = block_soft_threshold(col[:, None], t)[:, 0]
        res, is_zero = prox_condition_residual(y, col, t)
        if is_zero:
            assert res == 0.0
        else:
            assert res <= 1e-10 * max(1.0, np.linalg.norm(col))

    @settings(max_examples=100, deadline=None)
    @given(complex_cols, st.floats(0, 10), st.floats(1e-3, 1e3))
    def test_scale_covariance(self, col, t, c):
        v = col[:, None]
        np.testing.assert_allclose(block_soft_threshold(c * v, c * t), c * block_soft_threshold(v, t),
                                   rtol=1e-9, atol=1e-9 * c * max(1.0, np.abs(v).max()))


def test_spectral_norm(rng):
    for shape in [(3, 5), (8, 8), (16, 4)]:
        h = crandn(rng, *shape)
        assert spectral_norm(h) == pytest.approx(np.linalg.norm(h, 2), rel=1e-3)


class TestSolveRLS:
    def test_large_mu_gives_zero(self, rng):
        h = crandn(rng, 4, 5)
        mu = 10 * 1.0 * np.linalg.norm(h, 2) * np.sqrt(5)
        res = solve_rls(h, SolverConfig(mu=mu))
        assert np.all(res.v_matrix == 0)
        assert res.kkt_residual == 0.0
        assert res.converged

    def test_zero_threshold_is_sharp(self, rng):
        h = crandn(rng, 4, 5)
        mu0 = zero_threshold(h, 1.0)
        assert np.all(solve_rls(h, SolverConfig(mu=mu0 * 1.001)).v_matrix == 0)
        assert np.any(solve_rls(h, SolverConfig(mu=mu0 * 0.95)).v_matrix != 0)

    def test_channel_inversion(self):
        h = crandn(np.random.default_rng(8), 4, 4)
        res = solve_rls(h, SolverConfig(tolerance=1e-15, max_iterations=200_000))
        assert np.linalg.norm(h.T @ res.v_matrix - np.eye(4)) <= 1e-6

    def test_against_subgradient_oracle(self):
        h = crandn(np.random.default_rng(23), 2, 3)
        cfg = SolverConfig(lam=0.1, mu=0.5, beta=1.0)
        res = solve_rls(h, cfg)
        ref = projected_subgradient(h[None], 0.1, 0.5, 1.0, iterations=100_000)[0]
        assert abs(res.objective - ref) <= 1e-4
        assert res.objective == pytest.approx(objective(h, res.v_matrix, cfg), rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_plain_descent(self, seed):
        r = np.random.default_rng(seed)
        h = crandn(r, 5, 6)
        res = solve_rls(h, SolverConfig(lam=0.05, mu=0.8, acceleration=False, max_iterations=500))
        assert np.all(np.diff(res.objective_trace) <= 1e-12)

    @pytest.mark.parametrize("accel", [True, False])
    def test_converged_implies_kkt_bound(self, rng, accel):
        h = crandn(rng, 6, 4)
        cfg = SolverConfig(lam=0.2, mu=1.0, acceleration=accel, max_iterations=20_000)
        res = solve_rls(h, cfg)
        assert res.converged
        assert res.kkt_residual <= kkt_bound(h, cfg)
        assert res.kkt_residual == pytest.approx(kkt_residual(h, res.v_matrix, cfg))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self, rng):
        h = crandn(rng, 4, 4) * 1e3
        with pytest.raises(NumericDivergenceError):
            solve_rls(h, SolverConfig(acceleration=False, max_iterations=5000), lipschitz=1e-12)

    def test_warm_start_shape_checked(self, rng):
        with pytest.raises(DimensionError):
            solve_rls(crandn(rng, 3, 2), SolverConfig(), v0=np.zeros((2, 3)))


class TestSolveConstrained:
    def test_inactive_constraints(self, rng):
        h = crandn(rng, 6, 3)
        cfg = SolverConfig()
        res = solve_constrained(h, power=1e3, l_users=3, cfg=cfg.with_(eta=1e3))
        ref = solve_rls(h, cfg)
        assert res.mu == 0.0 and res.lam == 0.0
        np.testing.assert_array_equal(res.v_matrix, ref.v_matrix)

    @pytest.mark.parametrize("seed", range(6))
    def test_feasible(self, seed):
        r = np.random.default_rng(seed)
        m, k = r.integers(2, 9, size=2)
        l = int(r.integers(1, k + 1))
        p = float(r.choice([0.5, 1.0, 10.0]))
        res = solve_constrained(crandn(r, m, k), p, l, SolverConfig())
        assert l21_norm(res.v_matrix) <= l * (1 + 1e-6)
        assert np.linalg.norm(res.v_matrix) ** 2 <= p * (1 + 1e-6)

    @pytest.mark.parametrize("m,k,l,p", [(4, 4, 2, 1.0), (4, 4, 1, 10.0), (3, 5, 2, 4.0)])
    def test_against_conic_oracle(self, m, k, l, p):
        h = crandn(np.random.default_rng(m * 100 + k * 10 + l), m, k)
        ref, _ = constrained_optimum(h, p, l, 1.0)
        res = solve_constrained(h, p, l, SolverConfig())
        assert abs(data_fit(h, res.v_matrix, 1.0) - ref) <= 1e-3

    def test_sparsity_constraint_binds(self):
        h = crandn(np.random.default_rng(5), 4, 4)
        res = solve_constrained(h, 10.0, 1, SolverConfig())
        assert res.mu > 0
        assert l21_norm(res.v_matrix) == pytest.approx(1.0, rel=1e-3)

    @pytest.mark.parametrize("l", [0, 5])
    def test_bad_l(self, rng, l):
        with pytest.raises(ValueError):
            solve_constrained(crandn(rng, 3, 4), 1.0, l, SolverConfig())

    def test_infeasible_error_type(self):
        assert issubclass(InfeasibleError, RuntimeError)
