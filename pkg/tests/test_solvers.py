import numpy as np
import pytest

from kldwave.errors import ShapeMismatch
from kldwave.linalg import hermitian_part, kron_apply
from kldwave.objective import aux_star, f_obj
from kldwave.scenario import (
    GeneratorConfig,
    generate_scenario,
    init_waveform,
    validate,
    waveform_power,
)
from kldwave.solvers import (
    SolverOptions,
    fp_iterate,
    fp_kld,
    lambda_bar,
    mm_kld,
    mm_map,
    solve_x_sylvester,
)
from kldwave.solvers import _aux_operators, _max_eig_or_trace


def scenario_4x4(seed=0, mismatch=0.3):
    return generate_scenario(
        GeneratorConfig(n_tx=4, n_rx=4, snapshots=8, snr_db=7.0, clutter_mismatch=mismatch),
        seed=seed,
    )


def random_psd(rng, n, rank=None):
    rank = rank or n
    w = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return hermitian_part(w @ w.conj().T)


def random_pd(rng, n):
    return random_psd(rng, n) + np.eye(n)


class TestSolveXSylvester:
    def test_zero_rhs(self):
        x, mu = solve_x_sylvester(np.eye(3), np.eye(2), np.zeros((3, 2)), p_t=1.0)
        np.testing.assert_allclose(x, 0)
        assert mu == 0.0

    def test_identity_operators_projection(self):
        # With identity factors the equation is (1 + mu) X = B, so X is the
        # rescaled right-hand side and mu follows from the power budget.
        rng = np.random.default_rng(0)
        b = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        b *= 2.0 / np.linalg.norm(b)  # ||B||_F = 2 > sqrt(p_t)
        p_t = 1.0
        x, mu = solve_x_sylvester(np.eye(3), np.eye(2), b, p_t)
        np.testing.assert_allclose(x, np.sqrt(p_t) * b / np.linalg.norm(b), atol=1e-9)
        assert mu == pytest.approx(np.linalg.norm(b) / np.sqrt(p_t) - 1.0, rel=1e-6)

    def test_interior_solution_when_feasible(self):
        rng = np.random.default_rng(1)
        b = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        b *= 0.5 / np.linalg.norm(b)
        x, mu = solve_x_sylvester(np.eye(3), np.eye(2), b, p_t=1.0)
        assert mu == 0.0
        np.testing.assert_allclose(x, b, atol=1e-10)

    def test_residual_and_kkt_random(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = random_psd(rng, 3, rank=2)
            r = random_pd(rng, 2)
            b = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
            p_t = 1.5
            x, mu = solve_x_sylvester(a, r, b, p_t)
            resid = np.linalg.norm(a @ x @ r + mu * x - b)
            assert resid <= 1e-8 * np.linalg.norm(b)
            power = waveform_power(x)
            assert mu >= 0
            if mu > 1e-10:
                assert abs(power - p_t) <= 1e-10 * p_t
            else:
                assert power <= p_t * (1 + 1e-10)

    def test_structured_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = random_psd(rng, 4, rank=3)
            r = random_pd(rng, 3)
            b = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
            x_fast, mu_fast = solve_x_sylvester(a, r, b, p_t=2.0)
            x_dense, mu_dense = solve_x_sylvester(a, r, b, p_t=2.0, dense=True)
            np.testing.assert_allclose(x_fast, x_dense, atol=1e-8)
            assert mu_fast == pytest.approx(mu_dense, abs=1e-6 * max(1.0, mu_dense))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            solve_x_sylvester(np.eye(3), np.eye(2), np.zeros((2, 3)), p_t=1.0)


class TestLambdaBar:
    def test_identity_factors(self):
        lam_p, lam = lambda_bar(np.eye(3), np.eye(2), 1e-3, SolverOptions())
        assert lam_p == pytest.approx(1.0, abs=1e-10)
        assert lam == pytest.approx(1.0 + 1e-3, abs=1e-10)

    def test_diagonal_products(self):
        lam_p, _ = lambda_bar(np.diag([1.0, 3.0]), np.diag([2.0, 5.0]), 1e-6, SolverOptions())
        assert lam_p == pytest.approx(15.0, rel=1e-8)

    def test_matches_dense_kron_eigenvalue(self):
        rng = np.random.default_rng(4)
        opts = SolverOptions(power_iter_k=2000, power_iter_tol=1e-13)
        for _ in range(5):
            a = random_pd(rng, 4)
            r = random_pd(rng, 4)
            lam_p, _ = lambda_bar(a, r, 1e-9, opts)
            dense = np.linalg.eigvalsh(np.kron(r.T, a))[-1]
            assert lam_p == pytest.approx(dense, rel=1e-8)

    def test_default_margin_is_relative(self):
        lam_p, lam = lambda_bar(2.0 * np.eye(2), 3.0 * np.eye(2), None, SolverOptions())
        assert lam - lam_p == pytest.approx(1e-6 * lam_p)


class TestFpIterate:
    def test_monotone_over_run(self):
        sc = scenario_4x4(seed=1)
        low = validate(sc)
        opts = SolverOptions()
        x = init_waveform(sc, seed=2)
        f_prev = f_obj(sc, x)
        for _ in range(50):
            x = fp_iterate(sc, low, x, opts)
            f_cur = f_obj(sc, x)
            assert f_cur >= f_prev - 1e-9 * max(1.0, abs(f_prev))
            f_prev = f_cur

    def test_fixed_point_stationary(self):
        sc = scenario_4x4(seed=2)
        low = validate(sc)
        opts = SolverOptions()
        x, _ = fp_kld(sc, init_waveform(sc, seed=3), SolverOptions(epsilon=1e-12, max_iters=4000))
        f_before = f_obj(sc, x)
        x_next = fp_iterate(sc, low, x, opts)
        assert abs(f_obj(sc, x_next) - f_before) <= 1e-7 * max(1.0, abs(f_before))

    def test_zero_trap(self):
        sc = scenario_4x4(seed=3)
        low = validate(sc)
        x = np.zeros((sc.snapshots, sc.n_tx))
        np.testing.assert_allclose(fp_iterate(sc, low, x, SolverOptions()), 0)

    def test_kkt_at_iterates(self):
        sc = scenario_4x4(seed=4)
        low = validate(sc)
        opts = SolverOptions()
        x = init_waveform(sc, seed=5)
        for _ in range(5):
            a_mat, b_mat = _aux_operators(sc, low, x)
            x, mu = solve_x_sylvester(a_mat, sc.r_h1, b_mat, sc.power_budget, opts.mu_tol)
            resid = np.linalg.norm(a_mat @ x @ sc.r_h1 + mu * x - b_mat)
            assert resid <= 1e-8 * np.linalg.norm(b_mat)


class TestMmMap:
    def test_output_power_exact(self):
        sc = scenario_4x4(seed=5)
        low = validate(sc)
        x = init_waveform(sc, seed=6)
        out = mm_map(sc, low, x, SolverOptions())
        assert waveform_power(out) == pytest.approx(sc.power_budget, rel=1e-9)

    def test_ascent_from_boundary_points(self):
        sc = scenario_4x4(seed=6)
        low = validate(sc)
        opts = SolverOptions()
        rng = np.random.default_rng(7)
        for _ in range(200):
            x = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
            x *= np.sqrt(sc.power_budget) / np.linalg.norm(x)
            f0 = f_obj(sc, x)
            f1 = f_obj(sc, mm_map(sc, low, x, opts))
            assert f1 >= f0 - 1e-9 * max(1.0, abs(f0))

    def test_fixed_point_stationary(self):
        sc = scenario_4x4(seed=7)
        low = validate(sc)
        x, _ = mm_kld(sc, init_waveform(sc, seed=8), SolverOptions(epsilon=1e-12, max_iters=20000))
        f0 = f_obj(sc, x)
        f1 = f_obj(sc, mm_map(sc, low, x, SolverOptions()))
        assert abs(f1 - f0) <= 1e-7 * max(1.0, abs(f0))

    def test_matches_dense_kron_implementation(self):
        sc = generate_scenario(
            GeneratorConfig(n_tx=2, n_rx=2, snapshots=4, clutter_mismatch=0.2), seed=8
        )
        low = validate(sc)
        opts = SolverOptions()
        x = init_waveform(sc, seed=9)
        a_mat, b_mat = _aux_operators(sc, low, x)
        lam_a = _max_eig_or_trace(a_mat, opts)
        lam_r = _max_eig_or_trace(sc.r_h1, opts)
        lam_p = lam_a * lam_r
        lam = lam_p + opts.resolve_delta(lam_p)
        abar = np.kron(sc.r_h1.T, a_mat)
        xbar = x.flatten(order="F")
        direction = b_mat.flatten(order="F") + (lam * np.eye(8) - abar) @ xbar
        expected = np.sqrt(sc.power_budget) * direction / np.linalg.norm(direction)
        out = mm_map(sc, low, x, opts)
        np.testing.assert_allclose(out.flatten(order="F"), expected, atol=1e-10)

    def test_spectral_bound_validity(self):
        sc = scenario_4x4(seed=9)
        low = validate(sc)
        opts = SolverOptions()
        x = init_waveform(sc, seed=10)
        aux = aux_star(sc, x)
        a_mat = hermitian_part(aux.psi @ aux.gamma @ aux.psi.conj().T)
        lam_p, lam = lambda_bar(a_mat, sc.r_h1, None, opts)
        delta = lam - lam_p
        rng = np.random.default_rng(11)
        for _ in range(100):
            v = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
            quad = float(np.real(np.vdot(v, kron_apply(a_mat, sc.r_h1, v))))
            norm2 = float(np.real(np.vdot(v, v)))
            assert lam * norm2 >= quad + delta * norm2 * (1 - 1e-9)


class TestDrivers:
    def test_smoke_converges(self):
        sc = generate_scenario(GeneratorConfig(n_tx=2, n_rx=2, snapshots=4), seed=10)
        x0 = init_waveform(sc, seed=11)
        for runner in (fp_kld, mm_kld):
            _, trace = runner(sc, x0, SolverOptions(max_iters=20000))
            assert trace.status == "Converged"

    def test_epsilon_infinity_stops_after_one_iteration(self):
        sc = scenario_4x4(seed=11)
        x0 = init_waveform(sc, seed=12)
        for runner in (fp_kld, mm_kld):
            _, trace = runner(sc, x0, SolverOptions(epsilon=float("inf")))
            assert trace.status == "Converged"
            assert trace.iterations == 1

    def test_identical_seeds_identical_traces(self):
        sc = scenario_4x4(seed=12)
        x0 = init_waveform(sc, seed=13)
        opts = SolverOptions(max_iters=300)
        for runner in (fp_kld, mm_kld):
            _, t1 = runner(sc, x0, opts)
            _, t2 = runner(sc, x0, opts)
            assert t1.objective_per_iter == t2.objective_per_iter
            assert t1.iterations == t2.iterations
            assert t1.mu_per_iter == t2.mu_per_iter

    def test_trace_contract(self):
        sc = scenario_4x4(seed=13)
        x0 = init_waveform(sc, seed=14)
        x, trace = fp_kld(sc, x0, SolverOptions(max_iters=500))
        obj = np.array(trace.objective_per_iter)
        assert len(obj) == trace.iterations + 1
        assert len(trace.elapsed_seconds_per_iter) == trace.iterations
        assert len(trace.mu_per_iter) == trace.iterations
        slack = 1e-9 * np.maximum(1.0, np.abs(obj[:-1]))
        assert np.all(np.diff(obj) >= -slack)
        assert trace.final_power == pytest.approx(waveform_power(x))
        assert trace.final_power <= sc.power_budget * (1 + 1e-9)

    def test_cross_solver_consistency(self):
        sc = generate_scenario(GeneratorConfig(n_tx=3, n_rx=2, snapshots=6), seed=14)
        x0 = init_waveform(sc, seed=15)
        opts = SolverOptions(max_iters=50000)
        _, t_fp = fp_kld(sc, x0, opts)
        _, t_mm = mm_kld(sc, x0, opts)
        f_fp = t_fp.objective_per_iter[-1]
        f_mm = t_mm.objective_per_iter[-1]
        assert abs(f_fp - f_mm) <= 1e-3 * max(abs(f_fp), 1.0)

    def test_fp_needs_no_more_iterations_than_mm(self):
        wins = 0
        for seed in range(10):
            sc = scenario_4x4(seed=100 + seed)
            x0 = init_waveform(sc, seed=200 + seed)
            opts = SolverOptions(max_iters=50000)
            _, t_fp = fp_kld(sc, x0, opts)
            _, t_mm = mm_kld(sc, x0, opts)
            wins += t_fp.iterations <= t_mm.iterations
        assert wins >= 7
