from dataclasses import replace

import numpy as np
import pytest

from kldwave.isac import (
    IsacScenario,
    isac_iterate,
    isac_objective,
    isac_solve,
    pareto_sweep,
)
from kldwave.linalg import hermitian_part
from kldwave.objective import aux_star, comm_aux_star, f_cq_eval, f_obj_comparable, f_q_eval, mi_eval
from kldwave.scenario import (
    GeneratorConfig,
    generate_scenario,
    init_waveform,
    validate,
    waveform_power,
)
from kldwave.solvers import SolverOptions, fp_iterate, mm_map
from kldwave.isac import _composite_operators


def make_isac(seed=0, rho=0.5, n_tx=3, n_rx=3, snapshots=6, n_c=3):
    sensing = generate_scenario(
        GeneratorConfig(n_tx=n_tx, n_rx=n_rx, snapshots=snapshots, snr_db=7.0), seed=seed
    )
    rng = np.random.default_rng(seed + 1000)
    h_c = (
        rng.standard_normal((n_c, snapshots)) + 1j * rng.standard_normal((n_c, snapshots))
    ) * np.sqrt(0.5)
    return IsacScenario(sensing=sensing, h_c=h_c, r_nc=np.eye(n_c, dtype=complex), rho=rho)


def waterfilling_mi(h_c, r_nc, p_t, n_tx):
    # Classical power allocation over the strongest channel eigenmodes:
    # the rank of X X^H is capped at n_tx.
    import scipy.linalg

    white = scipy.linalg.solve_triangular(
        np.linalg.cholesky(r_nc), h_c, lower=True
    )
    gains = np.sort(np.linalg.eigvalsh(hermitian_part(white.conj().T @ white)))[::-1]
    gains = np.array([g for g in gains[:n_tx] if g > 1e-12])
    for k in range(len(gains), 0, -1):
        level = (p_t + np.sum(1.0 / gains[:k])) / k
        powers = level - 1.0 / gains[:k]
        if powers[-1] >= 0:
            return float(np.sum(np.log1p(powers * gains[:k])))
    return 0.0


class TestIsacObjective:
    def test_weight_collapse(self):
        sc = make_isac(rho=0.0)
        x = init_waveform(sc.sensing, seed=1)
        kld, mi, weighted = isac_objective(sc, x)
        assert weighted == pytest.approx(kld)
        sc1 = replace(sc, rho=1.0)
        kld, mi, weighted = isac_objective(sc1, x)
        assert weighted == pytest.approx(mi)

    def test_zero_waveform(self):
        sc = make_isac(rho=0.3)
        kld, mi, weighted = isac_objective(sc, np.zeros((6, 3)))
        assert kld == pytest.approx(0.0, abs=1e-9)
        assert mi == pytest.approx(0.0, abs=1e-12)
        assert weighted == pytest.approx(0.0, abs=1e-9)


class TestIsacIterate:
    def test_rho_zero_reduces_to_single_objective_updates(self):
        sc = make_isac(seed=1, rho=0.0)
        low = validate(sc.sensing)
        opts = SolverOptions()
        x = init_waveform(sc.sensing, seed=2)
        np.testing.assert_allclose(
            isac_iterate(sc, low, x, opts, "fp"),
            fp_iterate(sc.sensing, low, x, opts),
            atol=1e-8,
        )
        np.testing.assert_allclose(
            isac_iterate(sc, low, x, opts, "mm"),
            mm_map(sc.sensing, low, x, opts),
            atol=1e-8,
        )

    def test_rho_one_reaches_waterfilling(self):
        sc = make_isac(seed=2, rho=1.0, n_tx=4, n_rx=4, snapshots=4, n_c=4)
        opts = SolverOptions(max_iters=20000)
        x0 = init_waveform(sc.sensing, seed=3)
        x, _ = isac_solve(sc, x0, opts, variant="fp")
        achieved = mi_eval(sc.h_c, sc.r_nc, x)
        oracle = waterfilling_mi(sc.h_c, sc.r_nc, sc.sensing.power_budget, sc.sensing.n_tx)
        assert achieved == pytest.approx(oracle, rel=1e-3)

    @pytest.mark.parametrize("variant", ["fp", "mm"])
    def test_monotone_weighted_objective(self, variant):
        sc = make_isac(seed=3, rho=0.5)
        low = validate(sc.sensing)
        opts = SolverOptions()
        x = init_waveform(sc.sensing, seed=4)
        prev = isac_objective(sc, x)[2]
        for _ in range(100):
            x = isac_iterate(sc, low, x, opts, variant)
            cur = isac_objective(sc, x)[2]
            assert cur >= prev - 1e-9 * max(1.0, abs(prev))
            prev = cur


class TestCompositeSurrogate:
    def test_tightness_at_optimal_auxiliaries(self):
        for seed in range(5):
            sc = make_isac(seed=seed, rho=0.37)
            x = init_waveform(sc.sensing, seed=seed + 10)
            aux = aux_star(sc.sensing, x)
            caux = comm_aux_star(sc.h_c, sc.r_nc, x)
            combined = (1 - sc.rho) * f_q_eval(sc.sensing, x, aux) + sc.rho * f_cq_eval(
                sc.h_c, sc.r_nc, x, caux
            )
            target = (1 - sc.rho) * f_obj_comparable(sc.sensing, x) + sc.rho * mi_eval(
                sc.h_c, sc.r_nc, x
            )
            assert abs(combined - target) <= 1e-8 * max(1.0, abs(target))

    def test_spectral_bound_dominates_rayleigh_quotients(self):
        sc = make_isac(seed=6, rho=0.5)
        low = validate(sc.sensing)
        opts = SolverOptions()
        x = init_waveform(sc.sensing, seed=7)
        a_eff, c_eff, _ = _composite_operators(sc, low, x)
        from kldwave.solvers import _max_eig_or_trace

        lam_p = _max_eig_or_trace(a_eff, opts) * _max_eig_or_trace(
            sc.sensing.r_h1, opts
        ) + _max_eig_or_trace(c_eff, opts)
        delta = opts.resolve_delta(lam_p)
        lam = lam_p + delta
        rng = np.random.default_rng(8)
        for _ in range(100):
            v = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
            quad = float(
                np.real(np.vdot(v, a_eff @ v @ sc.sensing.r_h1 + c_eff @ v))
            )
            norm2 = float(np.real(np.vdot(v, v)))
            assert lam * norm2 >= quad + delta * norm2 * (1 - 1e-9)


class TestIsacSolve:
    def test_smoke_and_determinism(self):
        sc = make_isac(seed=7, rho=0.4)
        x0 = init_waveform(sc.sensing, seed=8)
        opts = SolverOptions(max_iters=5000)
        x1, t1 = isac_solve(sc, x0, opts, variant="mm", accelerate=True)
        x2, t2 = isac_solve(sc, x0, opts, variant="mm", accelerate=True)
        assert t1.status == "Converged"
        assert np.array_equal(x1, x2)
        assert t1.objective_per_iter == t2.objective_per_iter

    def test_epsilon_infinity(self):
        sc = make_isac(seed=8, rho=0.4)
        x0 = init_waveform(sc.sensing, seed=9)
        _, trace = isac_solve(sc, x0, SolverOptions(epsilon=float("inf")))
        assert trace.status == "Converged"
        assert trace.iterations == 1


class TestParetoSweep:
    def test_single_point_equals_plain_solve(self):
        sc = make_isac(seed=9, rho=0.0)
        opts = SolverOptions(max_iters=5000)
        points = pareto_sweep(sc, [0.0], opts, variant="fp", accelerate=False)
        assert len(points) == 1
        x0 = init_waveform(sc.sensing, opts.seed)
        x_direct, _ = isac_solve(replace(sc, rho=0.0), x0, opts, variant="fp")
        assert points[0].kld == pytest.approx(isac_objective(sc, x_direct)[0], rel=1e-9)

    def test_endpoint_dominance(self):
        sc = make_isac(seed=10, rho=0.0)
        opts = SolverOptions(max_iters=20000)
        points = pareto_sweep(sc, [0.0, 1.0], opts, variant="fp", accelerate=False)
        assert points[0].kld >= points[1].kld - 1e-6
        assert points[1].mi >= points[0].mi - 1e-6

    def test_grid_plumbing(self):
        sc = make_isac(seed=11, rho=0.0, n_tx=2, n_rx=2, snapshots=4, n_c=2)
        grid = [round(0.1 * k, 1) for k in range(11)]
        points = pareto_sweep(sc, grid, SolverOptions(max_iters=2000))
        assert len(points) == 11
        assert [p.rho for p in points] == grid
        for p in points:
            assert waveform_power(p.waveform) <= sc.sensing.power_budget * (1 + 1e-9)

    def test_rejects_bad_grid(self):
        sc = make_isac(seed=12)
        with pytest.raises(ValueError):
            pareto_sweep(sc, [0.5, 0.1], SolverOptions())
        with pytest.raises(ValueError):
            pareto_sweep(sc, [-0.1, 0.5], SolverOptions())
