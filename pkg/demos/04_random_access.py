#!/usr/bin/env python3
# Multi-device activity detection: jointly optimize the device waveforms
# against random interference and compare with fixed orthogonal
# sequences in an overloaded configuration (K * n_tx > T).

import numpy as np

import kldwave as kw

gen = kw.RaGeneratorConfig(
    n_devices=4, n_tx=4, n_rx=4, snapshots=8, snr_db=8.0, rho=0.7, priors=0.5
)
sc = kw.generate_ra_scenario(gen, seed=10)

xs0 = kw.init_waveform_set(sc, seed=2)
xs_opt, trace = kw.ra_solve(sc, xs0, kw.SolverOptions(max_iters=400))
xs_orth = kw.orthogonal_baseline(sc)

print(f"K={gen.n_devices} devices, {gen.n_tx} tx antennas, T={gen.snapshots} "
      f"(overloaded: {gen.n_devices * gen.n_tx} columns > {gen.snapshots})")
print(f"block-coordinate sweeps: {trace.iterations} ({trace.status})")
print(f"weighted-sum divergence: optimized {trace.objective_per_iter[-1]:.3f} "
      f"vs orthogonal {kw.sum_kld(sc, xs_orth):.3f}")
print()

# Monte Carlo validation: mixture likelihood-ratio detector per device,
# thresholds calibrated to a common false-alarm budget.
alpha, n_cal, n_mc = 1e-3, 100_000, 5_000
res_opt = kw.detection_experiment(sc, xs_opt, alpha, n_cal, n_mc, kw.SeededRng(42, 0))
res_orth = kw.detection_experiment(sc, xs_orth, alpha, n_cal, n_mc, kw.SeededRng(42, 1))

print(f"target false alarm {alpha:.0e}; realized: "
      f"optimized {res_opt.p_fa_hat:.2e}, orthogonal {res_orth.p_fa_hat:.2e}")
print("per-device detection probability:")
print("  optimized ", np.round(res_opt.p_d_hat, 4))
print("  orthogonal", np.round(res_orth.p_d_hat, 4))
print(f"geometric mean: optimized {res_opt.geometric_mean:.4f} "
      f"(CI {res_opt.geometric_mean_ci[0]:.4f}..{res_opt.geometric_mean_ci[1]:.4f})")
print(f"                orthogonal {res_orth.geometric_mean:.4f} "
      f"(CI {res_orth.geometric_mean_ci[0]:.4f}..{res_orth.geometric_mean_ci[1]:.4f})")
