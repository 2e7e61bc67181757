"""Experiment harness: config parsing, dispatch, and machine-readable outputs.

Five subcommands (``optimize``, ``benchmark``, ``pareto``,
``random-access``, ``validate``) consume one JSON config document each,
overridable per key with ``--set dotted.path=value``.  Every run writes
its outputs plus a manifest (resolved config, seeds, content hashes)
under the ``--out`` directory.  Exit status: 0 on success, 2 on config
or IO errors, 3 on numerical failures.

CSV schemas (header row, fixed column order, locale-free decimals):

* trace_<alg>.csv:   algorithm,iter,objective,elapsed_s,mu_or_gamma
* benchmark.csv:     algorithm,n_tx,n_rx,snapshots,median_iter_seconds,iterations,total_seconds
* pareto.csv:        rho,kld,mi,detection_probability,converged_iters
* random_access.csv: design,snr_db,snapshots,p_d_1..p_d_K,geometric_mean,ci_low,ci_high
"""

import argparse
import csv
import hashlib
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .accel import a_mm_kld
from .detection import (
    SeededRng,
    detection_experiment,
    llr,
    lrt_experiment,
    orthogonal_baseline,
)
from .errors import ConfigError, KldwaveError
from .isac import IsacScenario, pareto_sweep
from .linalg import (
    cholesky_pd,
    kron_apply,
    logdet_pd,
    power_iteration_max_eig,
)
from .objective import aux_star, f_obj_comparable, f_q_eval
from .random_access import (
    RaGeneratorConfig,
    generate_ra_scenario,
    init_waveform_set,
    load_ra_scenario,
    pattern_weights,
    ra_solve,
)
from .scenario import (
    GeneratorConfig,
    covariances,
    generate_scenario,
    init_waveform,
    load_scenario,
    save_waveform,
    validate,
)
from .solvers import SolverOptions, fp_kld, mm_kld, solve_x_sylvester

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

ALGORITHMS = ("fp", "mm", "amm")


# ---------------------------------------------------------------------------
# Config machinery: nested schema with defaults, unknown keys rejected.

_GENERATOR_SCHEMA = {
    "n_tx": 4,
    "n_rx": 4,
    "snapshots": 8,
    "snr_db": 7.0,
    "rho": 0.5,
    "clutter_ratio": 0.5,
    "clutter_mismatch": 0.0,
    "power_budget": None,
}

_SOLVER_SCHEMA = {
    "epsilon": 1e-6,
    "max_iters": 5000,
    "delta": None,
    "mu_tol": 1e-10,
    "power_iter_k": 100,
    "power_iter_tol": 1e-10,
}

_SCHEMAS = {
    "optimize": {
        "seed": 0,
        "algorithms": ["amm"],
        "scenario": {"path": None, "generator": dict(_GENERATOR_SCHEMA)},
        "init": {"kind": "random-gaussian"},
        "solver": dict(_SOLVER_SCHEMA),
    },
    "benchmark": {
        "seed": 0,
        "sizes": [8, 16],
        "algorithms": list(ALGORITHMS),
        "repetitions": 3,
        "snr_db": 7.0,
        "solver": dict(_SOLVER_SCHEMA),
    },
    "pareto": {
        "seed": 0,
        "rho_grid": [round(0.1 * k, 1) for k in range(11)],
        "scenario": {"path": None, "generator": dict(_GENERATOR_SCHEMA)},
        "comm": {"n_rx_c": 4, "noise_power": 1.0},
        "variant": "mm",
        "accelerate": True,
        "solver": dict(_SOLVER_SCHEMA),
        "detection": {"alpha": 1e-2, "n_cal": 20000, "n_mc": 5000},
    },
    "random-access": {
        "seed": 0,
        "scenario_path": None,
        "generator": {
            "n_devices": 4,
            "n_tx": 4,
            "n_rx": 4,
            "snapshots": 8,
            "snr_db": 8.0,
            "rho": 0.7,
            "priors": 0.5,
            "power_budget": None,
        },
        "snr_grid": None,
        "t_grid": None,
        "alpha": 1e-3,
        "n_cal": 200000,
        "n_mc": 10000,
        "statistic": "mixture",
        "solver": {**_SOLVER_SCHEMA, "max_iters": 500},
    },
    "validate": {"seed": 0, "scenario_path": None},
}


def _merge_config(schema, given, path=""):
    if not isinstance(given, dict):
        raise ConfigError(f"config section {path or '<root>'} must be an object")
    unknown = set(given) - set(schema)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {sorted(unknown)} under {path or '<root>'}"
        )
    merged = {}
    for key, default in schema.items():
        sub_path = f"{path}.{key}" if path else key
        if isinstance(default, dict):
            merged[key] = _merge_config(default, given.get(key, {}), sub_path)
        else:
            merged[key] = given.get(key, default)
    return merged


def _parse_set(expr):
    if "=" not in expr:
        raise ConfigError(f"--set expects key=value, got {expr!r}")
    key, raw = expr.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(config, key, value):
    parts = key.split(".")
    node = config
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override through non-object key {part!r}")
    node[parts[-1]] = value


def load_config(command, args):
    given = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                given = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for expr in args.set or []:
        _apply_override(given, *_parse_set(expr))
    if args.seed is not None:
        given["seed"] = args.seed
    return _merge_config(_SCHEMAS[command], given)


def _solver_options(section, seed):
    return SolverOptions(
        epsilon=float(section["epsilon"]),
        max_iters=int(section["max_iters"]),
        delta=None if section["delta"] is None else float(section["delta"]),
        mu_tol=float(section["mu_tol"]),
        power_iter_k=int(section["power_iter_k"]),
        power_iter_tol=float(section["power_iter_tol"]),
        seed=int(seed),
    )


def _resolve_scenario(section, seed):
    if section["path"]:
        return load_scenario(section["path"])
    gen = GeneratorConfig(**section["generator"])
    return generate_scenario(gen, seed)


# ---------------------------------------------------------------------------
# Output helpers.


def _write_csv(path, header, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_dir, command, config, outputs, started, elapsed):
    manifest = {
        "artifact": "kldwave",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "started_utc": started,
        "elapsed_seconds": elapsed,
        "outputs": {name: _sha256(os.path.join(out_dir, name)) for name in outputs},
    }
    tmp = os.path.join(out_dir, "manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))


def _run_algorithm(name, scenario, x0, opts):
    if name == "fp":
        return fp_kld(scenario, x0, opts)
    if name == "mm":
        return mm_kld(scenario, x0, opts)
    if name == "amm":
        return a_mm_kld(scenario, x0, opts)
    raise ConfigError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")


# ---------------------------------------------------------------------------
# Commands.


def cmd_optimize(config, out_dir):
    algorithms = config["algorithms"]
    if isinstance(algorithms, str):
        algorithms = [algorithms]
    for name in algorithms:
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    seed = int(config["seed"])
    scenario = _resolve_scenario(config["scenario"], seed)
    opts = _solver_options(config["solver"], seed)
    x0 = init_waveform(scenario, seed, kind=config["init"]["kind"])
    outputs = []
    for name in algorithms:
        x, trace = _run_algorithm(name, scenario, x0, opts)
        steps = trace.mu_per_iter or trace.gamma_per_iter
        rows = [[name, 0, repr(float(trace.objective_per_iter[0])), "", ""]]
        for k in range(trace.iterations):
            rows.append(
                [
                    name,
                    k + 1,
                    repr(float(trace.objective_per_iter[k + 1])),
                    repr(float(trace.elapsed_seconds_per_iter[k])),
                    repr(float(steps[k])) if k < len(steps) else "",
                ]
            )
        trace_name = f"trace_{name}.csv"
        _write_csv(
            os.path.join(out_dir, trace_name),
            ["algorithm", "iter", "objective", "elapsed_s", "mu_or_gamma"],
            rows,
        )
        wave_name = f"waveform_{name}.json"
        save_waveform(x, os.path.join(out_dir, wave_name))
        outputs += [trace_name, wave_name]
        print(
            f"{name}: {trace.status} after {trace.iterations} iterations, "
            f"objective {trace.objective_per_iter[-1]:.9g}, "
            f"power {trace.final_power:.9g}"
        )
    return outputs


def cmd_benchmark(config, out_dir):
    reps = int(config["repetitions"])
    if reps < 3:
        raise ConfigError("repetitions must be >= 3")
    sizes = []
    for entry in config["sizes"]:
        if isinstance(entry, dict):
            extra = set(entry) - {"n_tx", "n_rx", "snapshots"}
            if extra:
                raise ConfigError(f"unknown size keys {sorted(extra)}")
            sizes.append((int(entry["n_tx"]), int(entry["n_rx"]), int(entry["snapshots"])))
        else:
            n = int(entry)
            sizes.append((n, n, 2 * n))
    seed = int(config["seed"])
    rows = []
    for n_tx, n_rx, snapshots in sizes:
        gen = GeneratorConfig(
            n_tx=n_tx, n_rx=n_rx, snapshots=snapshots, snr_db=float(config["snr_db"])
        )
        scenario = generate_scenario(gen, seed)
        x0 = init_waveform(scenario, seed)
        for name in config["algorithms"]:
            for rep in range(reps):
                opts = _solver_options(config["solver"], seed + rep)
                _, trace = _run_algorithm(name, scenario, x0, opts)
                times = trace.elapsed_seconds_per_iter
                per_iter = statistics.median(times[1:] if len(times) > 1 else times)
                rows.append(
                    [
                        name,
                        n_tx,
                        n_rx,
                        snapshots,
                        repr(per_iter),
                        trace.iterations,
                        repr(math.fsum(times)),
                    ]
                )
    _write_csv(
        os.path.join(out_dir, "benchmark.csv"),
        [
            "algorithm",
            "n_tx",
            "n_rx",
            "snapshots",
            "median_iter_seconds",
            "iterations",
            "total_seconds",
        ],
        rows,
    )
    return ["benchmark.csv"]


def cmd_pareto(config, out_dir):
    seed = int(config["seed"])
    sensing = _resolve_scenario(config["scenario"], seed)
    comm = config["comm"]
    n_c = int(comm["n_rx_c"])
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0DE]))
    h_c = (
        rng.standard_normal((n_c, sensing.snapshots))
        + 1j * rng.standard_normal((n_c, sensing.snapshots))
    ) * np.sqrt(0.5)
    r_nc = float(comm["noise_power"]) * np.eye(n_c, dtype=complex)
    sc = IsacScenario(sensing=sensing, h_c=h_c, r_nc=r_nc, rho=0.0)
    opts = _solver_options(config["solver"], seed)
    points = pareto_sweep(
        sc,
        [float(r) for r in config["rho_grid"]],
        opts,
        variant=config["variant"],
        accelerate=bool(config["accelerate"]),
    )
    det = config["detection"]
    rows = []
    for index, point in enumerate(points):
        k0, k1 = covariances(sensing, point.waveform)
        res = lrt_experiment(
            k0,
            k1,
            sensing.n_rx,
            float(det["alpha"]),
            int(det["n_cal"]),
            int(det["n_mc"]),
            SeededRng(seed, stream=index),
        )
        rows.append(
            [
                repr(point.rho),
                repr(point.kld),
                repr(point.mi),
                repr(res.p_d),
                point.iterations,
            ]
        )
    _write_csv(
        os.path.join(out_dir, "pareto.csv"),
        ["rho", "kld", "mi", "detection_probability", "converged_iters"],
        rows,
    )
    return ["pareto.csv"]


def _ra_point(args):
    (config, snr_db, snapshots, seed, stream) = args
    gen_cfg = dict(config["generator"])
    gen_cfg["snr_db"] = snr_db
    gen_cfg["snapshots"] = snapshots
    if config["scenario_path"]:
        sc = load_ra_scenario(config["scenario_path"])
    else:
        sc = generate_ra_scenario(RaGeneratorConfig(**gen_cfg), seed)
    opts = _solver_options(config["solver"], seed)
    xs0 = init_waveform_set(sc, seed)
    xs_opt, _ = ra_solve(sc, xs0, opts)
    designs = [("optimized", xs_opt), ("orthogonal", orthogonal_baseline(sc))]
    rows = []
    for label, xs in designs:
        res = detection_experiment(
            sc,
            xs,
            float(config["alpha"]),
            int(config["n_cal"]),
            int(config["n_mc"]),
            SeededRng(seed, stream=stream),
            statistic=config["statistic"],
        )
        rows.append(
            [label, repr(float(snr_db)), snapshots]
            + [repr(float(p)) for p in res.p_d_hat]
            + [
                repr(res.geometric_mean),
                repr(res.geometric_mean_ci[0]),
                repr(res.geometric_mean_ci[1]),
            ]
        )
    return rows


def cmd_random_access(config, out_dir, parallel=1):
    seed = int(config["seed"])
    base_snr = float(config["generator"]["snr_db"])
    base_t = int(config["generator"]["snapshots"])
    snr_grid = config["snr_grid"] or [base_snr]
    t_grid = config["t_grid"] or [base_t]
    points = [
        (config, float(snr), int(t), seed, index)
        for index, (snr, t) in enumerate(
            (snr, t) for snr in snr_grid for t in t_grid
        )
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            row_blocks = list(pool.map(_ra_point, points))
    else:
        row_blocks = [_ra_point(p) for p in points]
    n_devices = int(config["generator"]["n_devices"])
    header = (
        ["design", "snr_db", "snapshots"]
        + [f"p_d_{k + 1}" for k in range(n_devices)]
        + ["geometric_mean", "ci_low", "ci_high"]
    )
    rows = [row for block in row_blocks for row in block]
    _write_csv(os.path.join(out_dir, "random_access.csv"), header, rows)
    return ["random_access.csv"]


# ---------------------------------------------------------------------------
# validate: fast headless invariant battery.


def _validate_checks(seed):
    rng = np.random.default_rng(seed)

    def random_pd(n):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return a @ a.conj().T + n * np.eye(n)

    checks = []

    m = random_pd(5)
    low = cholesky_pd(m)
    checks.append(
        ("cholesky residual", np.linalg.norm(low @ low.conj().T - m) <= 1e-10 * np.linalg.norm(m))
    )
    checks.append(
        ("logdet vs eigenvalues", abs(logdet_pd(m) - float(np.sum(np.log(np.linalg.eigvalsh(m))))) <= 1e-8)
    )
    a, r = random_pd(3), random_pd(4)
    x = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    dense = (np.kron(r.T, a) @ x.flatten(order="F")).reshape((3, 4), order="F")
    checks.append(("kron apply vs dense", np.allclose(kron_apply(a, r, x), dense, atol=1e-10)))
    checks.append(
        (
            "power iteration vs dense eig",
            abs(power_iteration_max_eig(m, 500, 1e-12, seed) - np.linalg.eigvalsh(m)[-1])
            <= 1e-6 * np.linalg.eigvalsh(m)[-1],
        )
    )

    gen = GeneratorConfig(n_tx=3, n_rx=2, snapshots=5, clutter_mismatch=0.2)
    sc = generate_scenario(gen, seed)
    x0 = init_waveform(sc, seed)
    aux = aux_star(sc, x0)
    comparable = f_obj_comparable(sc, x0)
    fq = f_q_eval(sc, x0, aux)
    checks.append(("surrogate tightness", abs(fq - comparable) <= 1e-8 * max(1.0, abs(comparable))))

    opts = SolverOptions(max_iters=200, seed=seed)
    ok = True
    for runner in (fp_kld, mm_kld, a_mm_kld):
        _, trace = runner(sc, x0, opts)
        obj = np.array(trace.objective_per_iter)
        slack = 1e-9 * np.maximum(1.0, np.abs(obj[:-1]))
        ok = ok and bool(np.all(np.diff(obj) >= -slack))
    checks.append(("solver monotonicity", ok))

    l = validate(sc)
    a_mat = aux.psi @ aux.gamma @ aux.psi.conj().T
    b_mat = aux.psi @ aux.gamma @ l.conj().T
    x_new, mu = solve_x_sylvester(a_mat, sc.r_h1, b_mat, sc.power_budget)
    resid = np.linalg.norm(a_mat @ x_new @ sc.r_h1 + mu * x_new - b_mat)
    checks.append(("stationarity residual", resid <= 1e-8 * np.linalg.norm(b_mat)))

    k0 = random_pd(2)
    k1 = random_pd(2)
    y = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    checks.append(("llr antisymmetry", abs(llr(y, k0, k1) + llr(y, k1, k0)) <= 1e-9))

    weights = pattern_weights([0.3, 0.6, 0.2], 0)
    checks.append(("pattern weights sum", abs(sum(w for _, w in weights) - 1.0) <= 1e-12))
    return checks


def cmd_validate(config, out_dir):
    seed = int(config["seed"])
    print(f"validation battery (seed {seed})")
    if config["scenario_path"]:
        scenario = load_scenario(config["scenario_path"])
        validate(scenario)
        print(f"PASS scenario file {config['scenario_path']}")
    failures = 0
    for name, ok in _validate_checks(seed):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    if failures:
        raise KldwaveError(f"{failures} validation check(s) failed")
    return []


# ---------------------------------------------------------------------------
# Entry point.


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kldwave",
        description="Divergence-maximizing waveform design experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("optimize", "benchmark", "pareto", "random-access", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config key by dotted path (repeatable)",
        )
        p.add_argument("--parallel", type=int, default=1, help="concurrent runs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    tic = time.perf_counter()
    try:
        config = load_config(args.command, args)
        out_dir = args.out
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "optimize":
            outputs = cmd_optimize(config, out_dir)
        elif args.command == "benchmark":
            outputs = cmd_benchmark(config, out_dir)
        elif args.command == "pareto":
            outputs = cmd_pareto(config, out_dir)
        elif args.command == "random-access":
            outputs = cmd_random_access(config, out_dir, parallel=args.parallel)
        else:
            outputs = cmd_validate(config, out_dir)
        _write_manifest(
            out_dir, args.command, config, outputs, started, time.perf_counter() - tic
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KldwaveError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
