"""Sensing problem data model, synthetic generation, and file persistence.

A scenario bundles the second-order statistics of a binary hypothesis
test: target covariance, clutter covariances under both hypotheses,
noise covariance, dimensions, and the transmit power budget.  Solvers
consume scenarios read-only.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    IllPosedDetection,
    InvalidGenerator,
    NotPositiveDefinite,
    ShapeMismatch,
    SingularNoise,
)
from .linalg import check_hermitian, cholesky_pd, hermitian_part

__all__ = [
    "SensingScenario",
    "GeneratorConfig",
    "validate",
    "covariances",
    "generate_scenario",
    "init_waveform",
    "waveform_power",
    "save_scenario",
    "load_scenario",
    "save_waveform",
    "load_waveform",
]

# Relative pivot threshold shared with the factorization kernels.
PD_REL_TOL = 1e-10


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SensingScenario:
    """Statistics of the two-hypothesis sensing problem.

    Attributes
    ----------
    n_tx, n_rx : int
        Transmit / receive antenna counts.
    snapshots : int
        Number of snapshots T; waveforms are ``snapshots x n_tx``.
    power_budget : float
        Transmit energy budget on ``trace(X X^H)``.
    r_target : ndarray, (n_tx, n_tx)
        Target response covariance.
    r_clutter0, r_clutter1 : ndarray, (n_tx, n_tx)
        Clutter covariances under the target-absent / target-present
        hypotheses.
    r_noise : ndarray, (snapshots, snapshots)
        Noise covariance (positive definite).
    """

    n_tx: int
    n_rx: int
    snapshots: int
    power_budget: float
    r_target: np.ndarray
    r_clutter0: np.ndarray
    r_clutter1: np.ndarray
    r_noise: np.ndarray

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "snapshots"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.power_budget > 0:
            raise ValueError("power_budget must be positive")
        nt, t = self.n_tx, self.snapshots
        for name, dim in (
            ("r_target", nt),
            ("r_clutter0", nt),
            ("r_clutter1", nt),
            ("r_noise", t),
        ):
            mat = check_hermitian(getattr(self, name))
            if mat.shape != (dim, dim):
                raise ShapeMismatch(f"{name} must be {dim}x{dim}, got {mat.shape}")
            object.__setattr__(self, name, _freeze(mat))

    @property
    def r_h1(self):
        """Combined target-present covariance ``r_target + r_clutter1``."""
        return self.r_target + self.r_clutter1


def validate(scenario):
    """Check the scenario's positivity assumptions.

    Returns the lower Cholesky factor ``L`` of the covariance difference
    ``(r_target + r_clutter1) - r_clutter0``, the quantity every solver
    factors once up front.

    Raises
    ------
    SingularNoise
        If ``r_noise`` is not positive definite.
    IllPosedDetection
        If the covariance difference is not positive definite; the two
        hypotheses would then be indistinguishable.
    """
    try:
        cholesky_pd(scenario.r_noise, rel_tol=PD_REL_TOL)
    except NotPositiveDefinite as exc:
        raise SingularNoise(f"noise covariance is singular: {exc}") from exc
    diff = hermitian_part(scenario.r_h1 - scenario.r_clutter0)
    try:
        return cholesky_pd(diff, rel_tol=PD_REL_TOL)
    except NotPositiveDefinite as exc:
        raise IllPosedDetection(
            "covariance difference (r_target + r_clutter1) - r_clutter0 "
            f"is not positive definite: {exc}"
        ) from exc


def covariances(scenario, x):
    """Observation covariances under both hypotheses for waveform ``x``.

    Returns ``(k0, k1)`` with ``k0 = X R0 X^H + R_N`` and
    ``k1 = X (R_H + R1) X^H + R_N``; both are Hermitian positive
    definite whenever ``r_noise`` is.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (scenario.snapshots, scenario.n_tx):
        raise ShapeMismatch(
            f"waveform must be {scenario.snapshots}x{scenario.n_tx}, got {x.shape}"
        )
    k0 = hermitian_part(x @ scenario.r_clutter0 @ x.conj().T + scenario.r_noise)
    k1 = hermitian_part(x @ scenario.r_h1 @ x.conj().T + scenario.r_noise)
    return k0, k1


def waveform_power(x):
    """Transmit energy ``trace(X X^H)`` = squared Frobenius norm."""
    x = np.asarray(x)
    return float(np.sum(np.abs(x) ** 2))


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the synthetic scenario generator.

    The target covariance is an exponential-correlation Toeplitz matrix
    ``R[m, n] = rho ** |m - n|`` (trace equal to ``n_tx``).  Clutter under
    the target-absent hypothesis is an independently drawn
    exponential-correlation matrix scaled so its trace is
    ``clutter_ratio * n_tx``; the target-present clutter adds another
    independently drawn component with trace ``clutter_mismatch * n_tx``,
    which keeps the covariance difference positive definite by
    construction.  Noise is white with variance
    ``power_budget / (n_tx * 10**(snr_db/10))``, i.e.
    ``snr_db = 10 log10(P_t / (n_tx sigma^2))``.
    """

    n_tx: int = 4
    n_rx: int = 4
    snapshots: int = 8
    snr_db: float = 7.0
    rho: float = 0.5
    clutter_ratio: float = 0.5
    clutter_mismatch: float = 0.0
    power_budget: float = None  # defaults to n_tx

    def resolved_power(self):
        return float(self.n_tx if self.power_budget is None else self.power_budget)


def _exp_corr(n, rho):
    # Kac-Murdock-Szego matrix; positive definite for |rho| < 1.
    idx = np.arange(n)
    return scipy.linalg.toeplitz(rho ** np.abs(idx)).astype(complex)


def generate_scenario(gen, seed):
    """Draw a valid scenario from the generator, deterministically in ``seed``."""
    if not (0.0 <= gen.rho < 1.0):
        raise InvalidGenerator("rho must lie in [0, 1)")
    if gen.clutter_ratio < 0 or gen.clutter_mismatch < 0:
        raise InvalidGenerator("clutter ratios must be nonnegative")
    p_t = gen.resolved_power()
    if p_t <= 0:
        raise InvalidGenerator("power budget must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CE0]))
    nt = gen.n_tx
    r_target = _exp_corr(nt, gen.rho)
    rho0, rho1 = rng.uniform(0.0, gen.rho, size=2)
    r_clutter0 = gen.clutter_ratio * _exp_corr(nt, rho0)
    r_clutter1 = r_clutter0 + gen.clutter_mismatch * _exp_corr(nt, rho1)
    sigma2 = p_t / (nt * 10.0 ** (gen.snr_db / 10.0))
    r_noise = sigma2 * np.eye(gen.snapshots, dtype=complex)
    scenario = SensingScenario(
        n_tx=nt,
        n_rx=gen.n_rx,
        snapshots=gen.snapshots,
        power_budget=p_t,
        r_target=r_target,
        r_clutter0=r_clutter0,
        r_clutter1=r_clutter1,
        r_noise=r_noise,
    )
    try:
        validate(scenario)
    except (IllPosedDetection, SingularNoise) as exc:
        raise InvalidGenerator(str(exc)) from exc
    return scenario


def _init_matrix(t, nt, p_t, seed_key, kind):
    if kind == "random-gaussian":
        rng = np.random.default_rng(np.random.SeedSequence(seed_key))
        x = rng.standard_normal((t, nt)) + 1j * rng.standard_normal((t, nt))
    elif kind == "scaled-identity-block":
        x = np.zeros((t, nt), dtype=complex)
        block = min(t, nt)
        x[:block, :block] = np.eye(block)
    else:
        raise ValueError(f"unknown init kind {kind!r}")
    return np.sqrt(p_t / waveform_power(x)) * x


def init_waveform(scenario, seed, kind="random-gaussian"):
    """Starting waveform with transmit power exactly ``power_budget``.

    ``kind="random-gaussian"`` draws i.i.d. complex Gaussian entries and
    normalizes; ``kind="scaled-identity-block"`` stacks a scaled identity
    over zero rows.
    """
    return _init_matrix(
        scenario.snapshots,
        scenario.n_tx,
        scenario.power_budget,
        [int(seed), 0x1417],
        kind,
    )


# ---------------------------------------------------------------------------
# File persistence.  Complex entries are encoded as [re, im] pairs; writers
# rely on round-trip-exact float reprs so load(save(s)) is bit-identical.


def _matrix_to_json(m):
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def scenario_to_dict(scenario):
    return {
        "n_tx": scenario.n_tx,
        "n_rx": scenario.n_rx,
        "snapshots": scenario.snapshots,
        "power_budget": scenario.power_budget,
        "r_target": _matrix_to_json(scenario.r_target),
        "r_clutter0": _matrix_to_json(scenario.r_clutter0),
        "r_clutter1": _matrix_to_json(scenario.r_clutter1),
        "r_noise": _matrix_to_json(scenario.r_noise),
    }


def scenario_from_dict(doc):
    return SensingScenario(
        n_tx=int(doc["n_tx"]),
        n_rx=int(doc["n_rx"]),
        snapshots=int(doc["snapshots"]),
        power_budget=float(doc["power_budget"]),
        r_target=_matrix_from_json(doc["r_target"]),
        r_clutter0=_matrix_from_json(doc["r_clutter0"]),
        r_clutter1=_matrix_from_json(doc["r_clutter1"]),
        r_noise=_matrix_from_json(doc["r_noise"]),
    )


def _write_json(path, doc):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def save_scenario(scenario, path):
    _write_json(path, scenario_to_dict(scenario))


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return scenario_from_dict(doc)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed scenario file {path}: {exc!r}") from exc


def save_waveform(x, path):
    _write_json(path, {"x": _matrix_to_json(x)})


def load_waveform(path):
    with open(path, encoding="utf-8") as fh:
        return _matrix_from_json(json.load(fh)["x"])
