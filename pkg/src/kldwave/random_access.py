"""Multi-device activity-detection waveform design.

Each device is tested active-vs-inactive while the other devices
interfere according to independent Bernoulli activity priors.  The
design objective is the prior-weighted sum, over devices and
interference patterns, of the Gaussian divergences between the
device-active and device-inactive observation models.  A cyclic
block-coordinate solver updates one device's waveform at a time via
the closed-form isotropic-relaxation step; the joint surrogate is a
global minorizer in all waveforms, so every sweep ascends the
objective.
"""

import json
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidGenerator, ShapeMismatch, TooManyDevices
from .linalg import check_hermitian, cholesky_pd, hermitian_part
from .scenario import (
    PD_REL_TOL,
    _exp_corr,
    _freeze,
    _init_matrix,
    _matrix_from_json,
    _matrix_to_json,
    _write_json,
    waveform_power,
)
from .solvers import (
    DEGENERATE_DIRECTION_TOL,
    SolverOptions,
    SolverTrace,
    _max_eig_or_trace,
)

__all__ = [
    "RandomAccessScenario",
    "RaGeneratorConfig",
    "pattern_weights",
    "conditional_covs",
    "sum_kld",
    "ra_block_update",
    "ra_solve",
    "generate_ra_scenario",
    "init_waveform_set",
    "save_ra_scenario",
    "load_ra_scenario",
]

MAX_DEVICES = 12


@dataclass(frozen=True)
class RandomAccessScenario:
    """Statistics of the multi-device activity-detection problem.

    ``r_device[i]`` is the (positive definite) channel covariance of
    device ``i``; ``priors[i]`` its activity probability, strictly
    inside (0, 1).  ``power_budget`` applies per device.
    """

    n_devices: int
    n_tx: int
    n_rx: int
    snapshots: int
    power_budget: float
    r_device: tuple
    priors: tuple
    r_noise: np.ndarray

    def __post_init__(self):
        if self.n_devices < 1:
            raise ValueError("n_devices must be >= 1")
        if self.n_devices > MAX_DEVICES:
            raise TooManyDevices(
                f"pattern enumeration is capped at {MAX_DEVICES} devices"
            )
        if not self.power_budget > 0:
            raise ValueError("power_budget must be positive")
        if len(self.r_device) != self.n_devices or len(self.priors) != self.n_devices:
            raise ShapeMismatch("r_device and priors must have n_devices entries")
        priors = tuple(float(p) for p in self.priors)
        if any(not 0.0 < p < 1.0 for p in priors):
            raise ValueError("priors must lie strictly inside (0, 1)")
        object.__setattr__(self, "priors", priors)
        mats = []
        for k, mat in enumerate(self.r_device):
            mat = check_hermitian(mat)
            if mat.shape != (self.n_tx, self.n_tx):
                raise ShapeMismatch(f"r_device[{k}] must be {self.n_tx}x{self.n_tx}")
            mats.append(_freeze(mat))
        object.__setattr__(self, "r_device", tuple(mats))
        r_noise = check_hermitian(self.r_noise)
        if r_noise.shape != (self.snapshots, self.snapshots):
            raise ShapeMismatch("r_noise must be snapshots x snapshots")
        object.__setattr__(self, "r_noise", _freeze(r_noise))

    def device_factors(self):
        """Lower Cholesky factors of the device covariances (all PD)."""
        return [cholesky_pd(r, rel_tol=PD_REL_TOL) for r in self.r_device]


def pattern_weights(priors, i):
    """All activity patterns of the devices other than ``i`` with their
    product-form prior weights.

    Patterns are tuples over the interfering devices in ascending index
    order; enumeration follows binary counting of that tuple (last
    listed device flips fastest).  Weights sum to one.
    """
    priors = [float(p) for p in priors]
    k = len(priors)
    if k > MAX_DEVICES:
        raise TooManyDevices(f"pattern enumeration is capped at {MAX_DEVICES} devices")
    if not 0 <= i < k:
        raise IndexError(f"device index {i} out of range for {k} devices")
    others = [j for j in range(k) if j != i]
    n_bits = len(others)
    out = []
    for n in range(2**n_bits):
        bits = tuple((n >> (n_bits - 1 - m)) & 1 for m in range(n_bits))
        weight = 1.0
        for bit, j in zip(bits, others):
            weight *= priors[j] if bit else (1.0 - priors[j])
        out.append((bits, weight))
    return out


def conditional_covs(sc, xs, i, pattern):
    """Observation covariances for device ``i`` under interference
    ``pattern`` (bits over the other devices, ascending index order).

    Returns ``(k_i0, k_i1)``: noise plus active interferers, and the
    same plus device ``i``'s own contribution.
    """
    others = [j for j in range(sc.n_devices) if j != i]
    if len(pattern) != len(others):
        raise ShapeMismatch(
            f"pattern must have {len(others)} bits, got {len(pattern)}"
        )
    k0 = np.array(sc.r_noise, dtype=complex)
    for bit, j in zip(pattern, others):
        if bit:
            xj = np.asarray(xs[j], dtype=complex)
            k0 += xj @ sc.r_device[j] @ xj.conj().T
    xi = np.asarray(xs[i], dtype=complex)
    k1 = k0 + xi @ sc.r_device[i] @ xi.conj().T
    return hermitian_part(k0), hermitian_part(k1)


class _CovCache:
    """Cholesky factors of ``r_noise + sum over active devices of
    X_j R_j X_j^H``, keyed by the active-set bitmask.

    Patterns across focal devices reuse each other's covariances, so
    factoring per distinct active set (at most ``2^K``) instead of per
    (device, pattern) term roughly halves the factorization work.
    """

    def __init__(self, sc, xs):
        self._contribs = [
            hermitian_part(np.asarray(x, dtype=complex) @ r @ np.asarray(x, dtype=complex).conj().T)
            for x, r in zip(xs, sc.r_device)
        ]
        self._cov = {0: hermitian_part(np.array(sc.r_noise, dtype=complex))}
        self._chol = {}

    def cov(self, mask):
        if mask not in self._cov:
            j = (mask & -mask).bit_length() - 1
            self._cov[mask] = self.cov(mask ^ (1 << j)) + self._contribs[j]
        return self._cov[mask]

    def chol(self, mask):
        if mask not in self._chol:
            self._chol[mask] = cholesky_pd(self.cov(mask))
        return self._chol[mask]

    def logdet(self, mask):
        return float(2.0 * np.sum(np.log(np.real(np.diag(self.chol(mask))))))


def _pattern_mask(pattern, i, n_devices):
    others = (j for j in range(n_devices) if j != i)
    return sum(1 << j for bit, j in zip(pattern, others) if bit)


def sum_kld(sc, xs):
    """Weighted-sum divergence objective over devices and patterns."""
    cache = _CovCache(sc, xs)
    total = 0.0
    t = sc.snapshots
    for i in range(sc.n_devices):
        for pattern, weight in pattern_weights(sc.priors, i):
            mask0 = _pattern_mask(pattern, i, sc.n_devices)
            mask1 = mask0 | (1 << i)
            low1 = cache.chol(mask1)
            low0 = cache.chol(mask0)
            # trace(K1^-1 K0) = ||L1^-1 L0||_F^2
            z = scipy.linalg.solve_triangular(low1, low0, lower=True, check_finite=False)
            term = (
                cache.logdet(mask1)
                - cache.logdet(mask0)
                + float(np.sum(np.abs(z) ** 2))
                - t
            )
            total += weight * term
    return sc.n_rx * total


def _per_term_auxiliaries(sc, xs, factors):
    """Optimal auxiliaries for every (device, pattern) divergence term."""
    cache = _CovCache(sc, xs)
    terms = []
    for i in range(sc.n_devices):
        xl = np.asarray(xs[i], dtype=complex) @ factors[i]
        for pattern, weight in pattern_weights(sc.priors, i):
            mask0 = _pattern_mask(pattern, i, sc.n_devices)
            low0 = cache.chol(mask0)
            low1 = cache.chol(mask0 | (1 << i))
            z = scipy.linalg.solve_triangular(low0, xl, lower=True, check_finite=False)
            gamma = hermitian_part(z.conj().T @ z)
            y = scipy.linalg.solve_triangular(low1, xl, lower=True, check_finite=False)
            psi = scipy.linalg.solve_triangular(
                low1.conj().T, y, lower=False, check_finite=False
            )
            terms.append((i, pattern, weight, gamma, psi))
    return terms


def ra_block_update(sc, xs, j, opts=None, factors=None, terms=None, _lam_r=None):
    """Closed-form update of device ``j``'s waveform.

    All per-term auxiliaries are refreshed at the current iterate; the
    joint surrogate is concave quadratic in the block with Kronecker
    structure ``(R_j^T kron M_j)``, where ``M_j`` collects the terms in
    which the block enters quadratically (its own divergence terms,
    plus every other device's terms whose pattern marks device ``j``
    active).  The block maximizer on the power sphere follows from the
    isotropic spectral bound.
    """
    opts = opts or SolverOptions()
    if factors is None:
        factors = sc.device_factors()
    if terms is None:
        terms = _per_term_auxiliaries(sc, xs, factors)
    t, nt = sc.snapshots, sc.n_tx
    others = {i: [d for d in range(sc.n_devices) if d != i] for i in range(sc.n_devices)}

    m_j = np.zeros((t, t), dtype=complex)
    b_j = np.zeros((t, nt), dtype=complex)
    for i, pattern, weight, gamma, psi in terms:
        pgp = psi @ gamma @ psi.conj().T
        if i == j:
            m_j += weight * pgp
            b_j += weight * (psi @ gamma @ factors[j].conj().T)
        else:
            pos = others[i].index(j)
            if pattern[pos]:
                m_j += weight * pgp
    m_j = sc.n_rx * hermitian_part(m_j)
    b_j = sc.n_rx * b_j

    lam_m = _max_eig_or_trace(m_j, opts)
    lam_r = _max_eig_or_trace(sc.r_device[j], opts) if _lam_r is None else _lam_r
    lambda_p = lam_m * lam_r
    lam = lambda_p + opts.resolve_delta(lambda_p)
    xj = np.asarray(xs[j], dtype=complex)
    direction = b_j + lam * xj - m_j @ xj @ sc.r_device[j]
    norm = np.linalg.norm(direction)
    if norm < DEGENERATE_DIRECTION_TOL:
        return xj
    return np.sqrt(sc.power_budget) * direction / norm


def ra_solve(sc, xs_init, opts=None):
    """Cyclic block-coordinate ascent over all devices.

    One trace entry per full sweep; the run stops when the relative
    objective improvement of a sweep drops below ``epsilon``.
    """
    opts = opts or SolverOptions()
    factors = sc.device_factors()
    lam_r_dev = [_max_eig_or_trace(r, opts) for r in sc.r_device]
    xs = [np.asarray(x, dtype=complex) for x in xs_init]
    trace = SolverTrace(seed=opts.seed)
    f_cur = sum_kld(sc, xs)
    trace.objective_per_iter.append(f_cur)
    for _ in range(opts.max_iters):
        tic = time.perf_counter()
        for j in range(sc.n_devices):
            xs[j] = ra_block_update(
                sc, xs, j, opts, factors=factors, _lam_r=lam_r_dev[j]
            )
        f_next = sum_kld(sc, xs)
        trace.elapsed_seconds_per_iter.append(time.perf_counter() - tic)
        trace.objective_per_iter.append(f_next)
        trace.iterations += 1
        if (f_next - f_cur) / max(1.0, abs(f_cur)) < opts.epsilon:
            trace.status = "Converged"
            f_cur = f_next
            break
        f_cur = f_next
    trace.final_power = max(waveform_power(x) for x in xs)
    return xs, trace


@dataclass(frozen=True)
class RaGeneratorConfig:
    """Synthetic multi-device generator.

    Device covariances are exponential-correlation matrices with
    per-device correlation drawn uniformly from ``[0, rho]``, each with
    trace ``n_tx``.  Noise is white with the same power convention as
    the single-user generator.  A scalar ``priors`` is broadcast to all
    devices.
    """

    n_devices: int = 4
    n_tx: int = 4
    n_rx: int = 4
    snapshots: int = 8
    snr_db: float = 8.0
    rho: float = 0.7
    priors: float = 0.5
    power_budget: float = None

    def resolved_power(self):
        return float(self.n_tx if self.power_budget is None else self.power_budget)


def generate_ra_scenario(gen, seed):
    """Draw a valid multi-device scenario, deterministically in ``seed``."""
    if not (0.0 <= gen.rho < 1.0):
        raise InvalidGenerator("rho must lie in [0, 1)")
    p_t = gen.resolved_power()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7ACC]))
    rhos = rng.uniform(0.0, gen.rho, size=gen.n_devices)
    r_device = [_exp_corr(gen.n_tx, r) for r in rhos]
    priors = (
        tuple(float(p) for p in gen.priors)
        if np.ndim(gen.priors)
        else (float(gen.priors),) * gen.n_devices
    )
    sigma2 = p_t / (gen.n_tx * 10.0 ** (gen.snr_db / 10.0))
    return RandomAccessScenario(
        n_devices=gen.n_devices,
        n_tx=gen.n_tx,
        n_rx=gen.n_rx,
        snapshots=gen.snapshots,
        power_budget=p_t,
        r_device=tuple(r_device),
        priors=priors,
        r_noise=sigma2 * np.eye(gen.snapshots, dtype=complex),
    )


def init_waveform_set(sc, seed, kind="random-gaussian"):
    """Per-device starting waveforms, each at exactly the power budget."""
    return [
        _init_matrix(
            sc.snapshots, sc.n_tx, sc.power_budget, [int(seed), 0x1417, dev], kind
        )
        for dev in range(sc.n_devices)
    ]


def save_ra_scenario(sc, path):
    doc = {
        "n_devices": sc.n_devices,
        "n_tx": sc.n_tx,
        "n_rx": sc.n_rx,
        "snapshots": sc.snapshots,
        "power_budget": sc.power_budget,
        "priors": list(sc.priors),
        "r_device": [_matrix_to_json(r) for r in sc.r_device],
        "r_noise": _matrix_to_json(sc.r_noise),
    }
    _write_json(path, doc)


def load_ra_scenario(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return _ra_from_dict(doc)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed scenario file {path}: {exc!r}") from exc


def _ra_from_dict(doc):
    return RandomAccessScenario(
        n_devices=int(doc["n_devices"]),
        n_tx=int(doc["n_tx"]),
        n_rx=int(doc["n_rx"]),
        snapshots=int(doc["snapshots"]),
        power_budget=float(doc["power_budget"]),
        r_device=tuple(_matrix_from_json(m) for m in doc["r_device"]),
        priors=tuple(float(p) for p in doc["priors"]),
        r_noise=_matrix_from_json(doc["r_noise"]),
    )
