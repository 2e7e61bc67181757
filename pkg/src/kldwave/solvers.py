"""Single-user waveform optimizers.

Two fixed-point maps share the same auxiliary-variable updates and
differ in the waveform step:

* ``fp_iterate`` solves the Sylvester-type stationarity equation
  ``A X R + mu X = B`` exactly through factor eigendecompositions, with
  the Lagrange multiplier ``mu`` found by bisection on the power
  residual (complementary slackness tried first).
* ``mm_map`` replaces the anisotropic quadratic curvature by an
  isotropic spectral bound and lands on the power sphere in closed
  form; its per-iteration cost is quadratic in the problem dimensions.

Both drivers stop when the relative objective improvement drops below
``epsilon`` and record a per-iteration trace.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DidNotConverge, InfeasibleMu, ShapeMismatch
from .linalg import hermitian_part, kron_apply, power_iteration_max_eig
from .objective import f_obj, gamma_star, psi_star
from .scenario import covariances, validate, waveform_power

__all__ = [
    "SolverOptions",
    "SolverTrace",
    "RelaxationState",
    "solve_x_sylvester",
    "lambda_bar",
    "fp_iterate",
    "mm_map",
    "fp_kld",
    "mm_kld",
]

# Direction norms below this are treated as a degenerate (zero) update.
DEGENERATE_DIRECTION_TOL = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by all iterative solvers.

    ``delta=None`` resolves to ``1e-6 * lambda_p`` with an absolute floor
    of ``1e-12``, keeping the spectral margin scale invariant.
    """

    epsilon: float = 1e-6
    max_iters: int = 5000
    delta: float = None
    mu_tol: float = 1e-10
    power_iter_k: int = 100
    power_iter_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")

    def resolve_delta(self, lambda_p):
        if self.delta is not None:
            return float(self.delta)
        return max(1e-6 * lambda_p, 1e-12)


@dataclass
class SolverTrace:
    """Per-iteration record of a solver run.

    ``objective_per_iter[0]`` is the starting objective; entry ``k`` is
    the objective after iteration ``k`` (nondecreasing within round-off
    slack).  ``elapsed_seconds_per_iter`` holds monotonic-clock
    durations of the iterations themselves.  ``mu_per_iter`` is filled
    by the Sylvester path, ``gamma_per_iter`` by the accelerated path.
    """

    objective_per_iter: list = field(default_factory=list)
    elapsed_seconds_per_iter: list = field(default_factory=list)
    iterations: int = 0
    status: str = "MaxIters"
    final_power: float = 0.0
    mu_per_iter: list = field(default_factory=list)
    gamma_per_iter: list = field(default_factory=list)
    seed: int = 0


@dataclass(frozen=True)
class RelaxationState:
    """Anchor point and spectral bound of one isotropic-relaxation step."""

    z: np.ndarray
    lambda_bar: float
    lambda_p: float


def _factor_eigh(m):
    w, u = np.linalg.eigh(hermitian_part(m))
    return np.maximum(w, 0.0), u


def _sylvester_power(b_t, denom, mu):
    return float(np.sum(np.abs(b_t) ** 2 / (denom + mu) ** 2))


def solve_x_sylvester(a, r_h1, b, p_t, mu_tol=1e-10, dense=False, r_factor=None):
    """Power-constrained maximizer of the concave quadratic surrogate.

    Solves ``A X R + mu X = B`` jointly with the KKT conditions of the
    budget ``trace(X X^H) <= p_t``: first tries ``mu = 0`` (pseudo-solve
    on the factor spectra, zeroing modes with eigenvalue products below
    1e-12), otherwise bisects ``mu`` on the strictly decreasing power
    curve until the budget is met to ``mu_tol`` relative accuracy.

    Parameters
    ----------
    a : ndarray, (t, t)
        Hermitian PSD left operator.
    r_h1 : ndarray, (n, n)
        Hermitian PD right operator.
    b : ndarray, (t, n)
        Right-hand side.
    p_t : float
        Power budget.
    mu_tol : float
        Relative tolerance on the power residual.
    dense : bool
        Solve the vectorized ``(n*t) x (n*t)`` system instead of using
        the factor eigendecompositions.  Retained as a brute-force
        oracle; results are identical up to round-off.
    r_factor : tuple, optional
        Precomputed ``(eigenvalues, eigenvectors)`` of ``r_h1`` so
        drivers can factor the constant side once.

    Returns
    -------
    (x, mu) : (ndarray, float)
    """
    a = np.asarray(a, dtype=complex)
    r = np.asarray(r_h1, dtype=complex)
    b = np.asarray(b, dtype=complex)
    t, n = a.shape[0], r.shape[0]
    if b.shape != (t, n):
        raise ShapeMismatch(f"b must be {t}x{n}, got {b.shape}")
    if not p_t > 0:
        raise ValueError("p_t must be positive")

    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros((t, n), dtype=complex), 0.0

    if dense:
        return _solve_x_dense(a, r, b, p_t, mu_tol)

    wa, ua = _factor_eigh(a)
    wr, ur = _factor_eigh(r) if r_factor is None else r_factor
    b_t = ua.conj().T @ b @ ur
    denom = np.outer(wa, wr)

    def assemble(x_t):
        return ua @ x_t @ ur.conj().T

    # Complementary-slackness branch: exact stationary point if feasible.
    mask = denom >= 1e-12
    x_t0 = np.where(mask, b_t / np.where(mask, denom, 1.0), 0.0)
    if float(np.sum(np.abs(x_t0) ** 2)) <= p_t * (1.0 + mu_tol):
        x0 = assemble(x_t0)
        residual = np.linalg.norm(a @ x0 @ r - b)
        if residual <= 1e-8 * b_norm:
            return x0, 0.0

    # The budget binds: bisect mu on the decreasing power curve.
    hi = b_norm / np.sqrt(p_t)
    for _ in range(200):
        if _sylvester_power(b_t, denom, hi) <= p_t:
            break
        hi *= 2.0
    else:
        raise InfeasibleMu("power residual could not be bracketed from above")
    lo = 0.0
    mu = hi
    for _ in range(500):
        mu = 0.5 * (lo + hi)
        power = _sylvester_power(b_t, denom, mu)
        if abs(power - p_t) <= mu_tol * p_t:
            break
        if power > p_t:
            lo = mu
        else:
            hi = mu
    else:
        raise InfeasibleMu("power bisection failed to meet tolerance")
    return assemble(b_t / (denom + mu)), mu


def _solve_x_dense(a, r, b, p_t, mu_tol):
    # Brute-force oracle: vectorized column-major system.
    t, n = a.shape[0], r.shape[0]
    abar = np.kron(r.T, a)
    bbar = b.flatten(order="F")
    eye = np.eye(n * t)

    def solve_at(mu):
        xbar = np.linalg.solve(abar + mu * eye, bbar)
        return xbar.reshape((t, n), order="F")

    x0bar, *_ = np.linalg.lstsq(abar, bbar, rcond=None)
    x0 = x0bar.reshape((t, n), order="F")
    if waveform_power(x0) <= p_t * (1.0 + mu_tol):
        if np.linalg.norm(a @ x0 @ r - b) <= 1e-8 * np.linalg.norm(b):
            return x0, 0.0

    hi = np.linalg.norm(b) / np.sqrt(p_t)
    for _ in range(200):
        if waveform_power(solve_at(hi)) <= p_t:
            break
        hi *= 2.0
    else:
        raise InfeasibleMu("power residual could not be bracketed from above")
    lo = 0.0
    mu = hi
    for _ in range(500):
        mu = 0.5 * (lo + hi)
        x = solve_at(mu)
        power = waveform_power(x)
        if abs(power - p_t) <= mu_tol * p_t:
            return x, mu
        if power > p_t:
            lo = mu
        else:
            hi = mu
    raise InfeasibleMu("power bisection failed to meet tolerance")


def _max_eig_or_trace(m, opts):
    try:
        return power_iteration_max_eig(
            m, max_iters=opts.power_iter_k, tol=opts.power_iter_tol, seed=opts.seed
        )
    except DidNotConverge:
        # The trace upper-bounds the spectrum of a PSD matrix, so the
        # relaxation bound stays valid, only looser.
        return float(np.real(np.trace(m)))


def lambda_bar(a, r_h1, delta, opts):
    """Spectral bound of the Kronecker operator ``R^T kron A``.

    The spectrum of a Kronecker product of Hermitian PSD factors is the
    product set of the factor spectra, so its largest eigenvalue is the
    product of the factor maxima, each estimated by seeded power
    iteration (with a trace fallback on non-convergence).

    Returns ``(lambda_p, lambda_p + delta)``; ``delta=None`` uses the
    options' relative default.
    """
    lam_a = _max_eig_or_trace(a, opts)
    lam_r = _max_eig_or_trace(r_h1, opts)
    lambda_p = lam_a * lam_r
    margin = opts.resolve_delta(lambda_p) if delta is None else float(delta)
    return lambda_p, lambda_p + margin


def _aux_operators(scenario, l, x):
    k0, k1 = covariances(scenario, x)
    gamma = gamma_star(x, l, k0)
    psi = psi_star(x, l, k1)
    a_mat = hermitian_part(psi @ gamma @ psi.conj().T)
    b_mat = psi @ gamma @ l.conj().T
    return a_mat, b_mat


def _fp_step(scenario, l, x, opts, r_factor=None):
    a_mat, b_mat = _aux_operators(scenario, l, x)
    return solve_x_sylvester(
        a_mat,
        scenario.r_h1,
        b_mat,
        scenario.power_budget,
        mu_tol=opts.mu_tol,
        r_factor=r_factor,
    )


def fp_iterate(scenario, l, x, opts):
    """One full Sylvester-path iteration; never decreases the objective."""
    return _fp_step(scenario, l, x, opts)[0]


def mm_map(scenario, l, x, opts, _lam_r=None):
    """One closed-form relaxation iteration; output sits exactly on the
    power sphere.

    A direction of norm below 1e-14 is degenerate and returns the input
    unchanged.
    """
    x = np.asarray(x, dtype=complex)
    a_mat, b_mat = _aux_operators(scenario, l, x)
    lam_a = _max_eig_or_trace(a_mat, opts)
    lam_r = _max_eig_or_trace(scenario.r_h1, opts) if _lam_r is None else _lam_r
    lambda_p = lam_a * lam_r
    lam = lambda_p + opts.resolve_delta(lambda_p)
    state = RelaxationState(z=x, lambda_bar=lam, lambda_p=lambda_p)
    direction = b_mat + state.lambda_bar * x - kron_apply(a_mat, scenario.r_h1, x)
    norm = np.linalg.norm(direction)
    if norm < DEGENERATE_DIRECTION_TOL:
        return x
    return np.sqrt(scenario.power_budget) * direction / norm


def _run_solver(scenario, x_init, opts, step):
    """Common outer loop: iterate ``step`` until the relative objective
    improvement drops below ``epsilon``.  ``step(x)`` returns
    ``(x_next, extras)`` where extras lands in the trace."""
    x = np.asarray(x_init, dtype=complex)
    trace = SolverTrace(seed=opts.seed)
    f_cur = f_obj(scenario, x)
    trace.objective_per_iter.append(f_cur)
    for _ in range(opts.max_iters):
        tic = time.perf_counter()
        x_next, extras = step(x)
        f_next = f_obj(scenario, x_next)
        trace.elapsed_seconds_per_iter.append(time.perf_counter() - tic)
        trace.objective_per_iter.append(f_next)
        if "mu" in extras:
            trace.mu_per_iter.append(extras["mu"])
        if "gamma" in extras:
            trace.gamma_per_iter.append(extras["gamma"])
        trace.iterations += 1
        x = x_next
        # Improvement is divided by max(1, |f|) rather than f itself to
        # stay finite near f = 0; identical whenever f >= 1.
        if (f_next - f_cur) / max(1.0, abs(f_cur)) < opts.epsilon:
            trace.status = "Converged"
            f_cur = f_next
            break
        f_cur = f_next
    trace.final_power = waveform_power(x)
    return x, trace


def fp_kld(scenario, x_init, opts=None):
    """Waveform design via the exact Sylvester-path fixed point."""
    opts = opts or SolverOptions()
    l = validate(scenario)
    r_factor = _factor_eigh(scenario.r_h1)

    def step(x):
        x_next, mu = _fp_step(scenario, l, x, opts, r_factor=r_factor)
        return x_next, {"mu": mu}

    return _run_solver(scenario, x_init, opts, step)


def mm_kld(scenario, x_init, opts=None):
    """Waveform design via the closed-form isotropic-relaxation map."""
    opts = opts or SolverOptions()
    l = validate(scenario)
    lam_r = _max_eig_or_trace(scenario.r_h1, opts)

    def step(x):
        return mm_map(scenario, l, x, opts, _lam_r=lam_r), {}

    return _run_solver(scenario, x_init, opts, step)
