"""Joint sensing-communication waveform design.

The trade-off objective is ``(1 - rho) * divergence + rho * mutual
information``.  Each iteration refreshes the sensing auxiliaries and
the communication auxiliaries at the current waveform and maximizes
the resulting composite concave quadratic over the power ball, either
exactly (structured conjugate-gradient solve plus multiplier
bisection) or through the isotropic spectral relaxation in closed
form.  The sensing surrogate is scaled by the receive-antenna count so
the iteration ascends the reported weighted objective itself.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleMu, ShapeMismatch
from .linalg import check_hermitian, hermitian_part
from .objective import comm_aux_star, gamma_star, kld_from_cov, mi_eval, psi_star
from .scenario import covariances, validate, waveform_power
from .solvers import (
    DEGENERATE_DIRECTION_TOL,
    SolverOptions,
    SolverTrace,
    _max_eig_or_trace,
)

__all__ = [
    "IsacScenario",
    "IsacParetoPoint",
    "isac_objective",
    "isac_iterate",
    "isac_solve",
    "pareto_sweep",
]


@dataclass(frozen=True)
class IsacScenario:
    """Sensing scenario plus a communication link and trade-off weight.

    ``h_c`` is the communication channel with ``snapshots`` columns,
    ``r_nc`` the positive definite receiver noise covariance, and
    ``rho`` in [0, 1] the weight on mutual information.
    """

    sensing: object
    h_c: np.ndarray
    r_nc: np.ndarray
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        h_c = np.asarray(self.h_c, dtype=complex)
        if h_c.ndim != 2 or h_c.shape[1] != self.sensing.snapshots:
            raise ShapeMismatch(
                f"h_c must have {self.sensing.snapshots} columns, got {h_c.shape}"
            )
        object.__setattr__(self, "h_c", h_c)
        r_nc = check_hermitian(self.r_nc)
        if r_nc.shape[0] != h_c.shape[0]:
            raise ShapeMismatch("r_nc dimension must match h_c rows")
        object.__setattr__(self, "r_nc", r_nc)


def isac_objective(sc, x):
    """Evaluate ``(kld, mi, (1 - rho) * kld + rho * mi)`` at waveform ``x``."""
    sensing = sc.sensing
    k0, k1 = covariances(sensing, x)
    kld = kld_from_cov(k0, k1, sensing.n_rx, sensing.snapshots)
    mi = mi_eval(sc.h_c, sc.r_nc, x)
    return kld, mi, (1.0 - sc.rho) * kld + sc.rho * mi


def _composite_operators(sc, l, x):
    """Quadratic/linear operators of the composite surrogate at ``x``.

    Returns ``(a_eff, c_eff, rhs)`` such that the surrogate's
    stationarity condition reads
    ``a_eff X R_h1 + c_eff X + mu X = rhs``.
    The sensing side carries the factor ``(1 - rho) * n_rx`` so the
    surrogate minorizes the weighted objective exactly (up to an
    additive constant).
    """
    sensing = sc.sensing
    rho = sc.rho
    w_sense = (1.0 - rho) * sensing.n_rx
    t, nt = sensing.snapshots, sensing.n_tx

    if w_sense > 0.0:
        k0, k1 = covariances(sensing, x)
        gamma = gamma_star(x, l, k0)
        psi = psi_star(x, l, k1)
        a_eff = w_sense * hermitian_part(psi @ gamma @ psi.conj().T)
        rhs = w_sense * (psi @ gamma @ l.conj().T)
    else:
        a_eff = np.zeros((t, t), dtype=complex)
        rhs = np.zeros((t, nt), dtype=complex)

    if rho > 0.0:
        caux = comm_aux_star(sc.h_c, sc.r_nc, x)
        i_plus = hermitian_part(np.eye(caux.gamma_c.shape[0]) + caux.gamma_c)
        hp = sc.h_c.conj().T @ caux.psi_c
        c_eff = rho * hermitian_part(hp @ i_plus @ hp.conj().T)
        rhs = rhs + rho * (hp @ i_plus)
    else:
        c_eff = np.zeros((t, t), dtype=complex)

    return a_eff, c_eff, rhs


def _cg_solve(op, rhs, x0, rtol=1e-14, max_iters=None):
    """Conjugate gradients for a Hermitian PD operator in matrix form.

    The tolerance is driven near machine precision because the
    multiplier bisection reads the solution's power, whose accuracy is
    bounded by the solve residual.  Iterations stop early once the
    residual stagnates.
    """
    if max_iters is None:
        max_iters = 6 * rhs.size + 200
    x = x0.copy()
    r = rhs - op(x)
    p = r.copy()
    rs = float(np.real(np.vdot(r, r)))
    target = rtol * np.linalg.norm(rhs)
    best = rs
    stalled = 0
    for _ in range(max_iters):
        if np.sqrt(rs) <= target:
            break
        ap = op(p)
        denom = float(np.real(np.vdot(p, ap)))
        if denom <= 0.0:
            break
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(np.real(np.vdot(r, r)))
        p = r + (rs_new / rs) * p
        rs = rs_new
        if rs < 0.5 * best:
            best, stalled = rs, 0
        else:
            stalled += 1
            if stalled >= 50:
                break
    return x, np.sqrt(rs)


def _solve_composite_x(sc, a_eff, c_eff, rhs, opts):
    """Exact power-constrained maximizer of the composite surrogate.

    The vectorized system matrix ``(R^T kron a_eff) + (I kron c_eff) +
    mu I`` is Hermitian PSD, so each candidate multiplier is solved with
    conjugate-direction iterations using only the factored products;
    ``mu`` follows the same complementary-slackness-then-bisection
    search as the single-objective Sylvester step.
    """
    sensing = sc.sensing
    r_h1 = sensing.r_h1
    p_t = sensing.power_budget
    mu_tol = opts.mu_tol
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0.0

    def op_mu(mu):
        return lambda x: a_eff @ x @ r_h1 + c_eff @ x + mu * x

    zero = np.zeros_like(rhs)
    x0, res0 = _cg_solve(op_mu(0.0), rhs, zero)
    if res0 <= 1e-8 * rhs_norm and waveform_power(x0) <= p_t * (1.0 + mu_tol):
        return x0, 0.0

    hi = rhs_norm / np.sqrt(p_t)
    warm = zero
    for _ in range(200):
        x_hi, _ = _cg_solve(op_mu(hi), rhs, warm)
        if waveform_power(x_hi) <= p_t:
            warm = x_hi
            break
        hi *= 2.0
    else:
        raise InfeasibleMu("power residual could not be bracketed from above")

    lo, mu = 0.0, hi
    x = warm
    for _ in range(500):
        mu = 0.5 * (lo + hi)
        x, _ = _cg_solve(op_mu(mu), rhs, x)
        power = waveform_power(x)
        if abs(power - p_t) <= mu_tol * p_t:
            return x, mu
        if power > p_t:
            lo = mu
        else:
            hi = mu
    raise InfeasibleMu("power bisection failed to meet tolerance")


def isac_iterate(sc, l, x, opts, variant="mm"):
    """One composite iteration; monotone in the weighted objective.

    ``variant="fp"`` solves the stationarity system exactly;
    ``variant="mm"`` uses the isotropic spectral bound and the
    closed-form sphere update.
    """
    x = np.asarray(x, dtype=complex)
    a_eff, c_eff, rhs = _composite_operators(sc, l, x)
    if variant == "fp":
        return _solve_composite_x(sc, a_eff, c_eff, rhs, opts)[0]
    if variant != "mm":
        raise ValueError(f"unknown variant {variant!r}")
    r_h1 = sc.sensing.r_h1
    lam_a = _max_eig_or_trace(a_eff, opts)
    lam_r = _max_eig_or_trace(r_h1, opts)
    lam_c = _max_eig_or_trace(c_eff, opts)
    lambda_p = lam_a * lam_r + lam_c
    lam = lambda_p + opts.resolve_delta(lambda_p)
    direction = rhs + lam * x - (a_eff @ x @ r_h1 + c_eff @ x)
    norm = np.linalg.norm(direction)
    if norm < DEGENERATE_DIRECTION_TOL:
        return x
    return np.sqrt(sc.sensing.power_budget) * direction / norm


def isac_solve(sc, x_init, opts=None, variant="mm", accelerate=False):
    """Run the composite solver to convergence of the weighted objective."""
    from .accel import FixedPointProblem, stem_step

    opts = opts or SolverOptions()
    sensing = sc.sensing
    l = validate(sensing)

    def weighted(x):
        return isac_objective(sc, x)[2]

    if accelerate:
        if variant != "mm":
            raise ValueError("acceleration applies to the mm variant only")
        sqrt_pt = np.sqrt(sensing.power_budget)
        problem = FixedPointProblem(
            map=lambda x: isac_iterate(sc, l, x, opts, "mm"),
            objective=weighted,
            project=lambda x: sqrt_pt * x / np.linalg.norm(x),
        )

        def step(x):
            x_next, state = stem_step(problem, x)
            return x_next, {"gamma": state.gamma}

    else:

        def step(x):
            return isac_iterate(sc, l, x, opts, variant), {}

    x = np.asarray(x_init, dtype=complex)
    trace = SolverTrace(seed=opts.seed)
    f_cur = weighted(x)
    trace.objective_per_iter.append(f_cur)
    for _ in range(opts.max_iters):
        tic = time.perf_counter()
        x_next, extras = step(x)
        f_next = weighted(x_next)
        trace.elapsed_seconds_per_iter.append(time.perf_counter() - tic)
        trace.objective_per_iter.append(f_next)
        if "gamma" in extras:
            trace.gamma_per_iter.append(extras["gamma"])
        trace.iterations += 1
        x = x_next
        if (f_next - f_cur) / max(1.0, abs(f_cur)) < opts.epsilon:
            trace.status = "Converged"
            f_cur = f_next
            break
        f_cur = f_next
    trace.final_power = waveform_power(x)
    return x, trace


@dataclass(frozen=True)
class IsacParetoPoint:
    rho: float
    kld: float
    mi: float
    waveform: np.ndarray
    iterations: int


def pareto_sweep(sc_base, rho_grid, opts=None, x_init=None, variant="mm", accelerate=True):
    """Trace the sensing/communication trade-off over a weight grid.

    Each grid point is solved warm-started from the previous point's
    solution so adjacent points stay on the same solution branch; the
    first point starts from ``x_init``.  Returns one record per weight,
    in grid order.
    """
    from .scenario import init_waveform

    opts = opts or SolverOptions()
    rho_grid = [float(r) for r in rho_grid]
    if any(not 0.0 <= r <= 1.0 for r in rho_grid):
        raise ValueError("rho grid must lie within [0, 1]")
    if sorted(rho_grid) != rho_grid:
        raise ValueError("rho grid must be sorted ascending")
    x = (
        init_waveform(sc_base.sensing, opts.seed)
        if x_init is None
        else np.asarray(x_init, dtype=complex)
    )
    points = []
    for rho in rho_grid:
        sc = replace(sc_base, rho=rho)
        x, trace = isac_solve(sc, x, opts, variant=variant, accelerate=accelerate)
        kld, mi, _ = isac_objective(sc, x)
        points.append(
            IsacParetoPoint(rho=rho, kld=kld, mi=mi, waveform=x, iterations=trace.iterations)
        )
    return points
