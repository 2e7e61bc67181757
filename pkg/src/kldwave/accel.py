"""Steffensen-type fixed-point acceleration with monotone backtracking.

``stem_step`` is map-agnostic: it probes a fixed-point map twice,
forms a secant step along the first residual, and falls back to the
plain map image whenever the accelerated candidate would decrease the
objective.  ``a_mm_kld`` applies it to the closed-form waveform map.
"""

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .objective import f_obj
from .scenario import validate, waveform_power
from .solvers import SolverOptions, SolverTrace, _max_eig_or_trace, mm_map

__all__ = ["FixedPointProblem", "StemState", "stem_step", "a_mm_kld"]

# |<delta, w>| below this multiple of <delta, delta> counts as flat
# curvature; the step then falls back to the plain map image.
CURVATURE_TOL = 1e-14


@dataclass(frozen=True)
class FixedPointProblem:
    """A fixed-point map together with the merit function it ascends and
    the projection onto its feasible set (idempotent)."""

    map: Callable
    objective: Callable
    project: Callable


@dataclass
class StemState:
    """Internals of one acceleration step, kept for tracing."""

    theta1: np.ndarray
    theta2: np.ndarray
    delta: np.ndarray
    w_res: np.ndarray
    gamma: float
    backtracks: int


def stem_step(problem, x, max_backtracks=50):
    """One accelerated step of the fixed-point iteration.

    Computes the two successive images ``theta1 = map(x)`` and
    ``theta2 = map(theta1)``, the residuals ``delta = theta1 - x`` and
    ``w = theta2 - 2 theta1 + x``, and the secant step size
    ``gamma = <delta, delta> / <delta, w>`` (real parts of the
    vectorized complex inner products).  The candidate
    ``project(x - gamma * delta)`` is accepted if it does not decrease
    the objective; otherwise ``gamma <- (gamma - 1) / 2`` up to
    ``max_backtracks`` times, after which the plain image ``theta1`` is
    returned (``gamma`` recorded as -1).  As the halving iterates,
    ``gamma -> -1`` and the candidate coincides with ``theta1``, so the
    fallback preserves the map's own monotonicity.

    With ``max_backtracks=0`` acceleration is disabled entirely and the
    second image ``theta2`` is accepted: two plain map applications.

    Returns ``(x_next, StemState)``.
    """
    x = np.asarray(x, dtype=complex)
    obj_x = problem.objective(x)
    theta1 = problem.map(x)
    theta2 = problem.map(theta1)
    delta = theta1 - x
    w_res = theta2 - 2.0 * theta1 + x

    dd = float(np.real(np.vdot(delta, delta)))
    if dd == 0.0:
        # Already a fixed point.
        return x, StemState(theta1, theta2, delta, w_res, 0.0, 0)
    if max_backtracks == 0:
        return theta2, StemState(theta1, theta2, delta, w_res, -1.0, 0)

    dw = float(np.real(np.vdot(delta, w_res)))
    if abs(dw) < CURVATURE_TOL * dd:
        return theta1, StemState(theta1, theta2, delta, w_res, -1.0, 0)

    gamma = dd / dw
    backtracks = 0
    while True:
        candidate = problem.project(x - gamma * delta)
        if problem.objective(candidate) >= obj_x:
            return candidate, StemState(theta1, theta2, delta, w_res, gamma, backtracks)
        if backtracks >= max_backtracks:
            return theta1, StemState(theta1, theta2, delta, w_res, -1.0, backtracks)
        gamma = (gamma - 1.0) / 2.0
        backtracks += 1


def a_mm_kld(scenario, x_init, opts=None, max_backtracks=50):
    """Accelerated closed-form waveform design.

    Wraps the relaxation map in ``stem_step`` with the objective as
    merit function and power-sphere normalization as projection.  Each
    trace entry is one outer acceleration step (two map evaluations);
    stopping rule and trace contract match the unaccelerated driver.
    """
    opts = opts or SolverOptions()
    l = validate(scenario)
    lam_r = _max_eig_or_trace(scenario.r_h1, opts)
    sqrt_pt = np.sqrt(scenario.power_budget)

    problem = FixedPointProblem(
        map=lambda x: mm_map(scenario, l, x, opts, _lam_r=lam_r),
        objective=lambda x: f_obj(scenario, x),
        project=lambda x: sqrt_pt * x / np.linalg.norm(x),
    )

    x = np.asarray(x_init, dtype=complex)
    trace = SolverTrace(seed=opts.seed)
    f_cur = f_obj(scenario, x)
    trace.objective_per_iter.append(f_cur)
    for _ in range(opts.max_iters):
        tic = time.perf_counter()
        x_next, state = stem_step(problem, x, max_backtracks)
        f_next = f_obj(scenario, x_next)
        trace.elapsed_seconds_per_iter.append(time.perf_counter() - tic)
        trace.objective_per_iter.append(f_next)
        trace.gamma_per_iter.append(state.gamma)
        trace.iterations += 1
        x = x_next
        if (f_next - f_cur) / max(1.0, abs(f_cur)) < opts.epsilon:
            trace.status = "Converged"
            f_cur = f_next
            break
        f_cur = f_next
    trace.final_power = waveform_power(x)
    return x, trace
