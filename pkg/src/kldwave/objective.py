"""Objective evaluators and closed-form auxiliary-variable optimizers.

The divergence objective is attacked through a chain of surrogates:
a log-det minorizer introducing a Hermitian PSD auxiliary ``gamma``,
a quadratic-transform minorizer introducing a rectangular auxiliary
``psi``, and an isotropic spectral relaxation introducing an anchor
point ``z`` and a curvature bound ``lambda_bar``.  Each surrogate
globally lower-bounds the previous level and is tight at the
closed-form optimizer of its auxiliary, which is what guarantees
monotone ascent of the solvers built on top.

Evaluators here recompute everything from scratch; solvers keep their
own per-iteration caches.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import hermitian_part, kron_apply, logdet_pd, solve_pd
from .scenario import covariances, validate

__all__ = [
    "AuxiliaryVariables",
    "CommAuxiliaries",
    "kld_from_cov",
    "f_obj",
    "f_obj_comparable",
    "gamma_star",
    "psi_star",
    "aux_star",
    "f_q_eval",
    "f_h_eval",
    "mi_eval",
    "comm_aux_star",
    "f_cq_eval",
]


@dataclass(frozen=True)
class AuxiliaryVariables:
    """Sensing-side auxiliaries: ``gamma`` (Hermitian PSD, n_tx x n_tx)
    and ``psi`` (snapshots x n_tx)."""

    gamma: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class CommAuxiliaries:
    """Communication-side auxiliaries for the mutual-information surrogate."""

    gamma_c: np.ndarray
    psi_c: np.ndarray


def kld_from_cov(k0, k1, n_rx, snapshots):
    """Divergence between zero-mean complex Gaussians with covariances
    ``k0`` and ``k1`` observed over ``n_rx`` independent columns.

    Returns ``n_rx * (logdet(k1) - logdet(k0) + trace(k1^-1 k0)) -
    n_rx * snapshots``; nonnegative up to round-off.
    """
    k0 = np.asarray(k0, dtype=complex)
    trace_term = float(np.real(np.trace(solve_pd(k1, k0))))
    return n_rx * (logdet_pd(k1) - logdet_pd(k0) + trace_term) - n_rx * snapshots


def f_obj(scenario, x):
    """Waveform objective ``logdet(k0^-1 k1) + trace(k1^-1 k0)``.

    Relates to the divergence as ``D = n_rx * f - n_rx * snapshots``.
    """
    k0, k1 = covariances(scenario, x)
    trace_term = float(np.real(np.trace(solve_pd(k1, k0))))
    return logdet_pd(k1) - logdet_pd(k0) + trace_term


def f_obj_comparable(scenario, x):
    """``f_obj`` minus its additive constant ``snapshots``.

    This is the level at which the surrogate chain is tight: the
    quadratic surrogate at optimal auxiliaries equals exactly
    ``f_obj - snapshots`` (the trace identity
    ``trace(k1^-1 k0) = snapshots - trace((XL)^H k1^-1 (XL))`` moves the
    constant out of the bounded part).
    """
    return f_obj(scenario, x) - scenario.snapshots


def gamma_star(x, l, k0):
    """Optimal log-det auxiliary ``(XL)^H k0^-1 (XL)``, symmetrized PSD."""
    m = np.asarray(x, dtype=complex) @ l
    return hermitian_part(m.conj().T @ solve_pd(k0, m))


def psi_star(x, l, k1):
    """Optimal quadratic-transform auxiliary ``k1^-1 X L``."""
    return solve_pd(k1, np.asarray(x, dtype=complex) @ l)


def aux_star(scenario, x, l=None):
    """Both auxiliaries at their closed-form optimizers for waveform ``x``."""
    if l is None:
        l = validate(scenario)
    k0, k1 = covariances(scenario, x)
    return AuxiliaryVariables(gamma=gamma_star(x, l, k0), psi=psi_star(x, l, k1))


def f_q_eval(scenario, x, aux):
    """Quadratic surrogate value at waveform ``x`` and auxiliaries ``aux``.

    ``log|I + gamma| - tr(gamma) - tr(psi^H R_N psi gamma)
    + 2 Re tr(gamma psi^H X L) - tr(X R_h1 X^H psi gamma psi^H)``.

    Globally lower-bounds ``f_obj - snapshots`` for any PSD ``gamma`` and
    any ``psi``, with equality at the optimizers.
    """
    l = validate(scenario)
    x = np.asarray(x, dtype=complex)
    gamma, psi = aux.gamma, aux.psi
    nt = scenario.n_tx
    head = logdet_pd(hermitian_part(np.eye(nt) + gamma))
    head -= float(np.real(np.trace(gamma)))
    a_mat = hermitian_part(psi @ gamma @ psi.conj().T)
    head -= float(np.real(np.trace(scenario.r_noise @ a_mat)))
    linear = 2.0 * float(np.real(np.trace(gamma @ psi.conj().T @ x @ l)))
    quad = float(np.real(np.trace(x @ scenario.r_h1 @ x.conj().T @ a_mat)))
    return head + linear - quad


def f_h_eval(scenario, x, aux, z, lam_bar):
    """Isotropically relaxed surrogate at anchor ``z`` and bound ``lam_bar``.

    Requires ``lam_bar`` to exceed the largest eigenvalue of the
    Kronecker-structured quadratic operator built from ``aux``; all
    operator products are applied in factored form.
    Equals the quadratic surrogate when ``z == x``; never exceeds it.
    """
    l = validate(scenario)
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    gamma, psi = aux.gamma, aux.psi
    nt = scenario.n_tx
    a_mat = hermitian_part(psi @ gamma @ psi.conj().T)
    b_mat = psi @ gamma @ l.conj().T

    head = logdet_pd(hermitian_part(np.eye(nt) + gamma))
    head -= float(np.real(np.trace(gamma)))
    head -= float(np.real(np.trace(scenario.r_noise @ a_mat)))

    def inner(u, v):
        return complex(np.vdot(u, v))  # vec(u)^H vec(v)

    az = kron_apply(a_mat, scenario.r_h1, z)
    val = head
    val += 2.0 * inner(x, b_mat).real
    val += 2.0 * (lam_bar * inner(x, z) - inner(x, az)).real
    val += (inner(z, az) - lam_bar * inner(z, z)).real
    val -= lam_bar * inner(x, x).real
    return float(val)


def mi_eval(h_c, r_nc, x):
    """Mutual information ``log|I + (H_c X)^H R_nc^-1 (H_c X)|`` of the
    communication link for waveform ``x``.

    ``h_c`` has ``snapshots`` columns; ``r_nc`` is the positive definite
    receiver noise covariance.
    """
    s = np.asarray(h_c, dtype=complex) @ np.asarray(x, dtype=complex)
    q = hermitian_part(s.conj().T @ solve_pd(r_nc, s))
    return logdet_pd(hermitian_part(np.eye(q.shape[0]) + q)) if q.size else 0.0


def comm_aux_star(h_c, r_nc, x):
    """Optimal communication auxiliaries for waveform ``x``.

    ``gamma_c = (H_c X)^H R_nc^-1 (H_c X)`` (the argument of the
    mutual-information log-det, which is where the log-det minorizer is
    tight) and ``psi_c = (H_c X X^H H_c^H + R_nc)^-1 H_c X``.
    """
    h_c = np.asarray(h_c, dtype=complex)
    x = np.asarray(x, dtype=complex)
    s = h_c @ x
    gamma_c = hermitian_part(s.conj().T @ solve_pd(r_nc, s))
    e = hermitian_part(s @ s.conj().T + r_nc)
    psi_c = solve_pd(e, s)
    return CommAuxiliaries(gamma_c=gamma_c, psi_c=psi_c)


def f_cq_eval(h_c, r_nc, x, caux):
    """Quadratic communication surrogate at waveform ``x``.

    ``log|I + gamma_c| - tr(gamma_c) + tr((I + gamma_c)
    (2 Re{(H_c X)^H psi_c} - psi_c^H (H_c X X^H H_c^H + R_nc) psi_c))``.

    Globally lower-bounds ``mi_eval`` with equality at the optimal
    auxiliaries.
    """
    h_c = np.asarray(h_c, dtype=complex)
    x = np.asarray(x, dtype=complex)
    gamma_c, psi_c = caux.gamma_c, caux.psi_c
    s = h_c @ x
    n = gamma_c.shape[0]
    i_plus = hermitian_part(np.eye(n) + gamma_c)
    e = hermitian_part(s @ s.conj().T + r_nc)
    linear = 2.0 * float(np.real(np.trace(i_plus @ psi_c.conj().T @ s)))
    quad = float(np.real(np.trace(i_plus @ psi_c.conj().T @ e @ psi_c)))
    return logdet_pd(i_plus) - float(np.real(np.trace(gamma_c))) + linear - quad
