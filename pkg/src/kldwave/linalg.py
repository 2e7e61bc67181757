"""Dense complex Hermitian linear-algebra kernels.

Every solver in this package funnels its matrix work through these
routines: Cholesky factorization with an explicit pivot test, solves
that never materialize an inverse, log-determinants, dominant
eigenvalues via seeded power iteration, and Kronecker-structured
products applied without forming the Kronecker matrix.

All functions are pure; inputs are never modified.
"""

import numpy as np
import scipy.linalg

from .errors import DidNotConverge, NotPositiveDefinite, ShapeMismatch

__all__ = [
    "hermitian_part",
    "check_hermitian",
    "cholesky_pd",
    "solve_pd",
    "logdet_pd",
    "power_iteration_max_eig",
    "kron_apply",
]


def hermitian_part(m):
    """Return the Hermitian symmetrization (M + M^H)/2 as complex128."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().T)


def check_hermitian(m, atol=1e-12):
    """Validate that ``m`` is Hermitian and return its symmetrization.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Matrix expected to be Hermitian.
    atol : float
        Largest tolerated entrywise asymmetry ``|M - M^H|``.

    Returns
    -------
    ndarray
        ``(M + M^H)/2`` with an exactly real diagonal.

    Raises
    ------
    ShapeMismatch
        If ``m`` is not square.
    ValueError
        If the asymmetry exceeds ``atol``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if asym > atol:
        raise ValueError(
            f"matrix is not Hermitian: max asymmetry {asym:.3e} exceeds {atol:.3e}"
        )
    return hermitian_part(m)


def cholesky_pd(m, rel_tol=0.0):
    """Lower Cholesky factor of a Hermitian positive definite matrix.

    Parameters
    ----------
    m : ndarray, shape (n, n)
        Hermitian matrix to factor.
    rel_tol : float
        Pivot threshold relative to the largest diagonal entry of ``m``.
        Any pivot at or below ``rel_tol * max(diag(m))`` fails the test.

    Returns
    -------
    L : ndarray, shape (n, n)
        Lower triangular with real positive diagonal, ``L @ L^H = m``.

    Raises
    ------
    NotPositiveDefinite
        If the factorization encounters a non-positive (or sub-threshold)
        pivot.  Signals an invalid covariance difference or a singular
        noise covariance.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return m.copy()
    try:
        low = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    # LAPACK only rejects pivots <= 0; enforce the relative threshold on
    # the squared diagonal of L, which carries the pivot values.
    if rel_tol > 0.0:
        pivots = np.real(np.diag(low)) ** 2
        bound = rel_tol * float(np.max(np.real(np.diag(m))))
        if np.any(pivots <= bound):
            raise NotPositiveDefinite(
                f"pivot {pivots.min():.3e} at or below threshold {bound:.3e}"
            )
    return low


def solve_pd(m, b):
    """Solve ``m @ s = b`` for Hermitian positive definite ``m``.

    Factors ``m`` once and back-substitutes; the inverse is never formed.

    Raises
    ------
    NotPositiveDefinite
        Propagated from the factorization.
    ShapeMismatch
        If ``b`` does not have ``m.shape[0]`` rows.
    """
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != m.shape[0]:
        raise ShapeMismatch(
            f"b has {b.shape[0]} rows, expected {m.shape[0]}"
        )
    low = cholesky_pd(m)
    y = scipy.linalg.solve_triangular(low, b, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(
        low.conj().T, y, lower=False, check_finite=False
    )


def logdet_pd(m):
    """log-determinant of a Hermitian positive definite matrix.

    Computed as ``2 * sum(log(diag(L)))`` from the Cholesky factor,
    so the result is always a finite real number when the factorization
    succeeds.
    """
    low = cholesky_pd(m)
    return float(2.0 * np.sum(np.log(np.real(np.diag(low)))))


def power_iteration_max_eig(m, max_iters=100, tol=1e-10, seed=0):
    """Dominant eigenvalue of a Hermitian PSD matrix by power iteration.

    The iteration starts from a seeded random unit vector so that runs
    are bitwise reproducible.  Convergence is declared when the relative
    change of the Rayleigh quotient drops below ``tol``.

    Parameters
    ----------
    m : ndarray, shape (n, n)
        Hermitian positive semidefinite matrix.
    max_iters : int
        Iteration budget (>= 1).
    tol : float
        Relative tolerance on the Rayleigh-quotient change.
    seed : int
        Seed for the starting vector.

    Returns
    -------
    float
        Estimate of the largest eigenvalue.

    Raises
    ------
    DidNotConverge
        If the Rayleigh quotient is still moving after ``max_iters``
        iterations.  Callers pick their own fallback (e.g. the trace,
        which upper-bounds the spectrum of a PSD matrix).
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ShapeMismatch(f"expected a square matrix, got shape {m.shape}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    w = m @ v
    lam = float(np.real(np.vdot(v, w)))
    for _ in range(max_iters):
        norm_w = np.linalg.norm(w)
        if norm_w <= 1e-300:
            # v is annihilated; for a PSD matrix with a random start this
            # only happens when the matrix is (numerically) zero.
            return 0.0
        v = w / norm_w
        w = m @ v
        lam_new = float(np.real(np.vdot(v, w)))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise DidNotConverge(
        f"power iteration: Rayleigh quotient still changing after {max_iters} iterations"
    )


def kron_apply(a, r, x):
    """Apply the Kronecker-structured operator ``(R^T kron A)`` to vec(X).

    Returns ``A @ X @ R``, which equals the column-major reshape of
    ``(R^T kron A) @ vec(X)`` without ever forming the Kronecker product.

    Parameters
    ----------
    a : ndarray, shape (t, t)
    r : ndarray, shape (n, n)
    x : ndarray, shape (t, n)
    """
    a = np.asarray(a, dtype=complex)
    r = np.asarray(r, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if x.shape != (a.shape[0], r.shape[0]) or a.shape[0] != a.shape[1] or r.shape[0] != r.shape[1]:
        raise ShapeMismatch(
            f"incompatible shapes: a {a.shape}, r {r.shape}, x {x.shape}"
        )
    return a @ x @ r
