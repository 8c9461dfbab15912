"""Dense linear-algebra primitives: Cholesky factors and Gram determinants.

Conventions
-----------
Covariance matrices are factored as ``sigma = U @ U.T`` with ``U`` *upper*
triangular and positive diagonal.  This differs from the more common lower
triangular ``L @ L.T`` convention; the upper factor is what the triangular
group in :mod:`predrisk.groups` acts on, so it is used consistently
throughout the library.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import NotPositiveDefinite, SingularGram
from .validation import check_symmetric

# Cholesky pivots below this (after unit scaling) are treated as singular.
_GRAM_PIVOT_FLOOR = 1e-300


def cholesky_upper(sigma, jitter: float = 0.0) -> np.ndarray:
    """Upper-triangular Cholesky factor ``U`` with ``U @ U.T = sigma``.

    Parameters
    ----------
    sigma : (d, d) array_like
        Symmetric positive-definite matrix.
    jitter : float, optional
        Added to the diagonal before factoring.  Defaults to 0: degenerate
        input raises instead of being silently regularized, since hidden
        jitter would bias downstream risk estimates.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    s = check_symmetric(sigma, "sigma")
    if jitter:
        s = s + jitter * np.eye(s.shape[0])
    # Reversing rows and columns turns the upper factor of sigma into the
    # lower factor of the reversed matrix, so one LAPACK call suffices.
    rev = s[::-1, ::-1]
    try:
        low = np.linalg.cholesky(rev)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    return np.ascontiguousarray(low[::-1, ::-1])


def logdet_from_upper(upper: np.ndarray) -> float:
    """log det of ``U @ U.T`` given its upper Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(upper))))


def solve_upper(upper, b, transpose: bool = False) -> np.ndarray:
    """Solve ``U x = b`` (or ``U.T x = b``) for upper-triangular ``U``."""
    return solve_triangular(upper, b, lower=False, trans="T" if transpose else "N")


def gram_logdet(vectors) -> float:
    """log det of the Gram matrix ``G[i, j] = <v_i, v_j>``.

    Each vector is scaled to unit norm before the Gram matrix is formed and
    factored, and the norms re-enter in log space, so the result stays
    finite for badly scaled inputs.

    Parameters
    ----------
    vectors : sequence of 1-D array_like, or (k, n) array_like
        Vectors of a common length ``n``.

    Raises
    ------
    SingularGram
        If the vectors are numerically linearly dependent.
    """
    mat = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if mat.ndim != 2:
        raise ValueError("vectors must form a 2-D array")
    # scale by the max entry first so squared norms cannot overflow
    amax = np.abs(mat).max(axis=1)
    if np.any(amax == 0.0):
        raise SingularGram("zero vector in Gram matrix")
    scaled = mat / amax[:, None]
    rel_norms = np.sqrt(np.einsum("ij,ij->i", scaled, scaled))
    unit = scaled / rel_norms[:, None]
    norms_log = np.log(amax) + np.log(rel_norms)
    gram = unit @ unit.T
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularGram("Gram matrix is numerically singular") from exc
    diag = np.diag(chol)
    if np.min(diag) ** 2 < _GRAM_PIVOT_FLOOR:
        raise SingularGram("Gram matrix pivot underflow")
    return 2.0 * float(np.sum(np.log(diag)) + np.sum(norms_log))
