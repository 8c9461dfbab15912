"""Input validation helpers.

Small check-and-coerce utilities in the spirit of scikit-learn's
``check_array``, but raising this library's exception types so callers can
distinguish shape problems from numerical degeneracy.
"""

import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite


def as_float_array(x, name="array", ndim=None):
    """Coerce to a C-contiguous float64 ndarray and require finite entries."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_vector(x, name="vector", size=None):
    v = as_float_array(x, name, ndim=1)
    if size is not None and v.shape[0] != size:
        raise DimensionMismatch(f"{name} must have length {size}, got {v.shape[0]}")
    return v


def check_matrix(x, name="matrix", shape=None):
    m = as_float_array(x, name, ndim=2)
    if shape is not None and m.shape != tuple(shape):
        raise DimensionMismatch(f"{name} must have shape {tuple(shape)}, got {m.shape}")
    return m


def check_square(x, name="matrix"):
    m = check_matrix(x, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {m.shape}")
    return m


def check_symmetric(x, name="matrix", rel_tol=1e-10):
    """Require symmetry up to ``rel_tol`` relative to the matrix scale."""
    m = check_square(x, name)
    scale = np.abs(m).max()
    if scale > 0 and np.abs(m - m.T).max() > rel_tol * scale:
        raise ValueError(f"{name} is not symmetric to relative tolerance {rel_tol:g}")
    return 0.5 * (m + m.T)


def check_upper_triangular(x, name="matrix", positive_diagonal=True):
    m = check_square(x, name)
    if np.any(np.tril(m, -1) != 0.0):
        raise ValueError(f"{name} must be upper triangular")
    if positive_diagonal and np.any(np.diag(m) <= 0.0):
        raise NotPositiveDefinite(f"{name} must have a strictly positive diagonal")
    return m


def require_same(actual, expected, what):
    if actual != expected:
        raise DimensionMismatch(f"{what}: expected {expected}, got {actual}")
