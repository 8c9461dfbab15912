"""Tensor-product Gauss-Legendre quadrature with refinement checks."""

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import QuadratureNotConverged


def integrate_box_2d(log_f, center, halfwidth, n_points: int = 200) -> float:
    """Integral of exp(log_f) over an axis-aligned box.

    ``log_f(xs, ys)`` must accept node vectors and return the (len(xs),
    len(ys)) grid of log values.
    """
    t, w = leggauss(n_points)
    xs = center[0] + halfwidth[0] * t
    ys = center[1] + halfwidth[1] * t
    grid = log_f(xs, ys)
    weights = np.outer(w, w) * (halfwidth[0] * halfwidth[1])
    peak = grid.max()
    return float(np.exp(peak) * (np.exp(grid - peak) * weights).sum())


def integrate_box_2d_refined(log_f, center, halfwidth, rel_tol: float,
                             n_start: int = 200, max_doublings: int = 3) -> float:
    """Refine the grid until successive integrals agree to ``rel_tol``."""
    n = n_start
    prev = integrate_box_2d(log_f, center, halfwidth, n)
    for _ in range(max_doublings):
        n *= 2
        cur = integrate_box_2d(log_f, center, halfwidth, n)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise QuadratureNotConverged(
        f"box quadrature did not stabilize to rel_tol={rel_tol:g} by {n} points per axis")


def integrate_plane_2d(log_f, center, scale, n_points: int = 400) -> float:
    """Integral of exp(log_f) over the whole plane via x = c + s tan(theta).

    The tangent substitution maps each axis to a finite interval while
    keeping polynomially decaying tails integrable, so heavy-tailed
    densities are captured without choosing a truncation box.
    """
    t, w = leggauss(n_points)
    theta = 0.5 * np.pi * t
    tan = np.tan(theta)
    sec2 = 1.0 / np.cos(theta) ** 2
    xs = center[0] + scale[0] * tan
    ys = center[1] + scale[1] * tan
    grid = log_f(xs, ys)
    jac = np.outer(sec2, sec2) * (scale[0] * scale[1]) * (0.5 * np.pi) ** 2
    weights = np.outer(w, w) * jac
    peak = grid.max()
    return float(np.exp(peak) * (np.exp(grid - peak) * weights).sum())


def integrate_plane_2d_refined(log_f, center, scale, rel_tol: float,
                               n_start: int = 300, max_doublings: int = 3) -> float:
    n = n_start
    prev = integrate_plane_2d(log_f, center, scale, n)
    for _ in range(max_doublings):
        n *= 2
        cur = integrate_plane_2d(log_f, center, scale, n)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise QuadratureNotConverged(
        f"plane quadrature did not stabilize to rel_tol={rel_tol:g} by {n} points per axis")
