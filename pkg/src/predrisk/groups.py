"""The two symmetry groups of the implemented likelihoods and their actions.

* ``GroupElementN``: pairs ``(V, m)`` of an upper-triangular matrix with
  positive diagonal and a translation vector, composing as
  ``(V2, m2) (V1, m1) = (V2 V1, V2 m1 + m2)``.  Acting affinely on data and
  on normal parameters, it leaves the normal likelihood invariant.
* ``GpGroupElement``: pairs ``(a, b)`` of a positive scale and a
  feature-coefficient shift acting on GP observations through the feature
  matrix.

Haar (right-invariant) log densities are exposed only up to an additive
constant; every downstream use is scale free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import MvnParams, ObservationSet, as_observations
from .exceptions import DimensionMismatch
from .validation import check_matrix, check_upper_triangular, check_vector


@dataclass(frozen=True)
class GroupElementN:
    """Affine transform x -> V x + m with V upper triangular, diag(V) > 0."""

    V: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        V = check_upper_triangular(self.V, "V", positive_diagonal=True)
        m = check_vector(self.m, "m", size=V.shape[0])
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "m", m)

    @property
    def d(self) -> int:
        return self.m.shape[0]

    @classmethod
    def identity(cls, d: int) -> "GroupElementN":
        return cls(np.eye(d), np.zeros(d))

    def log_abs_det(self) -> float:
        return float(np.sum(np.log(np.diag(self.V))))


def gn_compose(g2: GroupElementN, g1: GroupElementN) -> GroupElementN:
    """Composition g2 after g1: (V2 V1, V2 m1 + m2)."""
    if g2.d != g1.d:
        raise DimensionMismatch(f"cannot compose elements of dimension {g2.d} and {g1.d}")
    return GroupElementN(g2.V @ g1.V, g2.V @ g1.m + g2.m)


def gn_inverse(g: GroupElementN) -> GroupElementN:
    """(V^-1, -V^-1 m); triangular back-substitution keeps V^-1 triangular."""
    v_inv = solve_triangular(g.V, np.eye(g.d), lower=False)
    return GroupElementN(np.triu(v_inv), -v_inv @ g.m)


def gn_act_data(g: GroupElementN, obs) -> ObservationSet:
    """Apply x -> V x + m to every row of an observation set."""
    data = as_observations(obs).data
    if data.shape[1] != g.d:
        raise DimensionMismatch(f"observations have dimension {data.shape[1]}, element has {g.d}")
    return ObservationSet(data @ g.V.T + g.m)


def gn_act_params(g: GroupElementN, theta: MvnParams) -> MvnParams:
    """Parameter action (U, mu) -> (V U, V mu + m)."""
    if theta.d != g.d:
        raise DimensionMismatch(f"params have dimension {theta.d}, element has {g.d}")
    return MvnParams(g.V @ theta.mu + g.m, np.triu(g.V @ theta.U))


def gn_right_haar_logdensity(theta: MvnParams) -> float:
    """Unnormalized log density of the right-invariant prior at (U, mu).

    sum_i (-i) log U_ii over the 1-based diagonal index; the translation
    part is flat and contributes nothing.
    """
    diag = np.diag(theta.U)
    i = np.arange(1, theta.d + 1, dtype=np.float64)
    return float(-(i * np.log(diag)).sum())


# ---------------------------------------------------------------------------
# Scale-and-coefficient-shift group for GP regression.


@dataclass(frozen=True)
class GpGroupElement:
    """Pair (a, b): positive amplitude scale and feature-coefficient shift."""

    a: float
    b: np.ndarray

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("scale a must be positive")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", check_vector(self.b, "b"))

    @property
    def p(self) -> int:
        return self.b.shape[0]

    @classmethod
    def identity(cls, p: int) -> "GpGroupElement":
        return cls(1.0, np.zeros(p))


def gp_compose(g2: GpGroupElement, g1: GpGroupElement) -> GpGroupElement:
    if g2.p != g1.p:
        raise DimensionMismatch(f"cannot compose elements with {g2.p} and {g1.p} coefficients")
    return GpGroupElement(g2.a * g1.a, g2.a * g1.b + g2.b)


def gp_inverse(g: GpGroupElement) -> GpGroupElement:
    return GpGroupElement(1.0 / g.a, -g.b / g.a)


def gp_act_outputs(g: GpGroupElement, train_features, y, pred_features=None, y_star=None):
    """Act on observed outputs and, when given, on prediction targets.

    ``y -> a y + X b`` with ``X`` the feature matrix whose rows are the
    training feature tuples, and identically ``y* -> a y* + X* b`` on
    prediction targets.  The joint output vector transforms by one affine
    map, which is what makes the joint likelihood invariant with Jacobian
    a^(n+m).

    Returns ``(y_transformed, y_star_transformed)``; the second entry is
    None when no prediction targets were supplied.
    """
    X = check_matrix(train_features, "train_features")
    y = check_vector(y, "y", size=X.shape[0])
    if X.shape[1] != g.p:
        raise DimensionMismatch(f"features have {X.shape[1]} columns, element has {g.p}")
    y2 = g.a * y + X @ g.b
    if pred_features is None:
        return y2, None
    Xs = check_matrix(pred_features, "pred_features")
    if Xs.shape[1] != g.p:
        raise DimensionMismatch(f"pred features have {Xs.shape[1]} columns, element has {g.p}")
    if y_star is None:
        if Xs.shape[0] != 0:
            raise ValueError("y_star is required when prediction features are given")
        return y2, np.empty(0)
    ys = check_vector(y_star, "y_star", size=Xs.shape[0])
    return y2, g.a * ys + Xs @ g.b


def gp_act_params(g: GpGroupElement, beta, sigma_y: float):
    """Parameter action (beta, sigma_y) -> (a beta + b, a sigma_y)."""
    beta = check_vector(beta, "beta", size=g.p)
    if not sigma_y > 0:
        raise ValueError("sigma_y must be positive")
    return g.a * beta + g.b, g.a * sigma_y


def gp_right_haar_logdensity(sigma_y: float) -> float:
    """Unnormalized log right-Haar density 1/sigma_y (coefficients are flat)."""
    if not sigma_y > 0:
        raise ValueError("sigma_y must be positive")
    return -float(np.log(sigma_y))
