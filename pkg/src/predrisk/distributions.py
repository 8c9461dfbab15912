"""Multivariate normal and multivariate t primitives plus sufficient statistics.

All densities are computed and returned in log space.  Single-instance
functions take the typed parameter objects below; the ``*_batch`` variants
take raw arrays with a leading batch axis and are what the Monte Carlo risk
engine calls in its inner loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import DimensionMismatch, NotPositiveDefinite
from .linalg import cholesky_upper, solve_upper
from .rng import RandomStream
from .validation import check_matrix, check_symmetric, check_upper_triangular, check_vector

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ObservationSet:
    """n x d matrix of observed samples (rows are samples)."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", check_matrix(self.data, "observations"))
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("observations must contain at least one row and one column")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def as_observations(obs) -> ObservationSet:
    """Coerce an (n, d) array or ObservationSet to an ObservationSet."""
    if isinstance(obs, ObservationSet):
        return obs
    return ObservationSet(np.atleast_2d(np.asarray(obs, dtype=np.float64)))


@dataclass(frozen=True)
class MvnParams:
    """Mean vector and upper-triangular covariance factor (cov = U U^T)."""

    mu: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        mu = check_vector(self.mu, "mu")
        U = check_upper_triangular(self.U, "U", positive_diagonal=True)
        if U.shape[0] != mu.shape[0]:
            raise DimensionMismatch(f"mu has length {mu.shape[0]} but U is {U.shape}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "U", U)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    def covariance(self) -> np.ndarray:
        return self.U @ self.U.T

    @classmethod
    def standard(cls, d: int) -> "MvnParams":
        return cls(np.zeros(d), np.eye(d))

    @classmethod
    def from_covariance(cls, mu, sigma) -> "MvnParams":
        return cls(mu, cholesky_upper(sigma))


@dataclass(frozen=True)
class StudentTParams:
    """Degrees of freedom, location and scale matrix of a multivariate t."""

    nu: float
    loc: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("degrees of freedom must be positive")
        loc = check_vector(self.loc, "loc")
        scale = check_symmetric(self.scale, "scale", rel_tol=1e-12)
        if scale.shape[0] != loc.shape[0]:
            raise DimensionMismatch(f"loc has length {loc.shape[0]} but scale is {scale.shape}")
        if np.any(np.linalg.eigvalsh(scale) <= 0.0):
            raise NotPositiveDefinite("scale matrix must be positive definite")
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.loc.shape[0]


@dataclass(frozen=True)
class SampleStats:
    """Sample mean and (unnormalized) scatter matrix sum (x_i - mean)(x_i - mean)^T."""

    mean: np.ndarray
    scatter: np.ndarray
    n: int


def mvn_logpdf(x, params: MvnParams) -> float:
    """Log density of the multivariate normal at ``x``.

    Computed through the triangular factor: the quadratic form is
    ``||U^-1 (x - mu)||^2`` obtained by one triangular solve.
    """
    x = check_vector(x, "x")
    if x.shape[0] != params.d:
        raise DimensionMismatch(f"x has length {x.shape[0]}, params have dimension {params.d}")
    z = solve_upper(params.U, x - params.mu)
    return float(-0.5 * params.d * _LOG_2PI - np.sum(np.log(np.diag(params.U))) - 0.5 * z @ z)


def mvt_logpdf(x, params: StudentTParams) -> float:
    """Log density of the multivariate t at ``x``."""
    x = check_vector(x, "x")
    m = params.dim
    if x.shape[0] != m:
        raise DimensionMismatch(f"x has length {x.shape[0]}, params have dimension {m}")
    U = cholesky_upper(params.scale)
    z = solve_upper(U, x - params.loc)
    quad = float(z @ z)
    nu = params.nu
    return float(
        gammaln(0.5 * (nu + m)) - gammaln(0.5 * nu)
        - 0.5 * m * (np.log(nu) + np.log(np.pi))
        - np.sum(np.log(np.diag(U)))
        - 0.5 * (nu + m) * np.log1p(quad / nu)
    )


def sample_mvn(params: MvnParams, count: int, stream: RandomStream, offset: int = 0) -> ObservationSet:
    """Draw ``count`` rows of mu + U z with z standard normal from ``stream``.

    Deterministic given the stream and offset: the same call always returns
    bitwise-identical output.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    z = stream.normals((count, params.d), offset=offset)
    return ObservationSet(params.mu + z @ params.U.T)


def sample_stats(obs) -> SampleStats:
    """Mean and scatter of an observation set.

    The scatter is the *unnormalized* sum of outer products; divide by
    ``n - 1`` or ``n`` for the usual covariance estimates.
    """
    data = as_observations(obs).data
    mean = data.mean(axis=0)
    centered = data - mean
    scatter = centered.T @ centered
    return SampleStats(mean=mean, scatter=0.5 * (scatter + scatter.T), n=data.shape[0])


# ---------------------------------------------------------------------------
# Batched variants (leading batch axis, raw arrays).


def mvn_logpdf_batch(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log MVN density for a batch: x (B, d), mean (B, d) or (d,), cov (B, d, d).

    Degenerate rows (non-positive determinant) yield NaN rather than
    raising, so the risk engine can count them as undefined samples.
    """
    d = x.shape[-1]
    diff = x - mean
    if d == 2:
        logdet, quad = _logdet_quad_2x2(cov, diff)
    else:
        logdet, quad = _logdet_quad_general(cov, diff)
    return -0.5 * (d * _LOG_2PI + logdet + quad)


def mvt_logpdf_batch(x: np.ndarray, nu: float, loc: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Log multivariate-t density for a batch; see ``mvn_logpdf_batch``."""
    m = x.shape[-1]
    diff = x - loc
    if m == 2:
        logdet, quad = _logdet_quad_2x2(scale, diff)
    else:
        logdet, quad = _logdet_quad_general(scale, diff)
    return (gammaln(0.5 * (nu + m)) - gammaln(0.5 * nu)
            - 0.5 * m * (np.log(nu) + np.log(np.pi))
            - 0.5 * logdet - 0.5 * (nu + m) * np.log1p(quad / nu))


def _logdet_quad_general(cov, diff):
    """(logdet, quadratic form) for batches of d x d matrices, NaN on failure.

    Rows with non-positive determinant are routed through an identity
    placeholder so the batched solve cannot raise; their log-determinant is
    NaN, which poisons the final density as intended.
    """
    cov = np.asarray(cov, dtype=np.float64)
    sign, logdet = np.linalg.slogdet(cov)
    bad = sign <= 0
    if np.any(bad):
        logdet = np.where(bad, np.nan, logdet)
        eye = np.eye(cov.shape[-1])
        cov = np.where(np.asarray(bad)[..., None, None], eye, cov)
    sol = np.linalg.solve(cov, diff[..., None])[..., 0]
    quad = np.einsum("...i,...i->...", diff, sol)
    return logdet, quad


def _logdet_quad_2x2(cov, diff):
    """(logdet, quadratic form) for batches of symmetric 2x2 matrices.

    Closed form; rows with det <= 0 or negative diagonal come back NaN.
    """
    a = cov[..., 0, 0]
    b = cov[..., 0, 1]
    c = cov[..., 1, 1]
    det = a * c - b * b
    bad = (det <= 0.0) | (a <= 0.0)
    det = np.where(bad, np.nan, det)
    logdet = np.log(det)
    d0 = diff[..., 0]
    d1 = diff[..., 1]
    quad = (c * d0 * d0 - 2.0 * b * d0 * d1 + a * d1 * d1) / det
    return logdet, quad


def batch_sample_stats(data: np.ndarray):
    """Mean (B, d) and scatter (B, d, d) for a (B, n, d) batch of datasets."""
    mean = data.mean(axis=1)
    centered = data - mean[:, None, :]
    scatter = np.einsum("bni,bnj->bij", centered, centered)
    return mean, scatter
