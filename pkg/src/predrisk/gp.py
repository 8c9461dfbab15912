"""Fixed-lengthscale RBF Gaussian-process regression with a linear mean.

The model: outputs at feature rows ``x_1 .. x_n`` (each a p-vector) are
jointly normal with mean ``X beta`` and covariance ``sigma_y^2 K``, where
``K`` is the RBF kernel over the feature rows themselves and the
lengthscale is fixed.  The feature rows double as kernel locations; a
constant feature column contributes nothing to kernel distances, so the
usual spatial setup (1, x1, x2) works unchanged.

Marginalizing ``beta`` (flat) and ``sigma_y`` (1/sigma prior) in closed
form turns the predictive at m new rows into a multivariate t whose
parameters come from the blocks of

    A = K^-1 - K^-1 X (X^T K^-1 X)^-1 X^T K^-1

built over the stacked n + m rows.  ``A`` is the kernel-metric projector
orthogonal to the feature columns: ``A X = 0`` and its pp block is positive
definite whenever the features have full rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import (
    DegenerateObservation,
    DimensionMismatch,
    RankDeficientFeatures,
    SingularKernel,
)
from .distributions import StudentTParams
from .validation import check_matrix, check_vector

# Residual quadratic forms below this times ||y||^2 flag the excluded
# measure-zero subspace (y in the feature column space), not ill-conditioning.
_DEGENERATE_REL_TOL = 1e-12


@dataclass(frozen=True)
class GpParams:
    """Linear-mean coefficients and amplitude of the GP likelihood."""

    beta: np.ndarray
    sigma_y: float

    def __post_init__(self):
        object.__setattr__(self, "beta", check_vector(self.beta, "beta"))
        if not self.sigma_y > 0:
            raise ValueError("sigma_y must be positive")
        object.__setattr__(self, "sigma_y", float(self.sigma_y))


@dataclass(frozen=True)
class GpDesign:
    """Training and prediction feature rows plus the fixed kernel lengthscale."""

    train_x: np.ndarray
    pred_x: np.ndarray
    lengthscale: float = 1.0

    def __post_init__(self):
        tx = check_matrix(self.train_x, "train_x")
        px = np.asarray(self.pred_x, dtype=np.float64)
        if px.size == 0:
            px = np.empty((0, tx.shape[1]))
        px = check_matrix(px, "pred_x")
        if px.shape[1] != tx.shape[1]:
            raise DimensionMismatch(
                f"pred_x has {px.shape[1]} columns, train_x has {tx.shape[1]}")
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")
        stacked = np.vstack([tx, px])
        if len(np.unique(stacked, axis=0)) != len(stacked):
            raise SingularKernel("design rows must be pairwise distinct")
        object.__setattr__(self, "train_x", tx)
        object.__setattr__(self, "pred_x", px)
        object.__setattr__(self, "lengthscale", float(self.lengthscale))

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    @property
    def m(self) -> int:
        return self.pred_x.shape[0]

    @property
    def p(self) -> int:
        return self.train_x.shape[1]

    def subset(self, n_train: int) -> "GpDesign":
        """Design restricted to the first ``n_train`` training rows."""
        if not 0 <= n_train <= self.n:
            raise ValueError(f"n_train must be in [0, {self.n}], got {n_train}")
        return GpDesign(self.train_x[:n_train], self.pred_x, self.lengthscale)


@dataclass(frozen=True)
class GpAMatrix:
    """Projector A with its observation/prediction blocks."""

    full: np.ndarray
    n: int

    @property
    def oo(self) -> np.ndarray:
        return self.full[: self.n, : self.n]

    @property
    def op(self) -> np.ndarray:
        return self.full[: self.n, self.n:]

    @property
    def po(self) -> np.ndarray:
        return self.full[self.n:, : self.n]

    @property
    def pp(self) -> np.ndarray:
        return self.full[self.n:, self.n:]


def rbf_kernel(x1, x2, lengthscale: float) -> np.ndarray:
    """exp(-||v_i - w_j||^2 / (2 lengthscale^2)) entrywise."""
    if not lengthscale > 0:
        raise ValueError("lengthscale must be positive")
    a = check_matrix(x1, "x1")
    b = check_matrix(x2, "x2")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"x1 has {a.shape[1]} columns, x2 has {b.shape[1]}")
    sq = (np.einsum("ij,ij->i", a, a)[:, None]
          + np.einsum("ij,ij->i", b, b)[None, :]
          - 2.0 * (a @ b.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * lengthscale * lengthscale))


def _kernel_factor(x, lengthscale):
    k = rbf_kernel(x, x, lengthscale)
    try:
        return cho_factor(k, lower=True)
    except LinAlgError as exc:
        raise SingularKernel("kernel matrix is numerically singular") from exc


def projector_matrix(kernel: np.ndarray, features: np.ndarray) -> np.ndarray:
    """A = K^-1 - K^-1 X (X^T K^-1 X)^-1 X^T K^-1 for given K and X.

    Computed through Cholesky solves; the result is symmetrized.  With
    K = I this is the familiar projector orthogonal to col(X).
    """
    try:
        factor = cho_factor(kernel, lower=True)
    except LinAlgError as exc:
        raise SingularKernel("kernel matrix is numerically singular") from exc
    ki = cho_solve(factor, np.eye(len(kernel)))
    ki_x = cho_solve(factor, features)
    m_mat = features.T @ ki_x
    try:
        m_factor = cho_factor(0.5 * (m_mat + m_mat.T), lower=True)
    except LinAlgError as exc:
        raise RankDeficientFeatures("feature matrix does not have full column rank") from exc
    a = ki - ki_x @ cho_solve(m_factor, ki_x.T)
    return 0.5 * (a + a.T)


def build_a_matrix(design: GpDesign) -> GpAMatrix:
    """Projector matrix over the stacked design rows, with its blocks.

    The kernel is the RBF over the stacked feature rows and the feature
    matrix is those rows themselves.  Raises ``SingularKernel`` for
    (near-)duplicate rows and ``RankDeficientFeatures`` when X^T K^-1 X is
    singular.
    """
    x_all = np.vstack([design.train_x, design.pred_x])
    kernel = rbf_kernel(x_all, x_all, design.lengthscale)
    return GpAMatrix(full=projector_matrix(kernel, x_all), n=design.n)


def _t_pieces(design: GpDesign, y):
    y = check_vector(y, "y", size=design.n)
    if design.n <= design.p:
        raise ValueError(f"need n > p observations, got n = {design.n}, p = {design.p}")
    a = build_a_matrix(design)
    app_factor = cho_factor(a.pp, lower=True)
    loc = -cho_solve(app_factor, a.po @ y)
    quad = float(y @ (a.oo @ y) - (a.po @ y) @ cho_solve(app_factor, a.po @ y))
    ynorm = float(y @ y)
    if quad <= _DEGENERATE_REL_TOL * ynorm:
        raise DegenerateObservation(
            "outputs lie in the feature column space; the predictive is undefined")
    app_inv = cho_solve(app_factor, np.eye(design.m))
    return loc, quad, 0.5 * (app_inv + app_inv.T)


def t_predictive(design: GpDesign, y, prior: str = "right-invariant") -> StudentTParams:
    """Posterior predictive t parameters at the design's prediction rows.

    ``prior="right-invariant"`` (the 1/sigma prior, which coincides with
    independence-Jeffreys here) gives nu = n - p; ``prior="jeffreys"``
    (the sigma^-(p+1) prior) gives nu = n with the same location.
    """
    if prior not in ("right-invariant", "jeffreys"):
        raise ValueError(f"prior must be 'right-invariant' or 'jeffreys', got {prior!r}")
    loc, quad, app_inv = _t_pieces(design, y)
    nu = design.n - design.p if prior == "right-invariant" else design.n
    return StudentTParams(nu=nu, loc=loc, scale=(quad / nu) * app_inv)


def gls_fit(design: GpDesign, y, flavor: str = "unbiased") -> GpParams:
    """Generalized-least-squares point estimate of (beta, sigma_y).

    beta_hat = (X^T K^-1 X)^-1 X^T K^-1 y over the training rows;
    sigma_hat^2 is the kernel-weighted residual sum divided by n
    (``flavor="mle"``) or n - p (``flavor="unbiased"``).
    """
    if flavor not in ("unbiased", "mle"):
        raise ValueError(f"flavor must be 'unbiased' or 'mle', got {flavor!r}")
    x = design.train_x
    y = check_vector(y, "y", size=design.n)
    factor = _kernel_factor(x, design.lengthscale)
    ki_x = cho_solve(factor, x)
    m_mat = x.T @ ki_x
    try:
        m_factor = cho_factor(0.5 * (m_mat + m_mat.T), lower=True)
    except LinAlgError as exc:
        raise RankDeficientFeatures("feature matrix does not have full column rank") from exc
    beta = cho_solve(m_factor, ki_x.T @ y)
    resid = y - x @ beta
    quad = float(resid @ cho_solve(factor, resid))
    if quad <= _DEGENERATE_REL_TOL * float(y @ y):
        raise DegenerateObservation("zero kernel-weighted residual; outputs are exactly linear")
    divisor = design.n if flavor == "mle" else design.n - design.p
    return GpParams(beta=beta, sigma_y=float(np.sqrt(quad / divisor)))


def conditional_normal(design: GpDesign, y, params: GpParams):
    """Mean and covariance of the outputs at the prediction rows given ``y``.

    Used both as the plug-in predictive (with fitted parameters) and as the
    true-parameter oracle inside the risk engine.
    """
    y = check_vector(y, "y", size=design.n)
    if params.beta.shape[0] != design.p:
        raise DimensionMismatch(f"beta has length {params.beta.shape[0]}, design has p = {design.p}")
    factor = _kernel_factor(design.train_x, design.lengthscale)
    k_star = rbf_kernel(design.pred_x, design.train_x, design.lengthscale)
    k_pred = rbf_kernel(design.pred_x, design.pred_x, design.lengthscale)
    resid = y - design.train_x @ params.beta
    mean = design.pred_x @ params.beta + k_star @ cho_solve(factor, resid)
    cov = k_pred - k_star @ cho_solve(factor, k_star.T)
    cov = params.sigma_y ** 2 * 0.5 * (cov + cov.T)
    return mean, cov


def entropy_improvement(design: GpDesign, n_obs: int) -> float:
    """Drop in oracle predictive entropy after ``n_obs`` observations.

    Half the log-determinant ratio of the prior and conditioned kernel
    Schur complements at the prediction rows.  The amplitude cancels, so
    the value is the same for every (beta, sigma_y); it is 0 at n_obs = 0
    and nondecreasing in n_obs.
    """
    if design.m < 1:
        raise ValueError("design must contain at least one prediction row")
    k_pred = rbf_kernel(design.pred_x, design.pred_x, design.lengthscale)
    if n_obs == 0:
        return 0.0
    sub = design.subset(n_obs)
    factor = _kernel_factor(sub.train_x, sub.lengthscale)
    k_star = rbf_kernel(sub.pred_x, sub.train_x, sub.lengthscale)
    schur = k_pred - k_star @ cho_solve(factor, k_star.T)
    sign0, logdet0 = np.linalg.slogdet(k_pred)
    sign1, logdet1 = np.linalg.slogdet(0.5 * (schur + schur.T))
    if sign0 <= 0 or sign1 <= 0:
        raise SingularKernel("conditioned kernel is numerically singular")
    return 0.5 * float(logdet0 - logdet1)


# ---------------------------------------------------------------------------
# Design-file interface: plain-text table, one row per point.


def load_design(path, lengthscale: float = 1.0, add_constant_feature: bool = True) -> GpDesign:
    """Read a design file: ``role x1 x2 ...`` per line, '#' comments.

    Roles are ``train`` or ``predict``.  With ``add_constant_feature`` a
    leading 1 column is prepended, giving the usual affine spatial mean.
    """
    train, pred = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        role, coords = parts[0].lower(), parts[1:]
        if role not in ("train", "predict"):
            raise ValueError(f"{path}:{lineno}: role must be 'train' or 'predict', got {role!r}")
        try:
            row = [float(c) for c in coords]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric coordinate") from exc
        (train if role == "train" else pred).append(row)
    if not train or not pred:
        raise ValueError(f"{path}: need at least one train and one predict row")
    tx = np.asarray(train)
    px = np.asarray(pred)
    if add_constant_feature:
        tx = np.column_stack([np.ones(len(tx)), tx])
        px = np.column_stack([np.ones(len(px)), px])
    return GpDesign(train_x=tx, pred_x=px, lengthscale=lengthscale)


def save_design(path, train_coords, pred_coords):
    """Write a design file from raw coordinate arrays (no feature columns)."""
    lines = ["# role  x1  x2"]
    for row in np.atleast_2d(train_coords):
        lines.append("train   " + "  ".join(repr(float(c)) for c in row))
    for row in np.atleast_2d(pred_coords):
        lines.append("predict " + "  ".join(repr(float(c)) for c in row))
    Path(path).write_text("\n".join(lines) + "\n")


def default_design_path() -> Path:
    """Path of the frozen default experiment design shipped with the package."""
    return Path(__file__).parent / "data" / "gp_design_default.txt"


# ---------------------------------------------------------------------------
# Estimators.


class GaussianProcessTPredictor(BaseEstimator):
    """GP regressor returning the objective-Bayes multivariate-t predictive.

    Parameters
    ----------
    prior : str, default="right-invariant"
        "right-invariant" (1/sigma; equals independence-Jeffreys here) or
        "jeffreys" (sigma^-(p+1)); the two differ only in degrees of
        freedom and scale divisor.
    lengthscale : float, default=1.0
        Fixed RBF lengthscale over the feature rows.
    """

    def __init__(self, prior: str = "right-invariant", lengthscale: float = 1.0):
        self.prior = prior
        self.lengthscale = lengthscale

    def fit(self, X, y):
        x = check_matrix(X, "X")
        y = check_vector(y, "y", size=x.shape[0])
        if x.shape[0] <= x.shape[1]:
            raise ValueError(f"need n > p, got n = {x.shape[0]}, p = {x.shape[1]}")
        # Fails early on rank-deficient features or outputs in their span.
        gls_fit(GpDesign(x, np.empty((0, x.shape[1])), self.lengthscale), y)
        self.X_ = x
        self.y_ = y
        self.n_features_in_ = x.shape[1]
        return self

    def _design(self, X):
        if not hasattr(self, "X_"):
            raise NotFittedError("predictor must be fitted first")
        return GpDesign(self.X_, check_matrix(X, "X"), self.lengthscale)

    def predict_params(self, X) -> StudentTParams:
        """Multivariate-t predictive parameters at the rows of ``X``."""
        return t_predictive(self._design(X), self.y_, prior=self.prior)

    def predict(self, X, return_std: bool = False):
        params = self.predict_params(X)
        if not return_std:
            return params.loc
        if params.nu <= 2:
            std = np.full(params.dim, np.inf)
        else:
            std = np.sqrt(np.diag(params.scale) * params.nu / (params.nu - 2.0))
        return params.loc, std

    def log_density(self, X, y_star) -> float:
        """Joint log predictive density of ``y_star`` at the rows of ``X``."""
        from .distributions import mvt_logpdf

        params = self.predict_params(X)
        return mvt_logpdf(np.asarray(y_star, dtype=np.float64).ravel(), params)


class GpPluginPredictor(BaseEstimator):
    """Plug-in GP predictive from a GLS point estimate of (beta, sigma_y)."""

    def __init__(self, flavor: str = "unbiased", lengthscale: float = 1.0):
        self.flavor = flavor
        self.lengthscale = lengthscale

    def fit(self, X, y):
        x = check_matrix(X, "X")
        y = check_vector(y, "y", size=x.shape[0])
        design = GpDesign(x, np.empty((0, x.shape[1])), self.lengthscale)
        self.params_ = gls_fit(design, y, flavor=self.flavor)
        self.X_ = x
        self.y_ = y
        self.n_features_in_ = x.shape[1]
        return self

    def predict_params(self, X):
        """(mean, covariance) of the plug-in conditional normal at ``X``."""
        if not hasattr(self, "params_"):
            raise NotFittedError("predictor must be fitted first")
        design = GpDesign(self.X_, check_matrix(X, "X"), self.lengthscale)
        return conditional_normal(design, self.y_, self.params_)

    def predict(self, X, return_std: bool = False):
        mean, cov = self.predict_params(X)
        if not return_std:
            return mean
        return mean, np.sqrt(np.diag(cov))

    def log_density(self, X, y_star) -> float:
        from .distributions import mvn_logpdf_batch

        mean, cov = self.predict_params(X)
        y_star = np.asarray(y_star, dtype=np.float64).ravel()
        return float(mvn_logpdf_batch(y_star[None, :], mean[None, :], cov[None, :, :])[0])
