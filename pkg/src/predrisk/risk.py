"""Reproducible, shardable Monte Carlo estimation of predictive risk.

The risk of a predictive procedure q at true parameters theta* is

    E[ log p(y* | y_1:n, theta*) - log q(y*; y_1:n) ]

over (y_1:n, y*) drawn jointly from the model at theta*; it equals the
expected Kullback-Leibler divergence from the true conditional to q.

Determinism contract
--------------------
Sample i consumes exactly the normal draws with absolute indices
[i*k, (i+1)*k) of the stream keyed by the spec seed (k is the fixed
per-sample draw count), i.e. a per-sample substream keyed by the global
sample index.  Terms are reduced in fixed-size batches (``BATCH_SIZE`` is
an algorithmic constant), and batch partials are combined with exact
summation in batch order.  Shards therefore only decide which worker
computes which batch: the estimate is bit-identical for any shard count.

Draws depend only on (seed, sample index, model, n); they do not depend on
the predictor, so all predictors scored within one run share common random
numbers.  Reported standard errors are per-cell.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import mvn
from .distributions import MvnParams, batch_sample_stats, mvn_logpdf, mvn_logpdf_batch
from .exceptions import InvalidSpec, SingularKernel, TooManyUndefined
from .gp import GpDesign, GpParams, build_a_matrix, conditional_normal, rbf_kernel
from .rng import RandomStream
from .validation import check_vector

ORACLE = "oracle"

GP_KINDS = ("right-invariant", "jeffreys", "plugin-unbiased", "plugin-mle")

# Fixed reduction granularity; part of the determinism contract.
BATCH_SIZE = 1 << 16

# A degenerate sample is measure-zero; more than this fraction means a bug.
MAX_UNDEFINED_FRACTION = 1e-6


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo mean (nats), its standard error, and sample accounting."""

    mean: float
    std_err: float
    n_samples: int
    n_undefined: int = 0


@dataclass(frozen=True)
class MvnExperiment:
    """I.i.d. multivariate-normal model at fixed true parameters."""

    params: MvnParams

    @property
    def d(self) -> int:
        return self.params.d


@dataclass(frozen=True)
class GpExperiment:
    """GP model: joint normal over the design outputs at fixed parameters."""

    design: GpDesign
    params: GpParams

    def __post_init__(self):
        if self.params.beta.shape[0] != self.design.p:
            raise InvalidSpec(
                f"beta has length {self.params.beta.shape[0]}, design has p = {self.design.p}")


@dataclass(frozen=True)
class ExperimentSpec:
    """One risk-estimation cell: model, predictor, sizes, seed and sharding."""

    model: object
    predictor: str
    n_obs: int
    n_samples: int
    seed: int
    n_pred: int = 1
    shards: int = 1

    def validate(self):
        if self.n_samples < 2:
            raise InvalidSpec("n_samples must be at least 2")
        if self.shards < 1:
            raise InvalidSpec("shards must be at least 1")
        if self.n_samples % self.shards != 0:
            raise InvalidSpec(
                f"n_samples ({self.n_samples}) must be divisible by shards ({self.shards})")
        if isinstance(self.model, MvnExperiment):
            if self.n_pred != 1:
                raise InvalidSpec("the normal-family predictors are next-sample only (n_pred = 1)")
            if self.predictor != ORACLE:
                try:
                    mvn.check_kind(self.predictor)
                except ValueError as exc:
                    raise InvalidSpec(str(exc)) from exc
                if (self.predictor in (mvn.RIGHT_INVARIANT, mvn.RIGHT_INVARIANT_SWAPPED)
                        and self.model.d != 2):
                    raise InvalidSpec(
                        f"{self.predictor} is bivariate only, model has d = {self.model.d}")
                # the engine needs an almost-surely nonsingular scatter, so
                # every kind (plug-ins included) requires n > d here
                if (not mvn.kind_well_defined(self.predictor, self.n_obs, self.model.d)
                        or self.n_obs <= self.model.d):
                    raise InvalidSpec(
                        f"{self.predictor} risk is undefined for n = {self.n_obs}, "
                        f"d = {self.model.d}")
        elif isinstance(self.model, GpExperiment):
            design = self.model.design
            if not 1 <= self.n_obs <= design.n:
                raise InvalidSpec(f"n_obs must be in [1, {design.n}], got {self.n_obs}")
            if self.n_pred != design.m:
                raise InvalidSpec(
                    f"n_pred ({self.n_pred}) must equal the design's prediction count ({design.m})")
            if self.predictor != ORACLE:
                if self.predictor not in GP_KINDS:
                    raise InvalidSpec(
                        f"unknown GP predictor {self.predictor!r}; expected one of {GP_KINDS}")
                if self.n_obs <= design.p:
                    raise InvalidSpec(
                        f"GP predictors need n_obs > p = {design.p}, got {self.n_obs}")
        else:
            raise InvalidSpec(f"unknown model type {type(self.model).__name__}")


# ---------------------------------------------------------------------------
# Batch scoring.


def _mvn_scorers(model: MvnExperiment, predictors, custom):
    """Map predictor name -> scorer(n, obs, mean, scatter, xstar) or None (oracle)."""
    scorers = {}
    for name in predictors:
        if custom is not None and name in custom:
            scorers[name] = custom[name]
        elif name == ORACLE:
            scorers[name] = None
        else:
            mvn.check_kind(name)
            scorers[name] = _make_mvn_kind_scorer(name)
    return scorers


def _make_mvn_kind_scorer(kind):
    def scorer(n, obs, mean, scatter, xstar):
        return mvn.predictive_logdensity_from_stats(kind, n, mean, scatter, xstar)
    return scorer


def _run_mvn(model: MvnExperiment, predictors, n_obs, n_samples, seed, shards, custom=None):
    d = model.d
    n = n_obs
    k = (n + 1) * d
    mu = model.params.mu
    ut = model.params.U.T
    stream = RandomStream(seed)
    scorers = _mvn_scorers(model, predictors, custom)
    log_norm_const = -0.5 * d * np.log(2.0 * np.pi) - np.sum(np.log(np.diag(model.params.U)))

    def batch(lo, hi):
        z = stream.normals(((hi - lo), n + 1, d), offset=lo * k)
        pts = z @ ut + mu
        obs = pts[:, :n, :]
        xstar = pts[:, n, :]
        # i.i.d. model: the oracle conditional is the marginal at theta*.
        zstar = z[:, n, :]
        lp = log_norm_const - 0.5 * np.einsum("bi,bi->b", zstar, zstar)
        mean, scatter = batch_sample_stats(obs)
        out = {}
        for name, scorer in scorers.items():
            if scorer is None:
                out[name] = np.zeros(hi - lo)
            else:
                out[name] = lp - scorer(n, obs, mean, scatter, xstar)
        return out

    return _reduce(batch, predictors, n_samples, shards)


@dataclass
class _GpContext:
    """Per-spec precomputation shared by every batch."""

    n: int
    m: int
    k: int
    mean_all: np.ndarray
    samp_mat: np.ndarray          # sigma* L, maps z to centered outputs
    lp_const: float
    cond_mat: np.ndarray          # kriging weights K(pred,train) K(train,train)^-1
    mean_resid_const: np.ndarray  # Xs beta* - C Xt beta*
    sci: np.ndarray               # inverse conditional covariance (unit amplitude)
    sigma2: float
    fs: np.ndarray
    ft: np.ndarray
    logdet_sc: float
    t_loc_mat: Optional[np.ndarray] = None
    t_quad: Optional[np.ndarray] = None
    gls_proj: Optional[np.ndarray] = None
    train_quad: Optional[np.ndarray] = None
    app: Optional[np.ndarray] = None
    logdet_app_inv: float = 0.0


def _gp_context(model: GpExperiment, n_obs) -> _GpContext:
    design = model.design.subset(n_obs)
    n, m, p = design.n, design.m, design.p
    x_all = np.vstack([design.train_x, design.pred_x])
    k_all = rbf_kernel(x_all, x_all, design.lengthscale)
    try:
        chol = np.linalg.cholesky(k_all)
    except np.linalg.LinAlgError as exc:
        raise SingularKernel("joint kernel matrix is numerically singular") from exc
    mean_all = x_all @ model.params.beta
    ktt = k_all[:n, :n]
    kst = k_all[n:, :n]
    kss = k_all[n:, n:]
    cond = np.linalg.solve(ktt, kst.T).T
    schur = kss - cond @ kst.T
    schur = 0.5 * (schur + schur.T)
    sign, logdet_sc = np.linalg.slogdet(schur)
    if sign <= 0:
        raise InvalidSpec("conditional covariance is numerically singular")
    ctx = _GpContext(
        n=n, m=m, k=n + m,
        mean_all=mean_all,
        samp_mat=model.params.sigma_y * chol,
        lp_const=(-0.5 * m * np.log(2.0 * np.pi) - m * np.log(model.params.sigma_y)
                  - 0.5 * logdet_sc),
        cond_mat=cond,
        mean_resid_const=(design.pred_x - cond @ design.train_x) @ model.params.beta,
        sci=np.linalg.inv(schur),
        sigma2=model.params.sigma_y ** 2,
        fs=design.pred_x,
        ft=design.train_x,
        logdet_sc=logdet_sc,
    )
    if n > p:
        a = build_a_matrix(design)
        app_inv = np.linalg.inv(a.pp)
        app_inv = 0.5 * (app_inv + app_inv.T)
        ctx.app = 0.5 * (a.pp + a.pp.T)
        ctx.logdet_app_inv = np.linalg.slogdet(app_inv)[1]
        quad = a.oo - a.op @ app_inv @ a.po
        ctx.t_loc_mat = -app_inv @ a.po
        ctx.t_quad = 0.5 * (quad + quad.T)
        kti_x = np.linalg.solve(ktt, design.train_x)
        m_mat = design.train_x.T @ kti_x
        ctx.gls_proj = np.linalg.solve(0.5 * (m_mat + m_mat.T), kti_x.T)
        at = np.linalg.inv(ktt) - kti_x @ np.linalg.solve(0.5 * (m_mat + m_mat.T), kti_x.T)
        ctx.train_quad = 0.5 * (at + at.T)
    return ctx


def _gp_terms(ctx: _GpContext, predictor, y, ystar, lp):
    n, m = ctx.n, ctx.m
    p = ctx.ft.shape[1]
    if predictor == ORACLE:
        return np.zeros(len(y))
    if predictor in ("right-invariant", "jeffreys"):
        nu = n - p if predictor == "right-invariant" else n
        loc = y @ ctx.t_loc_mat.T
        qf = np.einsum("bi,ij,bj->b", y, ctx.t_quad, y)
        qf = np.where(qf > 0.0, qf, np.nan)
        diff = ystar - loc
        dquad = np.einsum("bi,ij,bj->b", diff, ctx.app, diff)
        logdet_scale = m * np.log(qf / nu) + ctx.logdet_app_inv
        lq = (gammaln(0.5 * (nu + m)) - gammaln(0.5 * nu)
              - 0.5 * m * (np.log(nu) + np.log(np.pi))
              - 0.5 * logdet_scale
              - 0.5 * (nu + m) * np.log1p(dquad / qf))
        return lp - lq
    # plug-in kinds
    divisor = n if predictor == "plugin-mle" else n - p
    beta_hat = y @ ctx.gls_proj.T
    sigma2_hat = np.einsum("bi,ij,bj->b", y, ctx.train_quad, y) / divisor
    sigma2_hat = np.where(sigma2_hat > 0.0, sigma2_hat, np.nan)
    mean = beta_hat @ ctx.fs.T + (y - beta_hat @ ctx.ft.T) @ ctx.cond_mat.T
    diff = ystar - mean
    dquad = np.einsum("bi,ij,bj->b", diff, ctx.sci, diff) / sigma2_hat
    lq = (-0.5 * m * np.log(2.0 * np.pi) - 0.5 * m * np.log(sigma2_hat)
          - 0.5 * ctx.logdet_sc - 0.5 * dquad)
    return lp - lq


def _run_gp(model: GpExperiment, predictors, n_obs, n_samples, seed, shards):
    ctx = _gp_context(model, n_obs)
    stream = RandomStream(seed)
    n, m, k = ctx.n, ctx.m, ctx.k

    def batch(lo, hi):
        z = stream.normals((hi - lo, k), offset=lo * k)
        w = ctx.mean_all + z @ ctx.samp_mat.T
        y = w[:, :n]
        ystar = w[:, n:]
        cmean = ctx.mean_resid_const + y @ ctx.cond_mat.T
        diff = ystar - cmean
        lp = ctx.lp_const - 0.5 * np.einsum("bi,ij,bj->b", diff, ctx.sci, diff) / ctx.sigma2
        return {name: _gp_terms(ctx, name, y, ystar, lp) for name in predictors}

    return _reduce(batch, predictors, n_samples, shards)


# ---------------------------------------------------------------------------
# Batch orchestration.


def _reduce(batch_fn, names, n_samples, shards):
    """Run batches (possibly threaded by shard) and reduce in batch order."""
    n_batches = (n_samples + BATCH_SIZE - 1) // BATCH_SIZE
    bounds = [(j * BATCH_SIZE, min((j + 1) * BATCH_SIZE, n_samples)) for j in range(n_batches)]

    def run_range(idx):
        rows = []
        for j in idx:
            lo, hi = bounds[j]
            terms = batch_fn(lo, hi)
            row = {}
            for name in names:
                t = terms[name]
                ok = np.isfinite(t)
                bad = int(len(t) - ok.sum())
                tv = t[ok] if bad else t
                row[name] = (float(tv.sum()), float((tv * tv).sum()), bad, len(t))
            rows.append((j, row))
        return rows

    if shards == 1 or n_batches == 1:
        collected = run_range(range(n_batches))
    else:
        chunks = np.array_split(np.arange(n_batches), shards)
        with ThreadPoolExecutor(max_workers=min(shards, 16)) as pool:
            futures = [pool.submit(run_range, chunk) for chunk in chunks if len(chunk)]
            collected = [row for f in futures for row in f.result()]
    collected.sort(key=lambda item: item[0])

    out = {}
    for name in names:
        sums = [row[name][0] for _, row in collected]
        sqs = [row[name][1] for _, row in collected]
        bad = sum(row[name][2] for _, row in collected)
        total = sum(row[name][3] for _, row in collected)
        if bad / total >= MAX_UNDEFINED_FRACTION:
            raise TooManyUndefined(
                f"{name}: {bad} of {total} samples degenerate; above the "
                f"{MAX_UNDEFINED_FRACTION:g} tolerance, which indicates a bug")
        n_eff = total - bad
        s = math.fsum(sums)
        s2 = math.fsum(sqs)
        mean = s / n_eff
        var = max((s2 - n_eff * mean * mean) / (n_eff - 1), 0.0)
        out[name] = RiskEstimate(mean=mean, std_err=math.sqrt(var / n_eff),
                                 n_samples=n_eff, n_undefined=bad)
    return out


# ---------------------------------------------------------------------------
# Public entry points.


def estimate_risk(spec: ExperimentSpec, scorer: Optional[Callable] = None) -> RiskEstimate:
    """Monte Carlo estimate of the predictive risk for one cell.

    ``scorer`` optionally replaces the named predictor's batched scorer
    (MVN models only); it receives ``(n, obs, mean, scatter, xstar)`` and
    returns per-sample log predictive densities.  This is an experiment
    hook, e.g. for deliberately non-invariant baselines.
    """
    spec.validate()
    custom = {spec.predictor: scorer} if scorer is not None else None
    if isinstance(spec.model, MvnExperiment):
        res = _run_mvn(spec.model, [spec.predictor], spec.n_obs, spec.n_samples,
                       spec.seed, spec.shards, custom)
    else:
        if scorer is not None:
            raise InvalidSpec("custom scorers are supported for MVN models only")
        res = _run_gp(spec.model, [spec.predictor], spec.n_obs, spec.n_samples,
                      spec.seed, spec.shards)
    return res[spec.predictor]


def estimate_risk_table(model, predictors, n_values, n_samples, seed, shards=1):
    """Risk estimates for a predictor x n grid.

    All predictors within one (n, seed) cell share common random numbers;
    each cell equals exactly what ``estimate_risk`` returns for the same
    spec.  Cells whose n-threshold fails are returned as None (the table
    writer renders them as "undefined"); unknown predictor names raise.
    """
    for name in predictors:
        if name == ORACLE:
            continue
        if isinstance(model, MvnExperiment):
            try:
                mvn.check_kind(name)
            except ValueError as exc:
                raise InvalidSpec(str(exc)) from exc
            if name in (mvn.RIGHT_INVARIANT, mvn.RIGHT_INVARIANT_SWAPPED) and model.d != 2:
                raise InvalidSpec(f"{name} is bivariate only, model has d = {model.d}")
        elif name not in GP_KINDS:
            raise InvalidSpec(f"unknown GP predictor {name!r}; expected one of {GP_KINDS}")

    def cell_defined(name, n_obs):
        if name == ORACLE:
            return True
        if isinstance(model, MvnExperiment):
            return mvn.kind_well_defined(name, n_obs, model.d) and n_obs > model.d
        return model.design.p < n_obs <= model.design.n

    out = {}
    for n_obs in n_values:
        defined = [name for name in predictors if cell_defined(name, n_obs)]
        for name in predictors:
            if name not in defined:
                out[(name, n_obs)] = None
        if not defined:
            continue
        if isinstance(model, MvnExperiment):
            res = _run_mvn(model, defined, n_obs, n_samples, seed, shards)
        else:
            res = _run_gp(model, defined, n_obs, n_samples, seed, shards)
        for name in defined:
            out[(name, n_obs)] = res[name]
    return out


@dataclass(frozen=True)
class ConstancyRow:
    label: str
    estimate: RiskEstimate


@dataclass(frozen=True)
class ConstancyReport:
    """Pairwise comparison of risk estimates across true-parameter settings."""

    rows: tuple
    flagged: tuple

    @property
    def any_flagged(self) -> bool:
        return len(self.flagged) > 0


def risk_constancy_report(spec_base: ExperimentSpec, theta_alternatives,
                          alt_seeds=None, scorer=None) -> ConstancyReport:
    """Estimate the risk at the base theta* and at each alternative.

    Each alternative runs with its own seed (``spec_base.seed + i + 1``
    unless ``alt_seeds`` is given).  Any pair of estimates whose means
    differ by more than 3 combined standard errors is flagged; for an
    invariant predictor the risk is constant in theta*, so flags indicate
    either a non-invariant predictor or a bug.
    """
    spec_base.validate()
    if not isinstance(spec_base.model, MvnExperiment):
        raise InvalidSpec("constancy reports are implemented for MVN models")
    if alt_seeds is None:
        alt_seeds = [spec_base.seed + i + 1 for i in range(len(theta_alternatives))]
    if len(alt_seeds) != len(theta_alternatives):
        raise InvalidSpec("alt_seeds must match theta_alternatives in length")
    rows = [ConstancyRow("base", estimate_risk(spec_base, scorer=scorer))]
    for i, (theta, seed) in enumerate(zip(theta_alternatives, alt_seeds)):
        spec = ExperimentSpec(model=MvnExperiment(theta), predictor=spec_base.predictor,
                              n_obs=spec_base.n_obs, n_samples=spec_base.n_samples,
                              seed=seed, n_pred=spec_base.n_pred, shards=spec_base.shards)
        rows.append(ConstancyRow(f"alt{i}", estimate_risk(spec, scorer=scorer)))
    flagged = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            a, b = rows[i].estimate, rows[j].estimate
            gap = abs(a.mean - b.mean)
            band = 3.0 * math.sqrt(a.std_err ** 2 + b.std_err ** 2)
            if gap > band:
                flagged.append((rows[i].label, rows[j].label, gap, band))
    return ConstancyReport(rows=tuple(rows), flagged=tuple(flagged))


def oracle_logscore(model, y, y_star) -> float:
    """Log density of future outputs under the true-parameter conditional.

    For the i.i.d. normal model this is the marginal at theta* (independent
    of the conditioning data); for the GP it is the conditional normal at
    the design's prediction rows given ``y`` at the first len(y) training
    rows.
    """
    if isinstance(model, MvnExperiment):
        return mvn_logpdf(np.asarray(y_star, dtype=np.float64).ravel(), model.params)
    if isinstance(model, GpExperiment):
        y = check_vector(y, "y")
        design = model.design.subset(len(y))
        mean, cov = conditional_normal(design, y, model.params)
        ys = np.asarray(y_star, dtype=np.float64).ravel()
        return float(mvn_logpdf_batch(ys[None, :], mean[None, :], cov[None, :, :])[0])
    raise InvalidSpec(f"unknown model type {type(model).__name__}")
