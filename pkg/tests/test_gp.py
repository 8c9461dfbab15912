import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from predrisk.distributions import mvt_logpdf
from predrisk.exceptions import (
    DegenerateObservation,
    RankDeficientFeatures,
    SingularKernel,
)
from predrisk.gp import (
    projector_matrix,
    GaussianProcessTPredictor,
    GpDesign,
    GpParams,
    GpPluginPredictor,
    build_a_matrix,
    conditional_normal,
    default_design_path,
    entropy_improvement,
    gls_fit,
    load_design,
    rbf_kernel,
    save_design,
    t_predictive,
)

from oracles import (
    dense_mvn_logpdf,
    gp_predictive_logdensity_quadrature,
    joint_conditioning,
    naive_rbf,
)


def spatial_design(seed=1, n=6, m=1, lengthscale=1.0, min_dist=0.15):
    rng = np.random.default_rng(seed)
    while True:
        pts = rng.uniform(size=(n + m, 2))
        gaps = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        gaps[np.diag_indices(n + m)] = np.inf
        if gaps.min() >= min_dist:
            break
    feats = np.column_stack([np.ones(n + m), pts])
    return GpDesign(feats[:n], feats[n:], lengthscale), rng


class TestRbfKernel:
    def test_zero_distance(self):
        x = np.array([[0.3, 0.7]])
        np.testing.assert_array_equal(rbf_kernel(x, x, 1.0), [[1.0]])

    def test_distance_sqrt_two_lengthscales(self):
        ls = 0.8
        x1 = np.array([[0.0, 0.0]])
        x2 = np.array([[ls * np.sqrt(2.0), 0.0]])
        assert rbf_kernel(x1, x2, ls)[0, 0] == pytest.approx(np.exp(-1.0), rel=1e-14)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 2))
        np.testing.assert_allclose(rbf_kernel(x, x, 0.7), naive_rbf(x, x, 0.7), atol=1e-14)

    def test_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 3))
        k = rbf_kernel(x, x, 1.2)
        np.testing.assert_allclose(k, k.T, atol=1e-15)
        np.testing.assert_allclose(np.diag(k), 1.0, atol=1e-15)

    def test_positive_lengthscale_required(self):
        with pytest.raises(ValueError):
            rbf_kernel(np.zeros((1, 1)), np.zeros((1, 1)), 0.0)


class TestAMatrix:
    def test_centering_projector_case(self):
        # identity kernel with a single all-ones feature column gives the
        # centering projector I - 11^T/3
        a = projector_matrix(np.eye(3), np.ones((3, 1)))
        np.testing.assert_allclose(a, np.eye(3) - np.ones((3, 3)) / 3.0, atol=1e-14)

    def test_far_apart_design_approaches_identity_kernel(self):
        # distant rows underflow the kernel off-diagonals to exactly zero, so
        # the design-level matrix matches the identity-kernel formula
        feats = np.array([[1.0, 0.0], [1.0, 1e3], [1.0, 2e3]])
        design = GpDesign(feats[:2], feats[2:], 1.0)
        a = build_a_matrix(design)
        np.testing.assert_allclose(a.full, projector_matrix(np.eye(3), feats), atol=1e-12)

    def test_annihilates_features(self):
        design, _ = spatial_design(4, n=5, m=2)
        a = build_a_matrix(design)
        x_all = np.vstack([design.train_x, design.pred_x])
        assert np.abs(a.full @ x_all).max() < 1e-8

    def test_psd_and_symmetric(self):
        design, _ = spatial_design(5, n=6, m=1)
        a = build_a_matrix(design)
        np.testing.assert_allclose(a.full, a.full.T, atol=1e-12)
        evals = np.linalg.eigvalsh(a.full)
        assert evals.min() > -1e-9
        assert np.linalg.eigvalsh(a.pp).min() > 0

    def test_matches_symmetric_square_root_form(self):
        design, _ = spatial_design(6, n=4, m=2)
        a = build_a_matrix(design)
        x_all = np.vstack([design.train_x, design.pred_x])
        k = rbf_kernel(x_all, x_all, design.lengthscale)
        evals, evecs = np.linalg.eigh(k)
        k_isqrt = evecs @ np.diag(evals**-0.5) @ evecs.T
        z = k_isqrt @ x_all
        proj = np.eye(len(x_all)) - z @ np.linalg.inv(z.T @ z) @ z.T
        alt = k_isqrt @ proj @ k_isqrt
        np.testing.assert_allclose(a.full, alt, atol=1e-8)

    def test_pp_schur_equals_train_only_matrix(self):
        # marginalization consistency between the joint and train-only forms
        design, _ = spatial_design(7, n=6, m=2)
        a = build_a_matrix(design)
        train_only = build_a_matrix(GpDesign(design.train_x,
                                             np.empty((0, 3)), design.lengthscale))
        schur = a.oo - a.op @ np.linalg.solve(a.pp, a.po)
        np.testing.assert_allclose(schur, train_only.full, atol=1e-9)

    def test_rank_deficient_features(self):
        # collinear coordinates with (1, x1, x2) features drop the rank to 2
        x = np.linspace(0.0, 1.0, 5)
        feats = np.column_stack([np.ones(5), x, 2.0 * x])
        with pytest.raises(RankDeficientFeatures):
            build_a_matrix(GpDesign(feats[:4], feats[4:], 1.0))

    def test_duplicate_rows_rejected(self):
        feats = np.array([[1.0, 0.2, 0.3], [1.0, 0.2, 0.3], [1.0, 0.5, 0.1]])
        with pytest.raises(SingularKernel):
            GpDesign(feats[:2], feats[2:], 1.0)


class TestTPredictive:
    def test_symmetric_design_weights(self):
        # mirror-symmetric training pairs with equal outputs: the location
        # weighs each pair equally, and matches the dense universal-kriging
        # formula evaluated independently
        coords = np.array([-1.0, 1.0, -2.0, 2.0])
        feats = np.column_stack([np.ones(4), coords])
        design = GpDesign(feats, np.array([[1.0, 0.0]]), 1.0)
        y = np.array([0.7, 0.7, -0.2, -0.2])
        params = t_predictive(design, y)
        # weight vector from the A blocks must be mirror symmetric
        a = build_a_matrix(design)
        w = -np.linalg.solve(a.pp, a.po)[0]
        assert w[0] == pytest.approx(w[1], abs=1e-12)
        assert w[2] == pytest.approx(w[3], abs=1e-12)
        # dense universal-kriging value
        ktt = rbf_kernel(feats, feats, 1.0)
        kst = rbf_kernel(design.pred_x, feats, 1.0)
        kti = np.linalg.inv(ktt)
        beta = np.linalg.solve(feats.T @ kti @ feats, feats.T @ kti @ y)
        uk = design.pred_x @ beta + kst @ kti @ (y - feats @ beta)
        assert params.loc[0] == pytest.approx(uk[0], abs=1e-10)

    def test_matches_sigma_quadrature_oracle(self):
        design, rng = spatial_design(8, n=6, m=1)
        y = rng.normal(size=6) + design.train_x @ np.array([0.5, -1.0, 2.0])
        params = t_predictive(design, y)
        for shift in (0.0, 0.8, -1.5):
            ystar = params.loc + shift
            closed = mvt_logpdf(ystar, params)
            oracle = gp_predictive_logdensity_quadrature(
                design.train_x, y, design.pred_x, ystar, design.lengthscale)
            assert abs(np.expm1(closed - oracle)) < 1e-3

    def test_jeffreys_same_location_dof_gap(self):
        design, rng = spatial_design(9, n=7, m=1)
        y = rng.normal(size=7)
        ri = t_predictive(design, y, prior="right-invariant")
        j = t_predictive(design, y, prior="jeffreys")
        np.testing.assert_allclose(ri.loc, j.loc, atol=1e-12)
        assert j.nu - ri.nu == design.p
        # same scale up to the dof divisor
        np.testing.assert_allclose(j.scale * j.nu, ri.scale * ri.nu, atol=1e-12)

    def test_density_integrates_to_one(self):
        from numpy.polynomial.legendre import leggauss

        design, rng = spatial_design(10, n=6, m=1)
        y = rng.normal(size=6)
        params = t_predictive(design, y)
        t, w = leggauss(800)
        halfwidth = 80.0 * np.sqrt(params.scale[0, 0])
        xs = params.loc[0] + halfwidth * t
        vals = np.array([np.exp(mvt_logpdf(np.array([x]), params)) for x in xs])
        assert (vals * w).sum() * halfwidth == pytest.approx(1.0, abs=1e-3)

    def test_degenerate_outputs(self):
        design, _ = spatial_design(11, n=6, m=1)
        y = design.train_x @ np.array([1.0, 2.0, -0.5])
        with pytest.raises(DegenerateObservation):
            t_predictive(design, y)

    def test_needs_more_points_than_features(self):
        design, rng = spatial_design(12, n=3, m=1)
        with pytest.raises(ValueError):
            t_predictive(design, rng.normal(size=3))


class TestGls:
    def test_exact_linear_outputs_degenerate(self):
        design, _ = spatial_design(13, n=6, m=1)
        y = design.train_x @ np.array([0.3, 1.0, -2.0])
        with pytest.raises(DegenerateObservation):
            gls_fit(design, y)

    def test_identity_kernel_reduces_to_ols(self):
        # far-apart points: kernel is numerically the identity
        rng = np.random.default_rng(14)
        coords = np.arange(6.0)[:, None] * 1e3
        feats = np.column_stack([np.ones(6), coords])
        design = GpDesign(feats, np.array([[1.0, 9e3]]), 1.0)
        y = rng.normal(size=6)
        fit = gls_fit(design, y, flavor="mle")
        beta_ols = np.linalg.solve(feats.T @ feats, feats.T @ y)
        np.testing.assert_allclose(fit.beta, beta_ols, atol=1e-10)
        resid = y - feats @ beta_ols
        assert fit.sigma_y == pytest.approx(np.sqrt(resid @ resid / 6.0), rel=1e-10)

    def test_divisor_relation(self):
        design, rng = spatial_design(15, n=7, m=1)
        y = rng.normal(size=7)
        mle = gls_fit(design, y, flavor="mle")
        unb = gls_fit(design, y, flavor="unbiased")
        np.testing.assert_allclose(unb.beta, mle.beta, atol=1e-14)
        assert unb.sigma_y**2 == pytest.approx(mle.sigma_y**2 * 7.0 / (7.0 - 3.0), rel=1e-12)

    def test_flavor_validation(self):
        design, rng = spatial_design(16, n=5, m=1)
        with pytest.raises(ValueError):
            gls_fit(design, rng.normal(size=5), flavor="other")


class TestConditionalNormal:
    def test_matches_joint_conditioning_oracle(self):
        design, rng = spatial_design(17, n=6, m=2)
        params = GpParams(rng.normal(size=3), 1.3)
        y = rng.normal(size=6)
        mean, cov = conditional_normal(design, y, params)
        x_all = np.vstack([design.train_x, design.pred_x])
        k_all = rbf_kernel(x_all, x_all, design.lengthscale)
        oracle_mean, oracle_cov = joint_conditioning(
            x_all @ params.beta, params.sigma_y**2 * k_all, 6, y)
        np.testing.assert_allclose(mean, oracle_mean, atol=1e-9)
        np.testing.assert_allclose(cov, oracle_cov, atol=1e-9)

    def test_zero_parameters(self):
        design, _ = spatial_design(18, n=5, m=1)
        params = GpParams(np.zeros(3), 2.0)
        mean, cov = conditional_normal(design, np.zeros(5), params)
        np.testing.assert_allclose(mean, np.zeros(1), atol=1e-15)
        ktt = rbf_kernel(design.train_x, design.train_x, 1.0)
        kst = rbf_kernel(design.pred_x, design.train_x, 1.0)
        kss = rbf_kernel(design.pred_x, design.pred_x, 1.0)
        schur = kss - kst @ np.linalg.solve(ktt, kst.T)
        np.testing.assert_allclose(cov, 4.0 * schur, atol=1e-12)

    def test_variance_shrinks_approaching_training_point(self):
        rng = np.random.default_rng(19)
        base = np.array([[1.0, 0.3, 0.4], [1.0, 0.8, 0.9], [1.0, 0.1, 0.8]])
        y = rng.normal(size=3)
        params = GpParams(np.zeros(3), 1.0)
        variances = []
        for eps in (0.4, 0.2, 0.1, 0.05, 0.025):
            pred = np.array([[1.0, 0.3 + eps, 0.4]])
            design = GpDesign(base, pred, 1.0)
            _, cov = conditional_normal(design, y, params)
            variances.append(cov[0, 0])
        assert all(a > b for a, b in zip(variances, variances[1:]))
        assert variances[-1] < 1e-3


class TestEntropyImprovement:
    def test_zero_observations(self):
        design = load_design(default_design_path())
        assert entropy_improvement(design, 0) == 0.0

    def test_parameter_independence_via_oracle_entropies(self):
        # recompute the improvement from two full entropy evaluations under
        # different (beta, sigma) settings; they must agree to 1e-12
        design = load_design(default_design_path())
        m = design.m

        def oracle_entropy(n_obs, params):
            if n_obs == 0:
                cov = params.sigma_y**2 * rbf_kernel(design.pred_x, design.pred_x,
                                                     design.lengthscale)
            else:
                sub = design.subset(n_obs)
                y = np.linspace(0.0, 1.0, n_obs)  # entropy ignores the data values
                _, cov = conditional_normal(sub, y, params)
            return 0.5 * (m * (1 + np.log(2 * np.pi)) + np.linalg.slogdet(cov)[1])

        p1 = GpParams(np.zeros(3), 1.0)
        p2 = GpParams(np.array([5.0, -2.0, 1.0]), 17.0)
        for n_obs in range(0, design.n + 1):
            d1 = oracle_entropy(0, p1) - oracle_entropy(n_obs, p1)
            d2 = oracle_entropy(0, p2) - oracle_entropy(n_obs, p2)
            assert d1 == pytest.approx(d2, abs=1e-12)
            assert entropy_improvement(design, n_obs) == pytest.approx(d1, abs=1e-12)

    def test_monotone_in_observations(self):
        for seed in range(10):
            design, _ = spatial_design(seed + 40, n=8, m=1, min_dist=0.1)
            values = [entropy_improvement(design, k) for k in range(9)]
            assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


class TestDesignIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(20)
        train = rng.uniform(size=(5, 2))
        pred = rng.uniform(size=(2, 2))
        path = tmp_path / "design.txt"
        save_design(path, train, pred)
        design = load_design(path, lengthscale=0.9)
        assert design.lengthscale == 0.9
        np.testing.assert_allclose(design.train_x[:, 1:], train, atol=1e-15)
        np.testing.assert_allclose(design.pred_x[:, 1:], pred, atol=1e-15)
        np.testing.assert_array_equal(design.train_x[:, 0], np.ones(5))

    def test_frozen_default_design(self):
        design = load_design(default_design_path())
        assert (design.n, design.m, design.p) == (10, 1, 3)
        assert np.all(design.train_x[:, 1:] > 0) and np.all(design.train_x[:, 1:] < 1)

    def test_bad_role_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("train 0.1 0.2\nvalidate 0.3 0.4\n")
        with pytest.raises(ValueError):
            load_design(path)


class TestEstimators:
    def test_t_predictor_flow(self):
        design, rng = spatial_design(21, n=7, m=1)
        y = rng.normal(size=7)
        est = GaussianProcessTPredictor(prior="right-invariant", lengthscale=1.0)
        est.fit(design.train_x, y)
        params = est.predict_params(design.pred_x)
        direct = t_predictive(design, y)
        np.testing.assert_allclose(params.loc, direct.loc, atol=1e-12)
        np.testing.assert_allclose(params.scale, direct.scale, atol=1e-12)
        mean, std = est.predict(design.pred_x, return_std=True)
        np.testing.assert_allclose(mean, direct.loc, atol=1e-12)
        assert std[0] > np.sqrt(direct.scale[0, 0])  # t inflation over the scale
        assert est.log_density(design.pred_x, direct.loc) == pytest.approx(
            mvt_logpdf(direct.loc, direct), abs=1e-12)

    def test_plugin_predictor_flow(self):
        design, rng = spatial_design(22, n=7, m=1)
        y = rng.normal(size=7)
        est = GpPluginPredictor(flavor="unbiased", lengthscale=1.0).fit(design.train_x, y)
        mean, cov = est.predict_params(design.pred_x)
        fit = gls_fit(design, y, flavor="unbiased")
        oracle_mean, oracle_cov = conditional_normal(design, y, fit)
        np.testing.assert_allclose(mean, oracle_mean, atol=1e-12)
        np.testing.assert_allclose(cov, oracle_cov, atol=1e-12)
        assert est.log_density(design.pred_x, mean) == pytest.approx(
            dense_mvn_logpdf(mean, oracle_mean, oracle_cov), abs=1e-10)

    def test_get_params(self):
        est = GaussianProcessTPredictor(prior="jeffreys", lengthscale=0.5)
        assert est.get_params() == {"prior": "jeffreys", "lengthscale": 0.5}

    def test_unfitted(self):
        with pytest.raises(NotFittedError):
            GaussianProcessTPredictor().predict_params(np.zeros((1, 3)))
        with pytest.raises(NotFittedError):
            GpPluginPredictor().predict_params(np.zeros((1, 3)))

    def test_fit_rejects_degenerate(self):
        design, _ = spatial_design(23, n=6, m=1)
        y = design.train_x @ np.array([1.0, -1.0, 0.5])
        with pytest.raises(DegenerateObservation):
            GaussianProcessTPredictor().fit(design.train_x, y)
