import math

import numpy as np
import pytest
from scipy import stats

from cylt.dataset import Dataset
from cylt.exceptions import PreconditionError
from cylt.fit import (
    FREE_PARAMETERS,
    FitOptions,
    FitReport,
    aic,
    fit_ks,
    fit_mle,
    initial_params,
    ks_loglik,
    loglik,
    psi2_objective,
    step_psi1,
    step_psi2,
    step_sigma,
)
from cylt.model import CylinderParams, KSParams, log_pdf
from cylt.sample import SamplerConfig, sample_joint

from conftest import FIG1, FIG2_II

TWO_PI = 2 * math.pi
TRUTH = FIG2_II
FAST = FitOptions(compute_gof=False)


def arc(a, b, period=TWO_PI):
    return abs(math.remainder(a - b, period))


@pytest.fixture(scope="module")
def gt_data():
    return sample_joint(TRUTH, 400, SamplerConfig(seed=21))


@pytest.fixture(scope="module")
def gt_fit(gt_data):
    return fit_mle(gt_data, "GT")


class TestLoglik:
    def test_equals_sum_of_log_pdf(self):
        d = sample_joint(FIG1, 50, SamplerConfig(seed=1))
        ref = float(np.sum(log_pdf(FIG1, d.x, d.theta)))
        assert loglik(FIG1, d) == pytest.approx(ref, abs=1e-10 * d.n)

    def test_single_observation(self):
        d = Dataset([0.3], [1.2])
        assert loglik(FIG2_II, d) == pytest.approx(float(log_pdf(FIG2_II, 0.3, 1.2)), abs=1e-12)

    def test_uniform_circular_part(self):
        p = CylinderParams(alpha=4.0, sigma=1.3, mu=0.5)
        d = sample_joint(p, 30, SamplerConfig(seed=2))
        df = p.alpha + 2
        scale = p.sigma * math.sqrt(2 / df)
        ref = -d.n * math.log(TWO_PI) + np.sum(stats.t.logpdf((d.x - 0.5) / scale, df)
                                               - math.log(scale))
        assert loglik(p, d) == pytest.approx(ref, rel=1e-12)

    def test_methods_agree(self, gt_data):
        a = loglik(TRUTH, gt_data, method="series")
        b = loglik(TRUTH, gt_data, method="quadrature")
        assert a == pytest.approx(b, abs=1e-9)

    def test_aic(self):
        for tag, k in FREE_PARAMETERS.items():
            assert aic(-10.0, tag) == 20.0 + 2 * k


class TestPsi1:
    def test_exact_cosine_data(self):
        theta = np.linspace(0, TWO_PI, 12, endpoint=False)
        d = Dataset(2 + 3 * np.cos(theta - 1), theta)
        p = CylinderParams(alpha=4, sigma=0.5, mu=0.0, lam=0.1, kappa1=0.3, kappa2=0.2, mu2=1)
        mu, lam, nu = step_psi1(d, p)
        assert (mu, lam, nu) == pytest.approx((2, 3, 1), abs=1e-12)

    def test_equal_weights_is_least_squares(self):
        rng = np.random.default_rng(3)
        theta = rng.uniform(0, TWO_PI, 40)
        x = rng.normal(size=40) + np.cos(theta)
        d = Dataset(x, theta)
        # kappa = 0 and a huge sigma make every weight 1
        p = CylinderParams(alpha=4, sigma=1e9)
        design = np.column_stack([np.ones(40), np.cos(theta), np.sin(theta)])
        beta = np.linalg.lstsq(design, x, rcond=None)[0]
        mu, lam, nu = step_psi1(d, p)
        assert mu == pytest.approx(beta[0], abs=1e-9)
        assert lam * math.cos(nu) == pytest.approx(beta[1], abs=1e-9)
        assert lam * math.sin(nu) == pytest.approx(beta[2], abs=1e-9)

    def test_increases_profile_objective(self, gt_data):
        p = TRUTH.replace(mu=0.4, lam=0.5, nu=2.0, alpha=3.0)

        def profile(q):
            e = gt_data.x - q.mu - q.lam * np.cos(gt_data.theta - q.nu)
            c = 1 - q.kappa1 * np.cos(gt_data.theta - q.mu1) - q.kappa2 * np.cos(
                2 * (gt_data.theta - q.mu2))
            return -np.sum(np.log(c + e * e / (2 * q.sigma**2)))

        mu, lam, nu = step_psi1(gt_data, p)
        assert profile(p.replace(mu=mu, lam=lam, nu=nu)) > profile(p)

    def test_singular_design(self):
        d = Dataset(np.arange(5.0), np.full(5, 0.7))
        with pytest.raises(PreconditionError):
            step_psi1(d, FIG1)


class TestSigma:
    def test_scalar_solution(self):
        # all C_i = 1, all e_i^2 = e^2: n e^2/(e^2 + 2 sigma^2) = n/(alpha+3)
        theta = np.linspace(0, TWO_PI, 10, endpoint=False)
        x = np.where(np.arange(10) % 2 == 0, 0.7, -0.7)
        p = CylinderParams(alpha=5.0, sigma=1.0)
        assert step_sigma(Dataset(x, theta), p) ** 2 == pytest.approx(0.49 * 7 / 2, rel=1e-13)

    def test_residual_and_scale_equivariance(self, gt_data):
        p = TRUTH.replace(sigma=0.37)
        s = step_sigma(gt_data, p)
        e = gt_data.x - p.mu_of_theta(gt_data.theta)
        c = 1 - 0.2 * np.cos(gt_data.theta) - 0.3 * np.cos(2 * gt_data.theta)
        resid = gt_data.n / (p.alpha + 3) - np.sum(e * e / (e * e + 2 * c * s * s))
        assert abs(resid) < 1e-12 * gt_data.n
        doubled = Dataset(2 * gt_data.x, gt_data.theta)
        p2 = p.replace(mu=2 * p.mu, lam=2 * p.lam)
        assert step_sigma(doubled, p2) == pytest.approx(2 * s, rel=1e-12)

    def test_collapsed_residuals(self):
        theta = np.linspace(0, TWO_PI, 10, endpoint=False)
        with pytest.raises(PreconditionError):
            step_sigma(Dataset(np.zeros(10), theta), CylinderParams(alpha=4, sigma=1))


class TestPsi2:
    def test_ascent(self, gt_data):
        p = TRUTH.replace(kappa1=0.05, kappa2=0.5, mu2=1.0, alpha=15.0)
        new, ok = step_psi2(gt_data, p)
        assert ok
        assert psi2_objective(gt_data, new) >= psi2_objective(gt_data, p)
        assert new.kappa1 + new.kappa2 <= 1 - 1e-6

    def test_concentration_recovered(self):
        truth = CylinderParams(alpha=9, sigma=1, kappa1=0.5)
        est = []
        for r in range(20):
            d = sample_joint(truth, 2000, SamplerConfig(seed=300 + r))
            p = truth.replace(kappa1=0.3, kappa2=0.05, mu2=0.5, alpha=6.0)
            for _ in range(20):
                new, _ = step_psi2(d, p, "GT-sub1")
                done = abs(new.kappa1 - p.kappa1) < 1e-7 and abs(new.alpha - p.alpha) < 1e-5
                p = new
                if done:
                    break
            est.append(p.kappa1)
        se = np.std(est, ddof=1) / math.sqrt(len(est))
        assert abs(np.mean(est) - 0.5) < 3 * se

    def test_heavy_tails_drive_alpha_to_bound(self):
        rng = np.random.default_rng(4)
        d = Dataset(rng.standard_t(0.4, 500), rng.uniform(0, TWO_PI, 500))
        p = CylinderParams(alpha=5, sigma=0.3, kappa1=0.1, kappa2=0.05)
        for _ in range(3):
            p = p.replace(sigma=step_sigma(d, p))
            p, _ = step_psi2(d, p)
        assert p.alpha == pytest.approx(-1.0, abs=1e-12)


class TestFitMle:
    def test_trace_nondecreasing(self, gt_fit):
        trace = np.asarray(gt_fit.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-8 * (1 + np.abs(trace[1:])))
        assert gt_fit.converged and gt_fit.iterations <= 500

    def test_report_fields(self, gt_data, gt_fit):
        assert gt_fit.aic == -2 * gt_fit.loglik + 2 * 9
        assert gt_fit.loglik == pytest.approx(loglik(gt_fit.params, gt_data), abs=1e-9)
        assert 0 <= gt_fit.gof_ks <= 1
        again = FitReport.from_dict(gt_fit.as_dict())
        assert again.params == gt_fit.params and again.loglik_trace == gt_fit.loglik_trace

    def test_improves_on_truth(self, gt_data, gt_fit):
        assert gt_fit.loglik >= loglik(TRUTH, gt_data) - 1e-6

    def test_shift_equivariance(self, gt_data, gt_fit):
        shifted = fit_mle(gt_data.shifted(3.5), "GT", opts=FAST).params
        base = gt_fit.params
        assert shifted.mu == pytest.approx(base.mu + 3.5, abs=1e-6)
        for name in ("alpha", "sigma", "lam", "kappa1", "kappa2"):
            assert getattr(shifted, name) == pytest.approx(getattr(base, name), abs=1e-6)
        for name in ("nu", "mu1"):
            assert arc(getattr(shifted, name), getattr(base, name)) < 1e-6
        assert arc(shifted.mu2, base.mu2, math.pi) < 1e-6

    def test_rotation_equivariance(self, gt_data, gt_fit):
        delta = 1.1
        rot = fit_mle(gt_data.rotated(delta), "GT", opts=FAST).params
        base = gt_fit.params
        for name in ("alpha", "sigma", "mu", "lam", "kappa1", "kappa2"):
            assert getattr(rot, name) == pytest.approx(getattr(base, name), abs=1e-6)
        assert arc(rot.nu, base.nu + delta) < 1e-6
        assert arc(rot.mu1, base.mu1 + delta) < 1e-6
        assert arc(rot.mu2, base.mu2 + delta, math.pi) < 1e-6

    def test_sub1_constraints(self, gt_data):
        r = fit_mle(gt_data, "GT-sub1", opts=FAST)
        assert r.params.kappa2 == 0.0 and r.params.mu2 == 0.0
        assert r.aic == -2 * r.loglik + 14
        assert np.all(np.diff(r.loglik_trace) >= -1e-8 * (1 + np.abs(r.loglik_trace[1:])))

    def test_sub2_constraints(self, gt_data):
        r = fit_mle(gt_data, "GT-sub2", opts=FAST)
        p = r.params
        assert 2 * p.kappa2 < p.kappa1
        assert arc(p.mu2, p.mu1 + math.pi / 4, math.pi) < 1e-12
        assert r.aic == -2 * r.loglik + 16

    def test_identifiability_flags(self):
        p = CylinderParams(alpha=6, sigma=1, kappa1=0.4)
        rng = np.random.default_rng(5)
        theta = rng.uniform(0, TWO_PI, 60)
        x = np.tile([1.0, -1.0], 30) * np.linspace(0.2, 2.0, 60)
        d = Dataset(x, theta)
        r = fit_mle(d, "GT", init=p.replace(lam=0.0), opts=FAST)
        if r.params.lam < 1e-4:
            assert r.params.nu == 0.0 and any("nu" in f for f in r.flags)
        if r.params.kappa2 < 1e-4:
            assert r.params.mu2 == 0.0 and any("mu2" in f for f in r.flags)

    def test_nonconvergence_reported(self, gt_data):
        r = fit_mle(gt_data, "GT", opts=FitOptions(max_iter=1, compute_gof=False))
        assert not r.converged and r.iterations == 1 and len(r.loglik_trace) == 2

    def test_init_projected_onto_submodel(self, gt_data):
        r = fit_mle(gt_data, "GT-sub1", init=TRUTH, opts=FitOptions(max_iter=2,
                                                                    compute_gof=False))
        assert r.params.kappa2 == 0.0

    def test_preconditions(self, gt_data):
        with pytest.raises(PreconditionError):
            fit_mle(Dataset(np.arange(9.0), np.arange(9.0)), "GT")
        with pytest.raises(ValueError):
            fit_mle(gt_data, "GT-sub3")

    def test_initial_params_interior(self, gt_data):
        for tag in ("GT", "GT-sub1", "GT-sub2"):
            p = initial_params(gt_data, tag)
            assert p.alpha == 10 and 0.01 <= p.kappa1 <= 0.8
            assert p.kappa1 + p.kappa2 < 1


@pytest.fixture(scope="module")
def sub1_replicates():
    truth = CylinderParams(alpha=6, sigma=1, lam=1, nu=math.pi / 3, kappa1=0.4)
    out = []
    for r in range(20):
        d = sample_joint(truth, 2000, SamplerConfig(seed=500 + r))
        out.append((fit_mle(d, "GT", opts=FAST), fit_mle(d, "GT-sub1", opts=FAST)))
    return out


@pytest.mark.slow
class TestSubmodelReplicates:
    def test_spurious_second_harmonic_vanishes(self, sub1_replicates):
        assert np.median([gt.params.kappa2 for gt, _ in sub1_replicates]) < 0.05

    def test_aic_prefers_true_submodel(self, sub1_replicates):
        wins = sum(sub.aic <= gt.aic + 4 for gt, sub in sub1_replicates)
        assert wins >= 16


class TestKS:
    def test_linear_block_is_least_squares(self, gt_data):
        r = fit_ks(gt_data, FAST)
        k = r.params
        design = np.column_stack([np.ones(gt_data.n), np.cos(gt_data.theta),
                                  np.sin(gt_data.theta)])
        beta = np.linalg.lstsq(design, gt_data.x, rcond=None)[0]
        assert k.mu == pytest.approx(beta[0], abs=1e-12)
        resid = gt_data.x - design @ beta
        assert k.tau == pytest.approx(math.sqrt(np.mean(resid**2)), rel=1e-12)
        assert r.converged and r.aic == -2 * r.loglik + 16

    def test_circular_block_is_stationary(self, gt_data):
        k = fit_ks(gt_data, FAST).params
        base = ks_loglik(k, gt_data)
        h = 1e-5
        for name in ("kappa1_star", "mu1", "kappa2_star", "mu2"):
            for sgn in (-1, 1):
                moved = KSParams(**{**k.as_dict(), name: getattr(k, name) + sgn * h})
                assert ks_loglik(moved, gt_data) <= base + 1e-7

    def test_via_fit_mle(self, gt_data):
        assert fit_mle(gt_data, "KS", opts=FAST).model_tag == "KS"
