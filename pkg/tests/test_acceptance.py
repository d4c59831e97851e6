"""Acceptance criteria 1-10, each checked at its stated tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary ends with one
PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, special, stats

from cylt.analysis import (
    circular_linear_correlation,
    cross_moment,
    find_modes,
    skewness_x,
    sub1_moment_closed_form,
)
from cylt.dataset import Dataset
from cylt.fit import FitOptions, fit_mle
from cylt.gof import gof_ks
from cylt.model import (
    CylinderParams,
    KSParams,
    conditional_x_given_theta_cdf,
    ks_limit_pdf,
    log_normalizing_constant,
    normalizing_constant,
    pdf,
    sub1_normalizing_constant,
)
from cylt.sample import SamplerConfig, sample_joint, sample_x_given_theta

from conftest import (
    FIG1,
    FIG2_II,
    circ_dist,
    draw_case,
    expect_2d,
    expect_theta,
    joint_chi2_pvalue,
    log_kernel_direct,
    random_params,
)

TWO_PI = 2 * math.pi
criterion = pytest.mark.criterion


def circular_constant_quad(p):
    """``C_theta`` by adaptive quadrature, independent of the package."""
    f = lambda t: (1 - p.kappa1 * math.cos(t - p.mu1)
                   - p.kappa2 * math.cos(2 * (t - p.mu2))) ** (-p.alpha / 2 - 1)
    return integrate.quad(f, 0, TWO_PI, epsrel=1e-13, epsabs=0, limit=400)[0]


@criterion(1, "normalizing constant: series equals the quadrature identity")
def test_criterion_01_series_constant():
    rng = np.random.default_rng(20240101)
    params = [random_params(rng, kappa_sum=0.9, alpha_range=(-1.0, 50.0)) for _ in range(25)]
    start = time.perf_counter()
    series = [log_normalizing_constant(p, method="series") for p in params]
    elapsed = time.perf_counter() - start
    worst = 0.0
    for p, log_c in zip(params, series):
        ref = (math.sqrt(2) * p.sigma * special.beta(0.5, p.alpha / 2 + 1)
               * circular_constant_quad(p))
        worst = max(worst, abs(math.expm1(log_c - math.log(ref))))
    print(f"worst relative error {worst:.2e}, series time {elapsed:.2f} s")
    assert worst <= 1e-8
    assert elapsed < 10.0


@criterion(2, "special-case collapse to the 2F1 form and the uniform constant")
def test_criterion_02_special_cases():
    for alpha in (-0.5, 0.0, 3.0, 12.5, 40.0):
        for kappa1 in (0.05, 0.3, 0.6, 0.85):
            p = CylinderParams(alpha=alpha, sigma=1.7, kappa1=kappa1, mu1=0.4)
            general = normalizing_constant(p, method="series")
            closed = sub1_normalizing_constant(p)
            assert general == pytest.approx(closed, rel=1e-10)
            oracle = (2 * math.sqrt(2) * math.pi * 1.7 * special.beta(0.5, alpha / 2 + 1)
                      * special.hyp2f1(alpha / 4 + 0.5, alpha / 4 + 1, 1, kappa1**2))
            assert closed == pytest.approx(oracle, rel=1e-10)
    for alpha, sigma in ((-1.0, 1.0), (0.0, 0.3), (6.0, 2.5), (49.0, 1.0)):
        p = CylinderParams(alpha=alpha, sigma=sigma)
        exact = 2 * math.sqrt(2) * math.pi * special.beta(0.5, alpha / 2 + 1) * sigma
        assert normalizing_constant(p) == pytest.approx(exact, rel=4 * np.finfo(float).eps)


@criterion(3, "Gaussian-tail limit: density and constant")
def test_criterion_03_kato_shimizu_limit():
    alpha = 1e5
    gamma = alpha / 2
    k = KSParams(tau=0.9, mu=0.5, lam=1.1, nu=0.4, kappa1_star=1.2, mu1=0.3,
                 kappa2_star=0.5, mu2=1.0)
    p = CylinderParams(alpha=alpha, sigma=math.sqrt(gamma) * k.tau, mu=k.mu, lam=k.lam, nu=k.nu,
                       kappa1=k.kappa1_star / gamma, mu1=k.mu1,
                       kappa2=k.kappa2_star / gamma, mu2=k.mu2)
    worst = 0.0
    for x in np.linspace(-1.0, 2.0, 5):
        for t in np.linspace(0.0, 6.0, 5):
            worst = max(worst, abs(float(pdf(p, x, t)) / float(ks_limit_pdf(k, x, t)) - 1))
    print(f"worst pointwise relative difference {worst:.2e}")
    assert worst <= 1e-3
    for tau, k1s in ((0.8, 1.3), (2.0, 0.2), (1.0, 3.0)):
        p1 = CylinderParams(alpha=alpha, sigma=math.sqrt(gamma) * tau, kappa1=k1s / gamma)
        ref = TWO_PI**1.5 * tau * special.i0(k1s)
        assert sub1_normalizing_constant(p1) == pytest.approx(ref, rel=1e-3)


@criterion(4, "modes: closed form equals numeric search and dominates the grid")
def test_criterion_04_modes():
    worst = 0.0
    for ci, case in enumerate((0.0, 0.25, 0.5, 0.75)):
        for above in (False, True):
            rng = np.random.default_rng(400 + 10 * ci + above)
            for _ in range(50):
                p = draw_case(rng, case, above)
                closed = find_modes(p, method="closed_form")
                numeric = find_modes(p, method="numeric")
                assert len(closed.modes) == len(numeric.modes) == (2 if above else 1)
                for t in closed.thetas:
                    worst = max(worst, min(circ_dist(t, u) for u in numeric.thetas))
                # 400 x 400 grid: the highest mode is the global maximum and every
                # mode is a local maximum (the closed forms list local modes too)
                xs = np.linspace(p.mu - p.lam - 4 * p.sigma, p.mu + p.lam + 4 * p.sigma, 400)
                ts = np.linspace(0, TWO_PI, 400, endpoint=False)
                X, T = np.meshgrid(xs, ts, indexing="ij")
                grid = pdf(p, X, T)
                values = [float(pdf(p, x, t)) for x, t in closed.modes]
                assert max(values) >= grid.max()
                for (x, t), v in zip(closed.modes, values):
                    near = (np.abs(X - x) < 0.3) & (np.abs(np.angle(np.exp(1j * (T - t)))) < 0.3)
                    assert v >= grid[near].max()
    print(f"worst closed-form vs numeric theta difference {worst:.2e}")
    assert worst <= 1e-6


@criterion(5, "moment formulas against two-dimensional quadrature")
def test_criterion_05_moments():
    general = [FIG2_II, CylinderParams(alpha=7.5, sigma=1.3, mu=0.4, lam=0.9, nu=2.0,
                                       kappa1=0.35, mu1=1.1, kappa2=0.25, mu2=2.5)]
    for p in general:
        for m in (0, 1, 2):
            for k in (0, 1):
                for name, fn in (("cos", math.cos), ("sin", math.sin)):
                    if name == "sin" and m == 0:
                        continue
                    ref = expect_2d(p, lambda x, t: (x - p.mu_of_theta(t)) ** (2 * k) * fn(m * t))
                    assert cross_moment(p, m, k, name) == pytest.approx(ref, rel=1e-6, abs=1e-12)
    # Legendre path: v = alpha/2 - k is an integer for alpha = 10, not for alpha = 7.3
    for alpha, rel in ((10.0, 1e-6), (7.3, 1e-4)):
        p = CylinderParams(alpha=alpha, sigma=1.1, mu=0.2, lam=0.8, nu=0.5, kappa1=0.5, mu1=0.9)
        for m in (1, 2):
            for k in (0, 1):
                ref = expect_2d(p, lambda x, t: (x - p.mu_of_theta(t)) ** (2 * k)
                                * math.cos(m * (t - p.mu1)))
                assert sub1_moment_closed_form(p, m, k) == pytest.approx(ref, rel=rel)


@criterion(6, "correlation vanishes only without coupling; skewness limits")
def test_criterion_06_correlation_and_skewness():
    base = CylinderParams(alpha=6, sigma=1, nu=0.8, kappa1=0.4, mu1=0.2, kappa2=0.3, mu2=1.1)
    r = [circular_linear_correlation(base.replace(lam=lam)) for lam in (0, 0.5, 1, 2, 4, 8)]
    print("R^2 over lam = 0, 0.5, 1, 2, 4, 8:", " ".join(f"{v:.6f}" for v in r))
    assert r[0] == 0.0
    assert all(v > 0 for v in r[1:])
    assert all(b >= a for a, b in zip(r, r[1:]))
    assert skewness_x(base) == pytest.approx(0.0, abs=1e-14)
    p = base.replace(lam=1e4)
    # v1 and v3: variance and third central moment of cos(Theta - nu)
    e1 = expect_theta(p, lambda t: math.cos(t - p.nu))
    v1 = expect_theta(p, lambda t: (math.cos(t - p.nu) - e1) ** 2)
    v3 = expect_theta(p, lambda t: (math.cos(t - p.nu) - e1) ** 3)
    gap = abs(skewness_x(p) - v3 / v1**1.5)
    print(f"|skewness(lam=1e4) - v3/v1^1.5| = {gap:.2e}")
    assert gap <= 1e-3


SAMPLER_SETS = [
    FIG1,
    FIG2_II,
    CylinderParams(alpha=-0.5, sigma=2.0, mu=1.0, lam=1.0, nu=2.0, kappa1=0.6, mu1=0.5,
                   kappa2=0.2, mu2=1.0),
    CylinderParams(alpha=30.0, sigma=0.5, lam=0.3, kappa1=0.5, mu1=4.0, kappa2=0.4,
                   mu2=4.0 + math.pi / 4),
    CylinderParams(alpha=2.0, sigma=1.0, lam=3.0, nu=5.0, kappa1=0.1, kappa2=0.8, mu2=0.3),
]


@criterion(7, "sampler: joint chi-square and conditional KS bound")
def test_criterion_07_sampler():
    n = 10**5
    pvals = []
    for i, p in enumerate(SAMPLER_SETS):
        pvals.append(joint_chi2_pvalue(p, sample_joint(p, n, SamplerConfig(seed=700 + i))))
        print(f"set {i}: chi-square p-value {pvals[-1]:.4f}")
    p, theta = SAMPLER_SETS[2], 2.0
    x = sample_x_given_theta(p, theta, n, SamplerConfig(seed=777))
    # quadrature CDF of the conditional kernel on a grid; D_n against it is bounded
    # by D_n against the closed-form CDF plus their largest gap
    kern = lambda y: math.exp(log_kernel_direct(p, y, theta))
    total = integrate.quad(kern, -np.inf, np.inf, epsrel=1e-12)[0]
    grid = np.quantile(x, np.linspace(0.001, 0.999, 41))
    gap = max(abs(integrate.quad(kern, -np.inf, v, epsrel=1e-12)[0] / total
                  - float(conditional_x_given_theta_cdf(p, v, theta))) for v in grid)
    d_n = stats.kstest(x, lambda v: conditional_x_given_theta_cdf(p, v, theta)).statistic
    print(f"D_n = {d_n:.5f}, CDF gap {gap:.1e}, bound {1.63 / math.sqrt(n):.5f}")
    assert d_n + gap < 1.63 / math.sqrt(n)
    assert all(pv > 0.001 for pv in pvals)


STUDY_TRUTH = CylinderParams(alpha=6, sigma=1, mu=0, lam=1, nu=math.pi / 3, kappa1=0.2,
                             mu1=0, kappa2=0.3, mu2=0)


@criterion(8, "estimation: 20 replicates at n = 2000")
def test_criterion_08_estimation_study():
    start = time.perf_counter()
    reports = []
    for r in range(20):
        data = sample_joint(STUDY_TRUTH, 2000, SamplerConfig(seed=8000 + r))
        reports.append(fit_mle(data, "GT", opts=FitOptions(compute_gof=False)))
    elapsed = time.perf_counter() - start
    converged = sum(rep.converged for rep in reports)
    for rep in reports:
        assert np.all(np.diff(rep.loglik_trace) >= -1e-8)
    print(f"{converged}/20 converged in {elapsed:.1f} s")
    assert converged >= 18
    assert elapsed < 300
    est = {name: np.array([getattr(rep.params, name) for rep in reports])
           for name in CylinderParams.field_names()}
    for name, values in est.items():
        truth = getattr(STUDY_TRUTH, name)
        if name in ("nu", "mu1"):
            dev = np.remainder(values - truth + math.pi, TWO_PI) - math.pi
        elif name == "mu2":
            dev = np.remainder(values - truth + math.pi / 2, math.pi) - math.pi / 2
        else:
            dev = values - truth
        se = dev.std(ddof=1) / math.sqrt(len(dev))
        print(f"{name:7s} mean error {dev.mean():+.4f}  se {se:.4f}  "
              f"ratio {abs(dev.mean()) / se:.2f}")
        assert abs(dev.mean()) <= 3 * se


@criterion(9, "goodness of fit: calibration at n = 20 and rescale invariance")
def test_criterion_09_gof_calibration():
    fitted = fit_mle(sample_joint(FIG2_II, 500, SamplerConfig(seed=900)), "GT",
                     opts=FitOptions(compute_gof=False))
    assert fitted.converged
    p = fitted.params
    stats_ = []
    for r in range(200):
        d = sample_joint(p, 20, SamplerConfig(seed=9000 + r))
        stats_.append(gof_ks(p, d).statistic)
        if r < 10:
            c = 3.7
            scaled = p.replace(mu=c * p.mu, sigma=c * p.sigma, lam=c * p.lam)
            assert gof_ks(scaled, Dataset(c * d.x, d.theta)).statistic == pytest.approx(
                stats_[-1], abs=1e-12)
    exceed = int(np.sum(np.array(stats_) > 0.362))
    lo, hi = stats.binom.interval(0.99, 200, 0.05)
    print(f"{exceed}/200 statistics exceed 0.362; 99% band [{lo:.0f}, {hi:.0f}]")
    assert lo <= exceed <= hi


@criterion(10, "shift and rotation equivariance of pdf and fit")
def test_criterion_10_equivariance():
    rng = np.random.default_rng(1000)
    for _ in range(20):
        p = random_params(rng)
        c, delta = rng.normal(0, 5), rng.uniform(0, TWO_PI)
        x, t = rng.normal(p.mu, 2, 10), rng.uniform(0, TWO_PI, 10)
        base = pdf(p, x, t)
        shifted = pdf(p.replace(mu=p.mu + c), x + c, t)
        rotated = pdf(p.replace(nu=p.nu + delta, mu1=p.mu1 + delta, mu2=p.mu2 + delta), x,
                      t + delta)
        assert shifted == pytest.approx(base, rel=1e-6)
        assert rotated == pytest.approx(base, rel=1e-6)
    data = sample_joint(FIG2_II, 400, SamplerConfig(seed=1001))
    base = fit_mle(data, "GT", opts=FitOptions(compute_gof=False)).params
    c, delta = 3.5, 1.1
    sh = fit_mle(data.shifted(c), "GT", opts=FitOptions(compute_gof=False)).params
    ro = fit_mle(data.rotated(delta), "GT", opts=FitOptions(compute_gof=False)).params
    for name in ("alpha", "sigma", "lam", "kappa1", "kappa2"):
        assert getattr(sh, name) == pytest.approx(getattr(base, name), abs=1e-6)
        assert getattr(ro, name) == pytest.approx(getattr(base, name), abs=1e-6)
    assert sh.mu == pytest.approx(base.mu + c, abs=1e-6)
    assert ro.mu == pytest.approx(base.mu, abs=1e-6)
    for name in ("nu", "mu1"):
        assert circ_dist(getattr(sh, name), getattr(base, name)) < 1e-6
        assert circ_dist(getattr(ro, name), getattr(base, name) + delta) < 1e-6
    assert abs(math.remainder(sh.mu2 - base.mu2, math.pi)) < 1e-6
    assert abs(math.remainder(ro.mu2 - base.mu2 - delta, math.pi)) < 1e-6
