"""Maximum likelihood by three-block conditional maximization.

Each cycle updates the regression block ``(mu, lam, nu)`` by one weighted
least-squares step, then ``sigma`` by solving its score equation exactly, then
the circular block ``(kappa1, mu1, kappa2, mu2, alpha)`` by a bounded local
optimizer. Every block step is an ascent step, so the log-likelihood trace is
nondecreasing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import LinearConstraint, brentq, minimize
from scipy.special import betaln, digamma

from .dataset import Dataset
from .exceptions import ConvergenceError, PreconditionError
from .gof import gof_ks
from .model import (
    TWO_PI,
    CylinderParams,
    KSParams,
    circular_base,
    ks_log_normalizing_constant,
    log_circular_constant,
)
from .specfun import DEFAULT_OPTIONS, SeriesOptions

__all__ = [
    "MODEL_TAGS",
    "FREE_PARAMETERS",
    "FitOptions",
    "FitReport",
    "loglik",
    "ks_loglik",
    "step_psi1",
    "step_sigma",
    "step_psi2",
    "psi2_objective",
    "initial_params",
    "fit_mle",
    "fit_ks",
    "aic",
]

MODEL_TAGS = ("GT", "GT-sub1", "GT-sub2", "KS")
FREE_PARAMETERS = {"GT": 9, "GT-sub1": 7, "GT-sub2": 8, "KS": 8}

_KAPPA_MARGIN = 1e-6
_ALPHA_MAX = 1e4
_IDENT_TOL = 1e-4


@dataclass(frozen=True)
class FitOptions:
    """Stopping rule and numerical settings for :func:`fit_mle`.

    ``tol`` bounds the largest per-cycle parameter change (angles by shortest
    arc, ``alpha`` and ``sigma`` relatively once above 10).
    """

    tol: float = 1e-3
    max_iter: int = 500
    series: SeriesOptions = DEFAULT_OPTIONS
    alpha_max: float = _ALPHA_MAX
    compute_gof: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not self.alpha_max > -1:
            raise ValueError("alpha_max must exceed -1")


@dataclass
class FitReport:
    """Result of a fit.

    ``flags`` carries identifiability notes and optimizer warnings.
    """

    params: CylinderParams | KSParams
    model_tag: str
    loglik: float
    aic: float
    gof_ks: float | None
    iterations: int
    loglik_trace: list[float]
    converged: bool
    flags: list[str] = field(default_factory=list)

    @property
    def n_free(self) -> int:
        return FREE_PARAMETERS[self.model_tag]

    def as_dict(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "params": self.params.as_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "gof_ks": self.gof_ks,
            "iterations": self.iterations,
            "loglik_trace": list(self.loglik_trace),
            "converged": self.converged,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitReport":
        ptype = KSParams if data["model_tag"] == "KS" else CylinderParams
        return cls(
            params=ptype.from_dict(data["params"]),
            model_tag=data["model_tag"],
            loglik=float(data["loglik"]),
            aic=float(data["aic"]),
            gof_ks=None if data.get("gof_ks") is None else float(data["gof_ks"]),
            iterations=int(data["iterations"]),
            loglik_trace=[float(v) for v in data["loglik_trace"]],
            converged=bool(data["converged"]),
            flags=list(data.get("flags", [])),
        )


def aic(loglik_value: float, model_tag: str) -> float:
    return -2.0 * loglik_value + 2.0 * FREE_PARAMETERS[model_tag]


def _residuals(p: CylinderParams, data: Dataset):
    e = data.x - p.mu - p.lam * np.cos(data.theta - p.nu)
    c = circular_base(data.theta, p.kappa1, p.mu1, p.kappa2, p.mu2)
    return e, np.atleast_1d(c)


def loglik(
    p: CylinderParams,
    data: Dataset,
    opts: SeriesOptions = DEFAULT_OPTIONS,
    method: str = "auto",
) -> float:
    """Log-likelihood

        -n log B(1/2, alpha/2+1) - n log C_theta - (n/2) log 2 - n log sigma
        - (alpha+3)/2 sum log[C_i + e_i^2 / (2 sigma^2)]

    with ``e_i = x_i - mu(theta_i)`` and ``C_i = s(theta_i)``.
    """
    n = data.n
    e, c = _residuals(p, data)
    lct = log_circular_constant(p.alpha, p.kappa1, p.mu1, p.kappa2, p.mu2, opts, method)
    return float(
        -n * (betaln(0.5, p.alpha / 2.0 + 1.0) + lct + 0.5 * math.log(2.0) + math.log(p.sigma))
        - (p.alpha + 3.0) / 2.0 * np.sum(np.log(c + e * e / (2.0 * p.sigma**2)))
    )


def _fit_loglik(p: CylinderParams, data: Dataset, opts: SeriesOptions) -> float:
    # fits always use the quadrature constant so every comparison is like for like
    return loglik(p, data, opts, "quadrature")


def step_psi1(data: Dataset, p: CylinderParams) -> tuple[float, float, float]:
    """One weighted least-squares update of ``(mu, lam, nu)``.

    Regresses ``x`` on ``(1, cos theta, sin theta)`` with weights
    ``w_i = sigma^2 / (C_i sigma^2 + e_i^2 / 2)`` evaluated at the current
    parameters. These weights come from the tangent-line majorizer of
    ``log(C_i + e^2 / (2 sigma^2))``, so the step never decreases the
    likelihood.

    Raises
    ------
    PreconditionError
        If fewer than 3 observations or the weighted design is singular.
    """
    if data.n < 3:
        raise PreconditionError("the regression step needs at least 3 observations")
    e, c = _residuals(p, data)
    w = p.sigma**2 / (c * p.sigma**2 + 0.5 * e * e)
    design = np.column_stack([np.ones(data.n), np.cos(data.theta), np.sin(data.theta)])
    gram = design.T @ (w[:, None] * design)
    rhs = design.T @ (w * data.x)
    if np.linalg.cond(gram) > 1e12:
        raise PreconditionError("weighted design is singular (collinear angles)")
    beta = np.linalg.solve(gram, rhs)
    lam = math.hypot(beta[1], beta[2])
    nu = math.atan2(beta[2], beta[1]) % TWO_PI
    return float(beta[0]), lam, nu


def _sigma_equation(e2, c, n, alpha):
    target = n / (alpha + 3.0)

    def f(t):
        return float(np.sum(e2 / (e2 + 2.0 * c * math.exp(t)))) - target

    def df(t):
        q = 2.0 * c * math.exp(t)
        return float(-np.sum(e2 * q / (e2 + q) ** 2))

    return f, df


def step_sigma(data: Dataset, p: CylinderParams) -> float:
    """Exact maximizer of the likelihood in ``sigma``.

    Solves ``n / (alpha+3) = sum e_i^2 / (e_i^2 + 2 C_i sigma^2)``; the right
    side falls strictly from ``#{e_i != 0}`` to 0 as ``sigma^2`` grows, so the
    root is unique. Brent's method on ``log sigma^2`` brackets it and a Newton
    polish brings the residual to rounding level.

    Raises
    ------
    PreconditionError
        If the residuals are (almost) all zero, so the maximizer is ``sigma = 0``.
    """
    e, c = _residuals(p, data)
    e2 = e * e
    n = data.n
    if np.count_nonzero(e2) <= n / (p.alpha + 3.0):
        raise PreconditionError("too many zero residuals: sigma estimate collapses to 0")
    f, df = _sigma_equation(e2, c, n, p.alpha)
    t0 = math.log(max(float(np.mean(e2)), 1e-300))
    lo, hi = t0 - 1.0, t0 + 1.0
    while f(lo) < 0:
        lo -= 2.0
    while f(hi) > 0:
        hi += 2.0
    t = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    for _ in range(3):
        d = df(t)
        if d == 0.0:
            break
        step = f(t) / d
        if not abs(step) < 1e-6:
            break
        t -= step
    return math.exp(0.5 * t)


class _CircularBlock:
    """Objective of the circular block with an analytic gradient.

    Variables are the free subset of ``(kappa1, mu1, kappa2, mu2, l)`` with
    ``alpha = exp(l) - 2``. ``C_theta`` is a trapezoid sum on a fixed grid
    aligned with ``mu1``, which makes the value exactly invariant under
    rotation.
    """

    def __init__(self, data: Dataset, p: CylinderParams, model_tag: str, n_grid: int):
        e, _ = _residuals(p, data)
        self.theta = data.theta
        self.r = e * e / (2.0 * p.sigma**2)
        self.n = data.n
        self.tag = model_tag
        self.u = np.arange(n_grid) * (TWO_PI / n_grid)
        self.log_h = math.log(TWO_PI / n_grid)

    def full(self, z):
        if self.tag == "GT":
            k1, m1, k2, m2, l = z
        elif self.tag == "GT-sub1":
            k1, m1, l = z
            k2, m2 = 0.0, 0.0
        else:
            k1, m1, k2, l = z
            m2 = m1 + math.pi / 4.0
        return k1, m1, k2, m2, math.exp(l) - 2.0

    def value_grad(self, z):
        k1, m1, k2, m2, alpha = self.full(z)
        a = alpha / 2.0 + 1.0
        d = m2 - m1
        # circular constant and its derivatives
        su = 1.0 - k1 * np.cos(self.u) - k2 * np.cos(2.0 * (self.u - d))
        lsu = np.log(su)
        lw = -a * lsu
        top = lw.max()
        w = np.exp(lw - top)
        tot = w.sum()
        log_ct = self.log_h + top + math.log(tot)
        w /= tot
        inv = w / su
        g_ct_k1 = a * float(inv @ np.cos(self.u))
        g_ct_k2 = a * float(inv @ np.cos(2.0 * (self.u - d)))
        g_ct_d = 2.0 * a * k2 * float(inv @ np.sin(2.0 * (self.u - d)))
        g_ct_alpha = -0.5 * float(w @ lsu)
        # data term
        dt1 = self.theta - m1
        dt2 = 2.0 * (self.theta - m2)
        q = 1.0 - k1 * np.cos(dt1) - k2 * np.cos(dt2) + self.r
        if np.any(q <= 0):
            return math.inf, np.zeros(len(z))
        lq = np.log(q)
        sum_lq = float(lq.sum())
        c = (alpha + 3.0) / 2.0
        bl = float(betaln(0.5, a))
        val = (self.n * (bl + log_ct) + c * sum_lq) / self.n
        g_k1 = (self.n * g_ct_k1 - c * float(np.sum(np.cos(dt1) / q))) / self.n
        g_k2 = (self.n * g_ct_k2 - c * float(np.sum(np.cos(dt2) / q))) / self.n
        g_m1 = (-self.n * g_ct_d - c * k1 * float(np.sum(np.sin(dt1) / q))) / self.n
        g_m2 = (self.n * g_ct_d - 2.0 * c * k2 * float(np.sum(np.sin(dt2) / q))) / self.n
        g_bl = 0.5 * (digamma(a) - digamma(a + 0.5))
        g_alpha = (self.n * (g_bl + g_ct_alpha) + 0.5 * sum_lq) / self.n
        g_l = g_alpha * (alpha + 2.0)
        if self.tag == "GT":
            grad = [g_k1, g_m1, g_k2, g_m2, g_l]
        elif self.tag == "GT-sub1":
            grad = [g_k1, g_m1, g_l]
        else:
            grad = [g_k1, g_m1 + g_m2, g_k2, g_l]
        return val, np.asarray(grad)


def _grid_size(p: CylinderParams, tol: float = 1e-13, start: int = 256, cap: int = 1 << 16) -> int:
    """Smallest doubling of ``start`` at which the trapezoid ``log C_theta`` has settled, doubled."""
    d = p.mu2 - p.mu1
    a = p.alpha / 2.0 + 1.0

    def log_ct(n):
        u = np.arange(n) * (TWO_PI / n)
        lw = -a * np.log(1.0 - p.kappa1 * np.cos(u) - p.kappa2 * np.cos(2.0 * (u - d)))
        top = lw.max()
        return top + math.log(np.exp(lw - top).sum() * TWO_PI / n)

    n = start
    prev = log_ct(n)
    while n < cap:
        n *= 2
        cur = log_ct(n)
        if abs(cur - prev) < tol:
            return min(2 * n, cap)
        prev = cur
    return cap


def psi2_objective(data: Dataset, p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """The part of the log-likelihood that depends on the circular block."""
    e, c = _residuals(p, data)
    lct = log_circular_constant(p.alpha, p.kappa1, p.mu1, p.kappa2, p.mu2, opts, "quadrature")
    return float(
        -data.n * (betaln(0.5, p.alpha / 2.0 + 1.0) + lct)
        - (p.alpha + 3.0) / 2.0 * np.sum(np.log(c + e * e / (2.0 * p.sigma**2)))
    )


def step_psi2(
    data: Dataset,
    p: CylinderParams,
    model_tag: str = "GT",
    opts: SeriesOptions = DEFAULT_OPTIONS,
    alpha_max: float = _ALPHA_MAX,
) -> tuple[CylinderParams, bool]:
    """Maximize over the circular block with SLSQP, starting at ``p``.

    Bounds: ``kappa_i >= 0``, ``kappa1 + kappa2 <= 1 - 1e-6``,
    ``-1 <= alpha <= alpha_max``; GT-sub2 also keeps ``kappa1 - 2 kappa2 >= 1e-6``.
    The candidate is accepted only if the accurately evaluated objective does
    not fall below its starting value.

    Returns
    -------
    params : CylinderParams
        Updated parameters (``p`` itself when the step was rejected).
    ok : bool
        False when the optimizer failed to improve and ``p`` was returned.
    """
    block = _CircularBlock(data, p, model_tag, _grid_size(p))
    l0 = math.log(p.alpha + 2.0)
    l_bounds = (0.0, math.log(alpha_max + 2.0))
    k_bound = (0.0, 1.0 - _KAPPA_MARGIN)
    m1_bound = (p.mu1 - TWO_PI, p.mu1 + TWO_PI)
    if model_tag == "GT":
        z0 = [p.kappa1, p.mu1, p.kappa2, p.mu2, l0]
        bounds = [k_bound, m1_bound, k_bound, (p.mu2 - math.pi, p.mu2 + math.pi), l_bounds]
        cons = [LinearConstraint([[1, 0, 1, 0, 0]], -np.inf, 1.0 - _KAPPA_MARGIN)]
    elif model_tag == "GT-sub1":
        z0 = [p.kappa1, p.mu1, l0]
        bounds = [k_bound, m1_bound, l_bounds]
        cons = []
    elif model_tag == "GT-sub2":
        z0 = [p.kappa1, p.mu1, p.kappa2, l0]
        bounds = [k_bound, m1_bound, k_bound, l_bounds]
        cons = [
            LinearConstraint([[1, 0, 1, 0], [1, 0, -2, 0]], [-np.inf, _KAPPA_MARGIN],
                             [1.0 - _KAPPA_MARGIN, np.inf]),
        ]
    else:
        raise ValueError(f"step_psi2 does not handle model {model_tag!r}")
    z0 = np.clip(np.asarray(z0, dtype=float), [b[0] for b in bounds], [b[1] for b in bounds])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            block.value_grad, z0, jac=True, method="SLSQP", bounds=bounds,
            constraints=cons, options={"ftol": 1e-12, "maxiter": 200},
        )
    k1, m1, k2, m2, alpha = block.full(res.x)
    alpha = min(max(alpha, -1.0), alpha_max)
    k1, k2 = max(k1, 0.0), max(k2, 0.0)
    if k1 + k2 > 1.0 - _KAPPA_MARGIN:
        scale = (1.0 - _KAPPA_MARGIN) / (k1 + k2)
        k1, k2 = k1 * scale, k2 * scale
    try:
        cand = p.replace(kappa1=k1, mu1=m1, kappa2=k2, mu2=m2, alpha=alpha)
        better = psi2_objective(data, cand, opts) >= psi2_objective(data, p, opts)
    except (ValueError, ArithmeticError, ConvergenceError):
        better = False
    if better:
        return cand, True
    return p, False


def _sample_sd(x: np.ndarray) -> float:
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return sd if sd > 0 else 1.0


def initial_params(data: Dataset, model_tag: str = "GT") -> CylinderParams:
    """Moment-based starting values inside the constraint set.

    ``mu, sigma`` from the sample mean and standard deviation of ``x``;
    ``lam, nu`` from the ordinary least-squares cosine regression of ``x`` on
    ``theta``; ``mu1`` the circular mean direction; ``kappa1`` the mean resultant
    length clipped to ``[0.01, 0.8]``; ``kappa2 = 0.01``; ``mu2 = mu1 mod pi``;
    ``alpha = 10``.
    """
    design = np.column_stack([np.ones(data.n), np.cos(data.theta), np.sin(data.theta)])
    beta, *_ = np.linalg.lstsq(design, data.x, rcond=None)
    cbar, sbar = float(np.mean(np.cos(data.theta))), float(np.mean(np.sin(data.theta)))
    mu1 = math.atan2(sbar, cbar) % TWO_PI
    k1 = min(max(math.hypot(cbar, sbar), 0.01), 0.8)
    k2, mu2 = 0.01, mu1 % math.pi
    if model_tag == "GT-sub1":
        k2, mu2 = 0.0, 0.0
    elif model_tag == "GT-sub2":
        k2, mu2 = min(0.01, k1 / 4.0), mu1 + math.pi / 4.0
    return CylinderParams(
        alpha=10.0,
        sigma=_sample_sd(data.x),
        mu=float(np.mean(data.x)),
        lam=math.hypot(beta[1], beta[2]),
        nu=math.atan2(beta[2], beta[1]) % TWO_PI,
        kappa1=k1,
        mu1=mu1,
        kappa2=k2,
        mu2=mu2,
    )


def _project(p: CylinderParams, model_tag: str) -> CylinderParams:
    if model_tag == "GT-sub1":
        return p.replace(kappa2=0.0, mu2=0.0)
    if model_tag == "GT-sub2":
        k2 = min(p.kappa2, max(p.kappa1 - _KAPPA_MARGIN, 0.0) / 2.0)
        return p.replace(kappa2=k2, mu2=p.mu1 + math.pi / 4.0)
    return p


def _arc(a: float, b: float, period: float) -> float:
    return abs(math.remainder(a - b, period))


def _max_change(old: CylinderParams, new: CylinderParams, model_tag: str) -> float:
    changes = [abs(new.mu - old.mu), abs(new.lam - old.lam), abs(new.kappa1 - old.kappa1),
               abs(new.kappa2 - old.kappa2), _arc(new.mu1, old.mu1, TWO_PI)]
    for name in ("alpha", "sigma"):
        a, b = getattr(old, name), getattr(new, name)
        scale = max(abs(a), abs(b))
        changes.append(abs(a - b) / scale if scale > 10 else abs(a - b))
    if min(old.lam, new.lam) >= _IDENT_TOL:
        changes.append(_arc(new.nu, old.nu, TWO_PI))
    if model_tag == "GT" and min(old.kappa2, new.kappa2) >= _IDENT_TOL:
        changes.append(_arc(new.mu2, old.mu2, math.pi))
    return max(changes)


def _identifiability(p: CylinderParams, model_tag: str, flags: list[str]) -> CylinderParams:
    if p.lam < _IDENT_TOL:
        flags.append("nu non-identifiable (lam < 1e-4); reported as 0")
        p = p.replace(nu=0.0)
    if model_tag == "GT" and p.kappa2 < _IDENT_TOL:
        flags.append("mu2 non-identifiable (kappa2 < 1e-4); reported as 0")
        p = p.replace(mu2=0.0)
    return p


def fit_mle(
    data: Dataset,
    model_tag: str = "GT",
    init: CylinderParams | None = None,
    opts: FitOptions = FitOptions(),
) -> FitReport:
    """Fit one of the four models by maximum likelihood.

    GT, GT-sub1 (``kappa2 = 0``) and GT-sub2 (``mu2 = mu1 + pi/4``,
    ``2 kappa2 < kappa1``) use conditional maximization; KS is delegated to
    :func:`fit_ks`.

    Parameters
    ----------
    data : Dataset
        At least 10 observations.
    model_tag : {"GT", "GT-sub1", "GT-sub2", "KS"}
    init : CylinderParams, optional
        Starting point, projected onto the submodel; defaults to
        :func:`initial_params`.
    opts : FitOptions

    Returns
    -------
    FitReport
        ``converged`` is False when ``opts.max_iter`` cycles pass without the
        parameter change dropping below ``opts.tol``.
    """
    if model_tag not in MODEL_TAGS:
        raise ValueError(f"unknown model {model_tag!r}; choose from {MODEL_TAGS}")
    if data.n < 10:
        raise PreconditionError(f"fitting needs at least 10 observations, got {data.n}")
    if model_tag == "KS":
        return fit_ks(data, opts)
    sopts = opts.series
    p = _project(init if init is not None else initial_params(data, model_tag), model_tag)
    p = p.replace(alpha=min(p.alpha, opts.alpha_max))
    p = p.replace(sigma=step_sigma(data, p))
    current = _fit_loglik(p, data, sopts)
    trace = [current]
    flags: list[str] = []
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        old = p
        mu, lam, nu = step_psi1(data, p)
        trial = p.replace(mu=mu, lam=lam, nu=nu)
        # the majorization step is monotone in exact arithmetic; guard against rounding
        for _ in range(30):
            if _fit_loglik(trial, data, sopts) >= current:
                break
            trial = p.replace(mu=0.5 * (trial.mu + p.mu), lam=0.5 * (trial.lam + p.lam),
                              nu=p.nu + 0.5 * math.remainder(trial.nu - p.nu, TWO_PI))
        else:
            trial = p
        p = trial.replace(sigma=step_sigma(data, trial))
        p, ok = step_psi2(data, p, model_tag, sopts, opts.alpha_max)
        if not ok and "circular-block step rejected at least once" not in flags:
            flags.append("circular-block step rejected at least once")
        current = _fit_loglik(p, data, sopts)
        trace.append(current)
        if _max_change(old, p, model_tag) < opts.tol:
            converged = True
            break
    p = _identifiability(p, model_tag, flags)
    final = _fit_loglik(p, data, sopts)
    gof = gof_ks(p, data, sopts).statistic if opts.compute_gof else None
    return FitReport(
        params=p, model_tag=model_tag, loglik=final, aic=aic(final, model_tag), gof_ks=gof,
        iterations=iterations, loglik_trace=trace, converged=converged, flags=flags,
    )


def ks_loglik(k: KSParams, data: Dataset, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """Log-likelihood of the Gaussian-tail limit model (Bessel-series constant)."""
    u = data.x - k.mu_of_theta(data.theta)
    expo = (
        -u * u / (2.0 * k.tau**2)
        + k.kappa1_star * np.cos(data.theta - k.mu1)
        + k.kappa2_star * np.cos(2.0 * (data.theta - k.mu2))
    )
    return float(np.sum(expo) - data.n * ks_log_normalizing_constant(k, opts))


def _gvm_natural_fit(theta: np.ndarray, n_grid: int = 2048):
    """Maximum likelihood for ``exp(a1 cos t + b1 sin t + a2 cos 2t + b2 sin 2t)``.

    The log-likelihood is concave in the natural parameters; its gradient is
    the sample mean of the statistics minus their model expectation, both
    evaluated by the trapezoidal rule.
    """
    grid = np.arange(n_grid) * (TWO_PI / n_grid)
    stats_grid = np.stack([np.cos(grid), np.sin(grid), np.cos(2 * grid), np.sin(2 * grid)])
    stats_mean = np.array([np.mean(np.cos(theta)), np.mean(np.sin(theta)),
                           np.mean(np.cos(2 * theta)), np.mean(np.sin(2 * theta))])

    def negll(eta):
        lw = eta @ stats_grid
        top = lw.max()
        w = np.exp(lw - top)
        tot = w.sum()
        logz = top + math.log(tot * TWO_PI / n_grid)
        return logz - eta @ stats_mean, stats_grid @ (w / tot) - stats_mean

    res = minimize(negll, np.zeros(4), jac=True, method="BFGS", options={"gtol": 1e-10})
    return res


def fit_ks(data: Dataset, opts: FitOptions = FitOptions()) -> FitReport:
    """Fit the Gaussian-tail limit model.

    The linear block separates: ``(mu, lam, nu)`` by least-squares cosine
    regression with ``tau^2`` the mean squared residual. The circular block is
    a concave maximization over the natural parameters of the two-harmonic
    exponential family.
    """
    if data.n < 10:
        raise PreconditionError(f"fitting needs at least 10 observations, got {data.n}")
    design = np.column_stack([np.ones(data.n), np.cos(data.theta), np.sin(data.theta)])
    beta, *_ = np.linalg.lstsq(design, data.x, rcond=None)
    resid = data.x - design @ beta
    tau = math.sqrt(float(np.mean(resid * resid)))
    if tau == 0.0:
        raise PreconditionError("x is an exact cosine function of theta: tau collapses to 0")
    res = _gvm_natural_fit(data.theta)
    a1, b1, a2, b2 = res.x
    k = KSParams(
        tau=tau,
        mu=float(beta[0]),
        lam=math.hypot(beta[1], beta[2]),
        nu=math.atan2(beta[2], beta[1]) % TWO_PI,
        kappa1_star=math.hypot(a1, b1),
        mu1=math.atan2(b1, a1) % TWO_PI,
        kappa2_star=math.hypot(a2, b2),
        mu2=(math.atan2(b2, a2) / 2.0) % math.pi,
    )
    # BFGS may stop on precision loss at the optimum; judge by the gradient instead
    converged = bool(res.success or np.max(np.abs(res.jac)) < 1e-7)
    flags: list[str] = []
    if k.lam < _IDENT_TOL:
        flags.append("nu non-identifiable (lam < 1e-4); reported as 0")
        k = KSParams(**{**k.as_dict(), "nu": 0.0})
    value = ks_loglik(k, data, opts.series)
    gof = gof_ks(k, data, opts.series).statistic if opts.compute_gof else None
    return FitReport(
        params=k, model_tag="KS", loglik=value, aic=aic(value, "KS"), gof_ks=gof,
        iterations=int(res.nit), loglik_trace=[value], converged=converged, flags=flags,
    )
