"""Generalized t-distribution on the cylinder.

The joint density of a linear variable ``x`` and an angle ``theta`` is

    f(x, theta) = C^-1 [1 + (x - mu(theta))^2 / (2 sigma^2)
                        - kappa1 cos(theta - mu1) - kappa2 cos 2(theta - mu2)]^(-(alpha+3)/2)

with ``mu(theta) = mu + lam cos(theta - nu)``. Integrating out ``x`` with a
Beta-function identity leaves a circular factor

    C_theta = int_0^2pi s(theta)^(-alpha/2-1) dtheta,
    s(theta) = 1 - kappa1 cos(theta - mu1) - kappa2 cos 2(theta - mu2),

so ``C = sqrt(2) sigma B(1/2, alpha/2+1) C_theta``. ``C_theta`` is evaluated by
an Appell F4 series or by periodic trapezoidal quadrature (spectrally
accurate for this smooth periodic integrand); the quadrature also serves as
the oracle for the series.

This module also hosts the marginals and conditionals, the Gaussian-tail
limit model (``KSParams``/``ks_limit_pdf``) and the map from a conditioned
trivariate t distribution to the nine cylinder parameters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, replace
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import betaln, gammaln, logsumexp, stdtr

from . import _dd
from .exceptions import (
    ConstraintError,
    ConvergenceError,
    DomainError,
    DomainWarning,
    PreconditionError,
)
from .specfun import DEFAULT_OPTIONS, SeriesOptions, appell_f4, bessel_i, gauss_2f1

__all__ = [
    "TWO_PI",
    "SERIES_SWITCH",
    "CylinderParams",
    "KSParams",
    "TrivariateTSpec",
    "derive_from_trivariate",
    "circular_base",
    "log_circular_constant",
    "circular_constant",
    "log_normalizing_constant",
    "normalizing_constant",
    "log_unnormalized_density",
    "log_pdf",
    "pdf",
    "marginal_theta_pdf",
    "marginal_theta_cdf",
    "marginal_x_pdf",
    "marginal_x_pdf_lambda0",
    "conditional_x_given_theta_pdf",
    "conditional_x_given_theta_cdf",
    "conditional_theta_given_x_pdf",
    "sub1_normalizing_constant",
    "ks_log_normalizing_constant",
    "ks_limit_pdf",
    "ks_limit_logpdf",
    "ks_marginal_theta_cdf",
]

TWO_PI = 2.0 * math.pi
# kappa1 + kappa2 above this switches C_theta from the F4 series to quadrature
SERIES_SWITCH = 0.95
_MAX_QUAD_NODES = 1 << 22


def _wrap(angle: float, period: float) -> float:
    r = math.fmod(float(angle), period)
    if r < 0:
        r += period
    if r >= period:
        r = 0.0
    return r


def _out(values):
    arr = np.asarray(values, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class CylinderParams:
    """The nine parameters of the cylinder density.

    Angles are canonicalized on construction: ``nu`` and ``mu1`` into
    ``[0, 2 pi)`` and ``mu2`` into ``[0, pi)``.

    Attributes
    ----------
    alpha : float
        Tail weight (degrees-of-freedom analogue), ``alpha >= -1``.
    sigma : float
        Linear scale, ``> 0``.
    mu : float
        Linear location.
    lam : float
        Amplitude of the cosine link between ``theta`` and the location of ``x``.
    nu : float
        Phase of that link.
    kappa1, mu1 : float
        First-harmonic concentration and location.
    kappa2, mu2 : float
        Second-harmonic concentration and location.
    """

    alpha: float
    sigma: float
    mu: float = 0.0
    lam: float = 0.0
    nu: float = 0.0
    kappa1: float = 0.0
    mu1: float = 0.0
    kappa2: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "sigma", "mu", "lam", "kappa1", "kappa2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "nu", _wrap(self.nu, TWO_PI))
        object.__setattr__(self, "mu1", _wrap(self.mu1, TWO_PI))
        object.__setattr__(self, "mu2", _wrap(self.mu2, math.pi))
        values = [getattr(self, f) for f in self.field_names()]
        if not all(math.isfinite(v) for v in values):
            raise ConstraintError(f"parameters must be finite: {self}")
        if self.sigma <= 0:
            raise ConstraintError(f"sigma must be positive, got {self.sigma}")
        if self.lam < 0 or self.kappa1 < 0 or self.kappa2 < 0:
            raise ConstraintError("lam, kappa1 and kappa2 must be nonnegative")
        if not self.kappa1 + self.kappa2 < 1.0:
            raise ConstraintError(
                f"kappa1 + kappa2 must be < 1, got {self.kappa1 + self.kappa2}"
            )
        if self.alpha < -1.0:
            raise ConstraintError(f"alpha must be >= -1, got {self.alpha}")

    @staticmethod
    def field_names() -> tuple[str, ...]:
        return ("alpha", "sigma", "mu", "lam", "nu", "kappa1", "mu1", "kappa2", "mu2")

    def mu_of_theta(self, theta):
        """Location of ``x`` given ``theta``: ``mu + lam cos(theta - nu)``."""
        return _out(self.mu + self.lam * np.cos(np.asarray(theta, dtype=float) - self.nu))

    def circular_base(self, theta):
        """``s(theta) = 1 - kappa1 cos(theta - mu1) - kappa2 cos 2(theta - mu2)``."""
        return _out(circular_base(theta, self.kappa1, self.mu1, self.kappa2, self.mu2))

    def bracket(self, x, theta):
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        resid = x - (self.mu + self.lam * np.cos(theta - self.nu))
        return _out(
            resid * resid / (2.0 * self.sigma**2)
            + circular_base(theta, self.kappa1, self.mu1, self.kappa2, self.mu2)
        )

    def replace(self, **changes) -> "CylinderParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CylinderParams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**{k: data[k] for k in cls.field_names() if k in data})


@dataclass(frozen=True)
class KSParams:
    """Parameters of the Gaussian-tail limit model.

    ``tau`` is the linear scale; ``kappa1_star`` and ``kappa2_star`` are the
    von Mises-type concentrations of the exponential-family density.
    """

    tau: float
    mu: float = 0.0
    lam: float = 0.0
    nu: float = 0.0
    kappa1_star: float = 0.0
    mu1: float = 0.0
    kappa2_star: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        for name in ("tau", "mu", "lam", "kappa1_star", "kappa2_star"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "nu", _wrap(self.nu, TWO_PI))
        object.__setattr__(self, "mu1", _wrap(self.mu1, TWO_PI))
        object.__setattr__(self, "mu2", _wrap(self.mu2, math.pi))
        if self.tau <= 0:
            raise ConstraintError(f"tau must be positive, got {self.tau}")
        if self.lam < 0 or self.kappa1_star < 0 or self.kappa2_star < 0:
            raise ConstraintError("lam, kappa1_star and kappa2_star must be nonnegative")

    @staticmethod
    def field_names() -> tuple[str, ...]:
        return ("tau", "mu", "lam", "nu", "kappa1_star", "mu1", "kappa2_star", "mu2")

    def mu_of_theta(self, theta):
        return _out(self.mu + self.lam * np.cos(np.asarray(theta, dtype=float) - self.nu))

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KSParams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**{k: data[k] for k in cls.field_names() if k in data})


@dataclass(frozen=True)
class TrivariateTSpec:
    """A trivariate t distribution and the radius it is conditioned on.

    The first coordinate becomes the linear variable; the other two are
    written in polar form ``(R cos theta, R sin theta)`` and ``R`` is fixed at
    ``r``.
    """

    alpha: float
    eta: tuple[float, float, float]
    sigma1: float
    sigma2: float
    sigma3: float
    rho12: float
    rho13: float
    rho23: float
    r: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(float(v) for v in self.eta))
        if len(self.eta) != 3:
            raise ConstraintError("eta must have three components")
        if self.alpha <= 0:
            raise ConstraintError(f"degrees of freedom must be positive, got {self.alpha}")
        if min(self.sigma1, self.sigma2, self.sigma3) <= 0:
            raise ConstraintError("scales must be positive")
        if not -1.0 < self.rho12 < 1.0:
            raise ConstraintError(f"rho12 must lie in (-1, 1), got {self.rho12}")
        if self.correlation_determinant() <= 0:
            raise ConstraintError("correlation matrix is not positive definite")
        if self.r <= 0:
            raise ConstraintError(f"r must be positive, got {self.r}")

    def correlation_determinant(self) -> float:
        a, b, c = self.rho12, self.rho13, self.rho23
        return 1.0 + 2.0 * a * b * c - a * a - b * b - c * c

    def covariance(self) -> np.ndarray:
        s = np.array([self.sigma1, self.sigma2, self.sigma3])
        corr = np.array(
            [
                [1.0, self.rho12, self.rho13],
                [self.rho12, 1.0, self.rho23],
                [self.rho13, self.rho23, 1.0],
            ]
        )
        return corr * np.outer(s, s)


def derive_from_trivariate(spec: TrivariateTSpec) -> CylinderParams:
    """Cylinder parameters of ``(X, Theta) | R = r`` for a trivariate t vector.

    Completing the square in the quadratic form gives

        1/2 Q = (x - mu(theta))^2 / (2 tau^2) - k1* cos(theta - mu1)
                - k2* cos 2(theta - mu2) + d + r^2 (b1 + b3) / 4

    and the t kernel ``(1 + Q / alpha)`` is proportional to
    ``gamma + 1/2 Q - d - r^2 (b1 + b3)/4`` with
    ``gamma = alpha/2 + d + r^2 (b1 + b3) / 4``; dividing through by ``gamma``
    yields ``kappa_i = k_i* / gamma`` and ``sigma^2 = gamma tau^2``.

    Raises
    ------
    ConstraintError
        If the induced concentrations violate ``kappa1 + kappa2 < 1``.
    """
    s1, s2, s3 = spec.sigma1, spec.sigma2, spec.sigma3
    r12, r13, r23 = spec.rho12, spec.rho13, spec.rho23
    e1, e2, e3 = spec.eta
    r = spec.r
    one_m = 1.0 - r23 * r23
    a1 = s1 / s2 * (r13 * r23 - r12) / one_m
    a2 = s1 / s3 * (r12 * r23 - r13) / one_m
    b1 = 1.0 / (s2 * s2 * one_m)
    b2 = r23 / (s2 * s3 * one_m)
    b3 = 1.0 / (s3 * s3 * one_m)
    tau2 = s1 * s1 * spec.correlation_determinant() / one_m

    mu = e1 + a1 * e2 + a2 * e3
    lam_c, lam_s = -a1 * r, -a2 * r
    k1_c, k1_s = r * (b1 * e2 - b2 * e3), r * (b3 * e3 - b2 * e2)
    k2_c, k2_s = r * r * (b3 - b1) / 4.0, r * r * b2 / 2.0
    d = (b1 * e2 * e2 + b3 * e3 * e3 - 2.0 * b2 * e2 * e3) / 2.0
    gamma = spec.alpha / 2.0 + d + r * r * (b1 + b3) / 4.0

    kappa1 = math.hypot(k1_c, k1_s) / gamma
    kappa2 = math.hypot(k2_c, k2_s) / gamma
    if not kappa1 + kappa2 < 1.0:
        raise ConstraintError(
            f"induced kappa1 + kappa2 = {kappa1 + kappa2:.6g} is not below 1"
        )
    return CylinderParams(
        alpha=spec.alpha,
        sigma=math.sqrt(gamma * tau2),
        mu=mu,
        lam=math.hypot(lam_c, lam_s),
        nu=math.atan2(lam_s, lam_c),
        kappa1=kappa1,
        mu1=math.atan2(k1_s, k1_c),
        kappa2=kappa2,
        mu2=0.5 * math.atan2(k2_s, k2_c),
    )


def circular_base(theta, kappa1, mu1, kappa2, mu2):
    theta = np.asarray(theta, dtype=float)
    return 1.0 - kappa1 * np.cos(theta - mu1) - kappa2 * np.cos(2.0 * (theta - mu2))


def periodic_log_integral(logf, opts: SeriesOptions = DEFAULT_OPTIONS, n_start=None):
    """log of ``int_0^2pi exp(logf(theta)) dtheta`` by the trapezoidal rule.

    Nodes are doubled from ``opts.quadrature_nodes`` until two successive
    values agree to ``opts.rel_tol``.
    """
    n = int(n_start or opts.quadrature_nodes)
    prev = None
    while n <= _MAX_QUAD_NODES:
        grid = np.arange(n) * (TWO_PI / n)
        cur = float(logsumexp(logf(grid))) + math.log(TWO_PI / n)
        if prev is not None and abs(cur - prev) <= opts.rel_tol:
            return cur
        prev = cur
        n *= 2
    raise ConvergenceError("periodic quadrature did not settle")


def periodic_cdf(logf, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    """CDF on ``[0, 2 pi)`` of the density proportional to ``exp(logf)``.

    The density is expanded in a Fourier series from equispaced samples and
    the series is integrated term by term, which is exact up to the
    truncated coefficients. Arguments in ``[0, 2 pi]`` are used as given (so
    ``F(2 pi) = 1``); others are wrapped into ``[0, 2 pi)`` first.
    """
    theta = np.asarray(theta, dtype=float)
    theta = np.where((theta >= 0.0) & (theta <= TWO_PI), theta, np.mod(theta, TWO_PI))
    n = max(64, int(opts.quadrature_nodes))
    while True:
        grid = np.arange(n) * (TWO_PI / n)
        lf = logf(grid)
        f = np.exp(lf - lf.max())
        c = np.fft.rfft(f) / n
        tail = np.abs(c[len(c) * 3 // 4 :]).max()
        if tail <= 1e-15 * abs(c[0]) or n >= _MAX_QUAD_NODES:
            break
        n *= 2
    keep = np.nonzero(np.abs(c) > 1e-17 * abs(c[0]))[0]
    k = keep[keep > 0]
    k = k[k < n // 2]
    a = 2.0 * c[k].real
    b = -2.0 * c[k].imag
    c0 = c[0].real
    kt = np.multiply.outer(theta, k)
    anti = c0 * theta + (np.sin(kt) * (a / k)).sum(-1) + ((1.0 - np.cos(kt)) * (b / k)).sum(-1)
    return _out(np.clip(anti / (TWO_PI * c0), 0.0, 1.0))


def _check_alpha(alpha: float):
    if not alpha > -2.0:
        raise DomainError(f"normalizing constant requires alpha > -2, got {alpha}")


# relative accuracy of one outer term of the float64 series
_TERM_EPS = 1e-13
# the double-double path carries about 30 digits; beyond this much
# cancellation (in log units) even that is not enough
_MAX_DD_CANCELLATION = 45.0


def _log_circular_series(alpha, kappa1, mu1, kappa2, mu2, opts):
    """Float64 sum of the outer series; returns ``(log C_theta, cancellation)``.

    ``cancellation`` is ``log(sum |term_j|) - log|sum term_j|``: the outer
    terms alternate through ``cos 2j(mu2 - mu1)``, and each lost e-fold
    multiplies the relative error of the result by ``e``.
    """
    a1 = alpha / 4.0 + 0.5
    a2 = alpha / 4.0 + 1.0
    z1, z2 = kappa1 * kappa1, kappa2 * kappa2
    logs = [appell_f4(a1, a2, 1.0, 1.0, z1, z2, opts, log=True)]
    signs = [1.0]
    if kappa1 > 0 and kappa2 > 0:
        shape = alpha / 2.0 + 1.0
        lg_shape = gammaln(shape)
        lk1, lk2 = math.log(kappa1 / 2.0), math.log(kappa2 / 2.0)
        small = 0
        for j in range(1, opts.max_terms + 1):
            weight = (
                gammaln(shape + 3 * j)
                - lg_shape
                - gammaln(2 * j + 1.0)
                - gammaln(j + 1.0)
                + 2 * j * lk1
                + j * lk2
            )
            f4 = appell_f4(
                (alpha + 6 * j) / 4.0 + 0.5,
                (alpha + 6 * j) / 4.0 + 1.0,
                2 * j + 1.0,
                j + 1.0,
                z1,
                z2,
                opts,
                log=True,
            )
            mag = math.log(2.0) + weight + f4
            cos_j = math.cos(2 * j * (mu2 - mu1))
            logs.append(mag + math.log(abs(cos_j)) if cos_j != 0 else -np.inf)
            signs.append(math.copysign(1.0, cos_j))
            # the stopping test uses the cosine-free magnitude so that an
            # accidental near-zero cosine cannot end the sum early
            running = logsumexp(logs, b=signs)
            if mag < math.log(opts.rel_tol) + running:
                small += 1
                if small >= 3:
                    break
            else:
                small = 0
        else:
            raise ConvergenceError("outer series of C_theta did not converge")
    total, sign = logsumexp(logs, b=signs, return_sign=True)
    if sign <= 0:
        return -np.inf, np.inf
    return math.log(TWO_PI) + float(total), float(logsumexp(logs) - total)


def _log_circular_series_dd(alpha, kappa1, mu1, kappa2, mu2, opts):
    """The same series summed in double-double arithmetic.

    Writing the outer weight and F4 together gives the triple sum
    ``C_theta / 2pi = sum_j eps_j cos 2j(mu2 - mu1) T_j`` with

        T_j = sum_{i,l} (a)_{3j+2i+2l} x^(2j+2i) y^(j+2l)
                        / ((2j+i)! i! (j+l)! l!),

    ``a = alpha/2 + 1``, ``x = kappa1/2``, ``y = kappa2/2``, ``eps_0 = 1`` and
    ``eps_j = 2``. Every ``T_j`` is a sum of positive terms, so it is
    computed to about 30 digits from double-double tables; the signed outer
    sum is then taken in mpmath. ``C_theta / 2pi >= 1`` (Jensen), which makes
    an absolute truncation threshold also a relative one.
    """
    shape = mpmath.mpf(alpha) / 2 + 1
    x = mpmath.mpf(kappa1) / 2
    y = mpmath.mpf(kappa2) / 2
    poch = _dd.RecurrenceTable(lambda k: shape + k)
    inv_fact = _dd.RecurrenceTable(lambda k: mpmath.mpf(1) / (k + 1))
    xpow = _dd.RecurrenceTable(lambda k: x)
    ypow = _dd.RecurrenceTable(lambda k: y)
    drop_bits = 110  # terms below 2^-110 of the largest one are skipped
    stop_log2 = math.log2(opts.rel_tol) - 20.0
    max_side = 16 * opts.max_terms

    def block(j, side):
        idx = np.arange(side)
        h1, l1, e1 = xpow.take(2 * j + 2 * idx)
        h, l, e = inv_fact.take(2 * j + idx)
        h1, l1 = _dd.mul(h1, l1, h, l)
        e1 = e1 + e
        h, l, e = inv_fact.take(idx)
        h1, l1 = _dd.mul(h1, l1, h, l)
        e1 = e1 + e
        h2, l2, e2 = ypow.take(j + 2 * idx)
        h, l, e = inv_fact.take(j + idx)
        h2, l2 = _dd.mul(h2, l2, h, l)
        e2 = e2 + e
        h, l, e = inv_fact.take(idx)
        h2, l2 = _dd.mul(h2, l2, h, l)
        e2 = e2 + e
        hp, lp, ep = poch.take(3 * j + 2 * np.arange(2 * side - 1))
        # hankel[i, l] = ep[i + l] without a gather
        hankel = np.lib.stride_tricks.sliding_window_view(ep, side)
        expo = e1[:, None] + e2[None, :] + hankel
        return (h1, l1, h2, l2, hp, lp), expo

    terms = []
    side = 32
    prev = math.inf
    j_max = opts.max_terms if (kappa1 > 0 and kappa2 > 0) else 0
    for j in range(j_max + 1):
        while True:
            tabs, expo = block(j, side)
            top = int(expo.max())
            edge = max(int(expo[-1, :].max()), int(expo[:, -1].max()))
            if edge < top - drop_bits:
                break
            side *= 2
            if side > max_side:
                raise ConvergenceError("double-double C_theta series did not converge")
        h1, l1, h2, l2, hp, lp = tabs
        ii, ll = np.nonzero(expo > top - drop_bits)
        h, l = _dd.mul(h1[ii], l1[ii], h2[ll], l2[ll])
        h, l = _dd.mul(h, l, hp[ii + ll], lp[ii + ll])
        shift = expo[ii, ll] - top
        sh, sl = _dd.pairwise_sum(np.ldexp(h, shift), np.ldexp(l, shift))
        terms.append((sh, sl, top))
        size = _dd.log2_of(sh, sl, top)
        if j > 0 and size < stop_log2 and size < prev:
            break
        prev = size
    else:
        if j_max > 0:
            raise ConvergenceError("outer double-double C_theta series did not converge")

    with mpmath.workdps(40):
        delta = mpmath.mpf(mu2) - mpmath.mpf(mu1)
        total = mpmath.mpf(0)
        mags = mpmath.mpf(0)
        for j, (sh, sl, top) in enumerate(terms):
            t = _dd.to_mpf(sh, sl, top) * (1 if j == 0 else 2)
            total += t * mpmath.cos(2 * j * delta)
            mags += t
        if total <= 0 or float(mpmath.log(mags / total)) > _MAX_DD_CANCELLATION:
            raise ConvergenceError("C_theta series cancels beyond double-double precision")
        return float(mpmath.log(2 * mpmath.pi * total))


def _series_is_accurate(cancellation: float, opts: SeriesOptions) -> bool:
    return cancellation + math.log(_TERM_EPS) <= math.log(opts.rel_tol)


def _log_circular_quadrature(alpha, kappa1, mu1, kappa2, mu2, opts):
    expo = alpha / 2.0 + 1.0
    return periodic_log_integral(
        lambda t: -expo * np.log(circular_base(t, kappa1, mu1, kappa2, mu2)), opts
    )


@lru_cache(maxsize=4096)
def _log_circular_constant_cached(alpha, kappa1, mu1, kappa2, mu2, opts, method):
    if method == "quadrature":
        return _log_circular_quadrature(alpha, kappa1, mu1, kappa2, mu2, opts)
    if method == "series":
        value, loss = _log_circular_series(alpha, kappa1, mu1, kappa2, mu2, opts)
        if _series_is_accurate(loss, opts):
            return value
        return _log_circular_series_dd(alpha, kappa1, mu1, kappa2, mu2, opts)
    if kappa1 + kappa2 > SERIES_SWITCH:
        return _log_circular_quadrature(alpha, kappa1, mu1, kappa2, mu2, opts)
    try:
        value, loss = _log_circular_series(alpha, kappa1, mu1, kappa2, mu2, opts)
    except ConvergenceError:
        warnings.warn(
            "C_theta series hit max_terms; falling back to quadrature", DomainWarning,
            stacklevel=3,
        )
        return _log_circular_quadrature(alpha, kappa1, mu1, kappa2, mu2, opts)
    if _series_is_accurate(loss, opts):
        return value
    # heavy cancellation in the outer sum: quadrature is both cheaper and
    # more accurate than re-summing in extended precision
    return _log_circular_quadrature(alpha, kappa1, mu1, kappa2, mu2, opts)


def log_circular_constant(
    alpha: float,
    kappa1: float,
    mu1: float,
    kappa2: float,
    mu2: float,
    opts: SeriesOptions = DEFAULT_OPTIONS,
    method: str = "auto",
) -> float:
    """log ``C_theta = log int_0^2pi s(theta)^(-alpha/2-1) dtheta``.

    Parameters
    ----------
    alpha, kappa1, mu1, kappa2, mu2 : float
        Raw arguments (not a ``CylinderParams``) so that shifted exponents such
        as ``alpha - 2k`` can be passed; requires ``alpha > -2``.
    opts : SeriesOptions
        Truncation policy.
    method : {"auto", "series", "quadrature"}
        ``"series"`` sums the F4 expansion, ``"quadrature"`` uses the
        trapezoidal rule, ``"auto"`` takes the series for
        ``kappa1 + kappa2 <= 0.95`` and quadrature otherwise (or when the
        series exhausts ``max_terms`` or cancels too strongly to meet
        ``opts.rel_tol``). The outer series alternates through
        ``cos 2j(mu2 - mu1)``; when float64 cannot absorb the resulting
        cancellation, ``"series"`` re-sums it in double-double arithmetic.
    """
    _check_alpha(alpha)
    if method not in ("auto", "series", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if kappa1 < 0 or kappa2 < 0 or not kappa1 + kappa2 < 1.0:
        raise DomainError("C_theta requires kappa1, kappa2 >= 0 and kappa1 + kappa2 < 1")
    return _log_circular_constant_cached(
        float(alpha), float(kappa1), float(mu1), float(kappa2), float(mu2), opts, method
    )


def circular_constant(alpha, kappa1, mu1, kappa2, mu2, opts=DEFAULT_OPTIONS, method="auto"):
    return math.exp(log_circular_constant(alpha, kappa1, mu1, kappa2, mu2, opts, method))


def _log_linear_factor(p: CylinderParams) -> float:
    # log of int (1 + u^2/(2 sigma^2))^(-(alpha+3)/2) du = sqrt(2) sigma B(1/2, alpha/2+1)
    return 0.5 * math.log(2.0) + math.log(p.sigma) + float(betaln(0.5, p.alpha / 2.0 + 1.0))


def log_normalizing_constant(
    p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS, method: str = "auto"
) -> float:
    """log of the normalizing constant ``C`` of the joint density."""
    return _log_linear_factor(p) + log_circular_constant(
        p.alpha, p.kappa1, p.mu1, p.kappa2, p.mu2, opts, method
    )


def normalizing_constant(
    p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS, method: str = "auto"
) -> float:
    """Normalizing constant ``C``; see :func:`log_circular_constant` for ``method``."""
    return math.exp(log_normalizing_constant(p, opts, method))


def log_unnormalized_density(p: CylinderParams, x, theta):
    """``-(alpha+3)/2 * log(bracket)``; the bracket is positive for valid ``p``."""
    br = np.asarray(p.bracket(x, theta))
    assert np.all(br > 0), "density bracket must be positive"
    return _out(-(p.alpha + 3.0) / 2.0 * np.log(br))


def log_pdf(p: CylinderParams, x, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    """Log joint density."""
    return _out(log_unnormalized_density(p, x, theta) - log_normalizing_constant(p, opts))


def pdf(p: CylinderParams, x, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    """Joint density of ``(x, theta)``."""
    return _out(np.exp(log_pdf(p, x, theta, opts)))


def marginal_theta_pdf(p: CylinderParams, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    """Circular marginal; depends on ``alpha``, ``kappa1``, ``mu1``, ``kappa2``, ``mu2`` only."""
    lc = log_circular_constant(p.alpha, p.kappa1, p.mu1, p.kappa2, p.mu2, opts)
    s = circular_base(theta, p.kappa1, p.mu1, p.kappa2, p.mu2)
    return _out(np.exp(-(p.alpha / 2.0 + 1.0) * np.log(s) - lc))


def marginal_theta_cdf(p: CylinderParams, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    """CDF of the circular marginal on ``[0, 2 pi)``."""
    expo = p.alpha / 2.0 + 1.0
    return periodic_cdf(
        lambda t: -expo * np.log(circular_base(t, p.kappa1, p.mu1, p.kappa2, p.mu2)),
        theta,
        opts,
    )


def marginal_x_pdf_lambda0(p: CylinderParams, x, opts: SeriesOptions = DEFAULT_OPTIONS):
    """Closed-form marginal density of ``x`` when ``lam = 0``.

    With ``g(x) = 1 + (x - mu)^2 / (2 sigma^2)``,

        f_X(x) = C^-1 g^(-(alpha+3)/2) D(x),

    where ``D(x)`` is ``C_theta`` evaluated at ``alpha + 1`` and concentrations
    ``kappa_i / g(x)``. The result is symmetric about ``mu``.
    """
    if p.lam != 0.0:
        raise PreconditionError("closed-form x marginal requires lam = 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    lc = log_normalizing_constant(p, opts)
    g = 1.0 + (xs - p.mu) ** 2 / (2.0 * p.sigma**2)
    out = np.empty_like(xs)
    for i, gi in np.ndenumerate(g):
        ld = log_circular_constant(
            p.alpha + 1.0, p.kappa1 / gi, p.mu1, p.kappa2 / gi, p.mu2, opts
        )
        out[i] = math.exp(ld - (p.alpha + 3.0) / 2.0 * math.log(gi) - lc)
    return _out(out.reshape(np.shape(x)))


def marginal_x_pdf(p: CylinderParams, x, opts: SeriesOptions = DEFAULT_OPTIONS):
    """Marginal density of ``x`` for any ``lam``, by periodic quadrature in ``theta``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    lc = log_normalizing_constant(p, opts)
    out = np.empty_like(xs)
    for i, xi in np.ndenumerate(xs):
        li = periodic_log_integral(lambda t: log_unnormalized_density(p, xi, t), opts)
        out[i] = math.exp(li - lc)
    return _out(out.reshape(np.shape(x)))


def _conditional_scale(p: CylinderParams, theta):
    # squared scale of x | theta is 2 sigma^2 s(theta)
    return p.sigma * np.sqrt(2.0 * circular_base(theta, p.kappa1, p.mu1, p.kappa2, p.mu2))


def conditional_x_given_theta_pdf(p: CylinderParams, x, theta):
    """Density of ``x`` given ``theta``: a location-scale t kernel.

    Location ``mu(theta)``, squared scale ``2 sigma^2 s(theta)``, exponent
    ``-(alpha+3)/2`` and normalizer ``sqrt(2) sigma B(1/2, alpha/2+1) s(theta)^(1/2)``.
    """
    _check_alpha(p.alpha)
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = circular_base(theta, p.kappa1, p.mu1, p.kappa2, p.mu2)
    u = x - p.mu - p.lam * np.cos(theta - p.nu)
    log_norm = _log_linear_factor(p) + 0.5 * np.log(s)
    return _out(np.exp(-(p.alpha + 3.0) / 2.0 * np.log1p(u * u / (2.0 * p.sigma**2 * s)) - log_norm))


def conditional_x_given_theta_cdf(p: CylinderParams, x, theta):
    """CDF of ``x`` given ``theta``.

    ``x | theta`` is ``mu(theta) + sigma sqrt(2 s(theta) / (alpha+2)) T`` with
    ``T`` a Student t variate on ``alpha + 2`` degrees of freedom.
    """
    _check_alpha(p.alpha)
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    df = p.alpha + 2.0
    scale = _conditional_scale(p, theta) / math.sqrt(df)
    return _out(stdtr(df, (x - p.mu - p.lam * np.cos(theta - p.nu)) / scale))


def conditional_theta_given_x_pdf(
    p: CylinderParams, theta, x: float, opts: SeriesOptions = DEFAULT_OPTIONS
):
    """Density of ``theta`` given ``x``.

    For ``lam = 0`` this is the circular kernel
    ``(1 - kappa1(x) cos(theta - mu1) - kappa2(x) cos 2(theta - mu2))^(-(alpha+3)/2)``
    with ``kappa_i(x) = kappa_i / (1 + (x - mu)^2 / (2 sigma^2))``, normalized by
    quadrature. For ``lam > 0`` the ratio ``pdf / marginal_x_pdf`` is used.
    """
    theta = np.asarray(theta, dtype=float)
    x = float(x)
    if p.lam == 0.0:
        g = 1.0 + (x - p.mu) ** 2 / (2.0 * p.sigma**2)
        k1, k2 = p.kappa1 / g, p.kappa2 / g
        lc = log_circular_constant(p.alpha + 1.0, k1, p.mu1, k2, p.mu2, opts, "quadrature")
        s = circular_base(theta, k1, p.mu1, k2, p.mu2)
        return _out(np.exp(-(p.alpha + 3.0) / 2.0 * np.log(s) - lc))
    li = periodic_log_integral(lambda t: log_unnormalized_density(p, x, t), opts)
    return _out(np.exp(log_unnormalized_density(p, x, theta) - li))


def sub1_normalizing_constant(p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """Normalizing constant for ``kappa2 = 0`` through a single 2F1.

    ``C2 = 2 sqrt(2) pi sigma B(1/2, alpha/2+1) 2F1(alpha/4+1/2, alpha/4+1; 1; kappa1^2)``.
    """
    if p.kappa2 != 0.0:
        raise PreconditionError("sub1_normalizing_constant requires kappa2 = 0")
    _check_alpha(p.alpha)
    f = gauss_2f1(p.alpha / 4.0 + 0.5, p.alpha / 4.0 + 1.0, 1.0, p.kappa1**2, opts)
    return math.exp(math.log(TWO_PI) + _log_linear_factor(p)) * f


def _ks_circular_sum(k: KSParams, opts: SeriesOptions) -> float:
    # I0(k1)I0(k2) + 2 sum_j I_j(k2) I_2j(k1) cos 2j(mu1 - mu2)
    total = bessel_i(0, k.kappa1_star, opts) * bessel_i(0, k.kappa2_star, opts)
    small = 0
    for j in range(1, opts.max_terms + 1):
        mag = 2.0 * bessel_i(j, k.kappa2_star, opts) * bessel_i(2 * j, k.kappa1_star, opts)
        total += mag * math.cos(2 * j * (k.mu1 - k.mu2))
        if mag < opts.rel_tol * abs(total):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise ConvergenceError("Bessel product series did not converge")


def ks_log_normalizing_constant(k: KSParams, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """log ``C1 = log[(2 pi)^(3/2) tau (I0 I0 + 2 sum_j I_j I_2j cos 2j(mu1 - mu2))]``."""
    return 1.5 * math.log(TWO_PI) + math.log(k.tau) + math.log(_ks_circular_sum(k, opts))


def ks_limit_logpdf(k: KSParams, x, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    u = x - k.mu - k.lam * np.cos(theta - k.nu)
    expo = (
        -u * u / (2.0 * k.tau**2)
        + k.kappa1_star * np.cos(theta - k.mu1)
        + k.kappa2_star * np.cos(2.0 * (theta - k.mu2))
    )
    return _out(expo - ks_log_normalizing_constant(k, opts))


def ks_limit_pdf(k: KSParams, x, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    """Density of the Gaussian-tail exponential-family limit model."""
    return _out(np.exp(ks_limit_logpdf(k, x, theta, opts)))


def ks_marginal_theta_cdf(k: KSParams, theta, opts: SeriesOptions = DEFAULT_OPTIONS):
    return periodic_cdf(
        lambda t: k.kappa1_star * np.cos(t - k.mu1) + k.kappa2_star * np.cos(2.0 * (t - k.mu2)),
        theta,
        opts,
    )
