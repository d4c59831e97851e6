"""Modes, moments, circular-linear correlation, skewness and regression."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import betaln

from .exceptions import BoundaryWarning, PreconditionError
from .model import (
    TWO_PI,
    CylinderParams,
    circular_base,
    log_circular_constant,
    log_normalizing_constant,
)
from .specfun import DEFAULT_OPTIONS, SeriesOptions, assoc_legendre, gauss_2f1, pochhammer

__all__ = [
    "ModeSet",
    "TrigMoments",
    "find_modes",
    "mode_function",
    "mode_equation",
    "mode_curvature",
    "trig_moment",
    "cross_moment",
    "sub1_moment_closed_form",
    "circular_linear_correlation",
    "skewness_components",
    "skewness_x",
    "regression_mean",
    "regression_variance",
]

_CASE_TOL = 1e-12
_NUMERIC_GRID = 4096


@dataclass
class ModeSet:
    """Modes ``(x, theta)`` of the joint density.

    ``classification`` is ``"unimodal"`` or ``"bimodal"``; ``method`` records
    whether the closed forms or the numeric root search produced the modes;
    ``boundary`` is set when the concentrations sit exactly on the
    unimodal/bimodal boundary.
    """

    modes: list[tuple[float, float]]
    classification: str
    method: str
    boundary: bool = False

    @property
    def thetas(self) -> list[float]:
        return [t for _, t in self.modes]


@dataclass
class TrigMoments:
    """Cosine and sine moments of order ``m`` under the ``k``-tilted marginal."""

    m: int
    k: int
    cos_moment: float
    sin_moment: float


def mode_function(p: CylinderParams, theta):
    """``kappa1 cos(theta - mu1) + kappa2 cos 2(theta - mu2)``; its maxima are the circular modes."""
    theta = np.asarray(theta, dtype=float)
    return p.kappa1 * np.cos(theta - p.mu1) + p.kappa2 * np.cos(2.0 * (theta - p.mu2))


def mode_equation(p: CylinderParams, theta):
    """Stationarity condition ``kappa1 sin(theta - mu1) + 2 kappa2 sin 2(theta - mu2)``."""
    theta = np.asarray(theta, dtype=float)
    return p.kappa1 * np.sin(theta - p.mu1) + 2.0 * p.kappa2 * np.sin(2.0 * (theta - p.mu2))


def mode_curvature(p: CylinderParams, theta):
    """``h(theta) = kappa1 cos(theta - mu1) + 4 kappa2 cos 2(theta - mu2)``; positive at maxima."""
    theta = np.asarray(theta, dtype=float)
    return p.kappa1 * np.cos(theta - p.mu1) + 4.0 * p.kappa2 * np.cos(2.0 * (theta - p.mu2))


def _closed_form_case(p: CylinderParams):
    offset = math.fmod(p.mu2 - p.mu1, math.pi)
    if offset < 0:
        offset += math.pi
    for case in (0.0, 0.25, 0.5, 0.75, 1.0):
        if abs(offset - case * math.pi) < _CASE_TOL:
            return case % 1.0
    return None


def _table_thetas(k1: float, k2: float, case: float):
    """Modes relative to mu1 for the four tabulated second-harmonic offsets."""
    if k2 == 0.0:
        return [0.0], False
    if case in (0.0, 0.5):
        bound = 4.0 * k2
    else:
        bound = 2.0 * k2
    boundary = math.isclose(bound, k1, rel_tol=1e-12, abs_tol=0.0)
    bimodal = bound > k1 and not boundary
    if case == 0.0:
        return ([0.0, math.pi] if bimodal else [0.0]), boundary
    if case == 0.5:
        if not bimodal:
            return [0.0], boundary
        t0 = math.acos(k1 / (4.0 * k2))
        return [t0, TWO_PI - t0], boundary
    root = math.sqrt(k1 * k1 + 32.0 * k2 * k2)
    t1 = math.asin((-k1 + root) / (8.0 * k2))
    t2 = math.asin(min(1.0, (k1 + root) / (8.0 * k2))) if bimodal else None
    if case == 0.25:
        return ([t1, math.pi + t2] if bimodal else [t1]), boundary
    return ([math.pi - t2, TWO_PI - t1] if bimodal else [TWO_PI - t1]), boundary


def _numeric_thetas(p: CylinderParams, n_grid: int = _NUMERIC_GRID):
    grid = np.arange(n_grid + 1) * (TWO_PI / n_grid)
    g = mode_equation(p, grid)
    found = []
    for i in range(n_grid):
        lo, hi = g[i], g[i + 1]
        # m'(theta) = -g(theta): a maximum is where g crosses from - to +
        if lo < 0.0 <= hi:
            if hi == 0.0:
                root = grid[i + 1]
            else:
                root = brentq(lambda t: float(mode_equation(p, t)), grid[i], grid[i + 1],
                              xtol=1e-15, rtol=4 * np.finfo(float).eps)
            if mode_curvature(p, root) > 0:
                found.append(math.fmod(root, TWO_PI))
    out = []
    for t in sorted(found):
        if not any(abs(math.remainder(t - u, TWO_PI)) < 1e-9 for u in out):
            out.append(t)
    return out


def find_modes(p: CylinderParams, method: str = "auto") -> ModeSet:
    """Modes of the joint density.

    For fixed ``theta`` the density peaks at ``x = mu(theta)``, so the modes are
    ``(mu(theta*), theta*)`` with ``theta*`` the local maxima of
    :func:`mode_function`.

    Parameters
    ----------
    p : CylinderParams
    method : {"auto", "closed_form", "numeric"}
        ``"closed_form"`` applies the tabulated solutions, which exist when
        ``mu2 - mu1`` is 0, pi/4, pi/2 or 3pi/4 (mod pi). ``"numeric"`` scans a
        4096-point grid for sign changes of :func:`mode_equation` and refines
        them with Brent's method. ``"auto"`` uses the closed form when it
        applies.

    Raises
    ------
    PreconditionError
        If ``kappa1 = kappa2 = 0`` (uniform circular part, no isolated mode),
        or ``method="closed_form"`` for an untabulated offset.

    Warns
    -----
    BoundaryWarning
        When ``4 kappa2 = kappa1`` (or ``2 kappa2 = kappa1`` for the pi/4
        offsets); the result is reported unimodal with ``boundary=True``.
    """
    if p.kappa1 == 0.0 and p.kappa2 == 0.0:
        raise PreconditionError("circular part is uniform; modes are not isolated")
    if method not in ("auto", "closed_form", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    case = _closed_form_case(p) if method != "numeric" else None
    if method == "closed_form" and case is None:
        raise PreconditionError("no closed form for this mu2 - mu1 offset")
    boundary = False
    if case is not None:
        rel, boundary = _table_thetas(p.kappa1, p.kappa2, case)
        thetas = sorted(math.fmod(t + p.mu1, TWO_PI) for t in rel)
        used = "closed_form"
        if boundary:
            warnings.warn("concentrations sit on the modality boundary", BoundaryWarning,
                          stacklevel=2)
    else:
        thetas = _numeric_thetas(p)
        used = "numeric"
    modes = [(float(p.mu_of_theta(t)), float(t)) for t in thetas]
    return ModeSet(
        modes=modes,
        classification="bimodal" if len(modes) == 2 else "unimodal",
        method=used,
        boundary=boundary,
    )


def _moment_exponent_check(p: CylinderParams, k: int):
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a nonnegative integer, got {k}")
    if not k < p.alpha / 2.0 + 1.0:
        raise PreconditionError(f"moment of order 2k={2 * k} does not exist for alpha={p.alpha}")


def _tilted_weights(p: CylinderParams, k: int, opts: SeriesOptions):
    """Grid and normalized weights of the density proportional to s^-(alpha/2-k+1)."""
    expo = p.alpha / 2.0 - k + 1.0
    n = opts.quadrature_nodes
    prev = None
    while True:
        grid = np.arange(n) * (TWO_PI / n)
        lw = -expo * np.log(circular_base(grid, p.kappa1, p.mu1, p.kappa2, p.mu2))
        w = np.exp(lw - lw.max())
        w /= w.sum()
        probe = np.array([w @ np.cos(grid), w @ np.sin(grid), w @ np.cos(2 * grid)])
        if prev is not None and np.max(np.abs(probe - prev)) <= opts.rel_tol:
            return grid, w
        prev = probe
        n *= 2


def trig_moment(p: CylinderParams, m: int, k: int = 0, opts: SeriesOptions = DEFAULT_OPTIONS) -> TrigMoments:
    """``E cos(m Theta)`` and ``E sin(m Theta)`` under the density proportional to
    ``s(theta)^-(alpha/2 - k + 1)``; ``k = 0`` gives the circular marginal.

    Evaluated by the trapezoidal rule, which converges geometrically for this
    smooth periodic integrand.
    """
    _moment_exponent_check(p, k)
    if m < 0 or int(m) != m:
        raise ValueError(f"m must be a nonnegative integer, got {m}")
    grid, w = _tilted_weights(p, k, opts)
    return TrigMoments(m=m, k=k, cos_moment=float(w @ np.cos(m * grid)),
                       sin_moment=float(w @ np.sin(m * grid)))


def _log_cross_factor(p: CylinderParams, k: int, opts: SeriesOptions) -> float:
    return (
        log_circular_constant(p.alpha - 2 * k, p.kappa1, p.mu1, p.kappa2, p.mu2, opts)
        - log_normalizing_constant(p, opts)
        + (k + 0.5) * math.log(2.0)
        + (2 * k + 1) * math.log(p.sigma)
        + float(betaln(k + 0.5, p.alpha / 2.0 - k + 1.0))
    )


def cross_moment(
    p: CylinderParams,
    m: int,
    k: int,
    harmonic: str = "cos",
    opts: SeriesOptions = DEFAULT_OPTIONS,
) -> float:
    """``E[(X - mu(Theta))^(2k) cos(m Theta)]`` (or ``sin``).

    Integrating ``x`` out analytically leaves
    ``C_theta,k / C * 2^(k+1/2) sigma^(2k+1) B(k+1/2, alpha/2-k+1)`` times the
    ``k``-tilted trigonometric moment, where ``C_theta,k`` is ``C_theta`` at
    ``alpha - 2k``.
    """
    if harmonic not in ("cos", "sin"):
        raise ValueError("harmonic must be 'cos' or 'sin'")
    tm = trig_moment(p, m, k, opts)
    factor = math.exp(_log_cross_factor(p, k, opts))
    return factor * (tm.cos_moment if harmonic == "cos" else tm.sin_moment)


def sub1_moment_closed_form(
    p: CylinderParams, m: int, k: int, opts: SeriesOptions = DEFAULT_OPTIONS
) -> float:
    """``E[(X - mu(Theta))^(2k) cos m(Theta - mu1)]`` for ``kappa2 = 0``, via a
    Legendre function.

    With ``v = alpha/2 - k`` and ``z = (1 - kappa1^2)^(-1/2)`` the moment is

        2^k sigma^2k B(k+1/2, v+1) P(z) (1-kappa1^2)^(-(v+1)/2)
        / [B(1/2, alpha/2+1) 2F1(alpha/4+1/2, alpha/4+1; 1; kappa1^2) (v-m+1)_m]

    where ``P(z) = P_v^m(z)`` for ``z >= 1``. The Legendre function is
    evaluated at ``-z`` by :func:`~cylt.specfun.assoc_legendre` on the
    principal branch, which carries the phase ``exp(i pi (m + v))``; that phase
    is divided out here. The quadrature oracle confirms this sign convention.

    Falls back to :func:`cross_moment` (with a warning) when ``(v-m+1)_m = 0``
    or the phase-corrected value keeps an imaginary part above 1e-8 relative.
    """
    if p.kappa2 != 0.0:
        raise PreconditionError("closed-form moments require kappa2 = 0")
    _moment_exponent_check(p, k)
    v = p.alpha / 2.0 - k
    denom_poch = pochhammer(v - m + 1.0, m)

    def fallback(reason: str) -> float:
        warnings.warn(f"closed-form moment unavailable ({reason}); using quadrature",
                      RuntimeWarning, stacklevel=3)
        c = cross_moment(p, m, k, "cos", opts)
        s = cross_moment(p, m, k, "sin", opts)
        return math.cos(m * p.mu1) * c + math.sin(m * p.mu1) * s

    if denom_poch == 0.0:
        return fallback("(v-m+1)_m vanishes")
    k1sq = p.kappa1 * p.kappa1
    z = 1.0 / math.sqrt(1.0 - k1sq)
    legendre = assoc_legendre(v, m, -z) * cmath.exp(-1j * math.pi * (m + v))
    if abs(legendre.imag) > 1e-8 * max(abs(legendre.real), 1e-300):
        return fallback("residual imaginary part")
    log_ratio = (
        k * math.log(2.0)
        + 2 * k * math.log(p.sigma)
        + float(betaln(k + 0.5, v + 1.0))
        - float(betaln(0.5, p.alpha / 2.0 + 1.0))
        - (v + 1.0) / 2.0 * math.log1p(-k1sq)
    )
    f21 = gauss_2f1(p.alpha / 4.0 + 0.5, p.alpha / 4.0 + 1.0, 1.0, k1sq, opts)
    return math.exp(log_ratio) * legendre.real / (f21 * denom_poch)


def circular_linear_correlation(p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """Squared circular-linear correlation ``R^2`` between ``X`` and ``Theta``.

    For ``kappa2 = 0`` this is ``lam^2 U / (q + lam^2 U)`` with
    ``U = (1-p2)/2 sin^2(mu1-nu) + ((1+p2)/2 - p1^2) cos^2(mu1-nu)``, where
    ``p_m = E cos m(Theta - mu1)`` and ``q = E (X - mu(Theta))^2`` come from the
    Legendre closed form. Otherwise the three Pearson correlations of ``X``,
    ``cos Theta`` and ``sin Theta`` are computed from moments.
    """
    if not p.alpha > 0:
        raise PreconditionError("second moments of X require alpha > 0")
    if p.lam == 0.0:
        return 0.0
    if p.kappa2 == 0.0:
        p1 = sub1_moment_closed_form(p, 1, 0, opts)
        p2 = sub1_moment_closed_form(p, 2, 0, opts)
        q = sub1_moment_closed_form(p, 0, 1, opts)
        d = p.mu1 - p.nu
        u = 0.5 * (1.0 - p2) * math.sin(d) ** 2 + (0.5 * (1.0 + p2) - p1 * p1) * math.cos(d) ** 2
        return p.lam**2 * u / (q + p.lam**2 * u)

    grid, w = _tilted_weights(p, 0, opts)
    q = cross_moment(p, 0, 1, "cos", opts)
    c, s = np.cos(grid), np.sin(grid)
    loc = p.mu + p.lam * np.cos(grid - p.nu)
    ex, ec, es = w @ loc, w @ c, w @ s
    var_x = w @ (loc * loc) + q - ex * ex
    var_c, var_s = w @ (c * c) - ec * ec, w @ (s * s) - es * es
    cov_cs = w @ (c * s) - ec * es
    r_xc = (w @ (loc * c) - ex * ec) / math.sqrt(var_x * var_c)
    r_xs = (w @ (loc * s) - ex * es) / math.sqrt(var_x * var_s)
    r_cs = cov_cs / math.sqrt(var_c * var_s)
    return float((r_xc**2 + r_xs**2 - 2.0 * r_cs * r_xc * r_xs) / (1.0 - r_cs**2))


def skewness_components(p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS) -> dict:
    """The ingredients of the skewness of ``X``.

    ``v1 = Var cos(Theta - nu)``, ``v2 = Cov[(X - mu(Theta))^2, cos(Theta - nu)]``,
    ``v3`` the third central moment of ``cos(Theta - nu)`` and
    ``q = E (X - mu(Theta))^2``.
    """
    if not p.alpha > 1:
        raise PreconditionError("third moments of X require alpha > 1")

    def ecos(m):
        tm = trig_moment(p, m, 0, opts)
        return math.cos(m * p.nu) * tm.cos_moment + math.sin(m * p.nu) * tm.sin_moment

    e1, e2, e3 = ecos(1), ecos(2), ecos(3)
    ec2 = 0.5 * (1.0 + e2)
    ec3 = 0.25 * (3.0 * e1 + e3)
    q = cross_moment(p, 0, 1, "cos", opts)
    eps2_c = math.cos(p.nu) * cross_moment(p, 1, 1, "cos", opts) + math.sin(
        p.nu
    ) * cross_moment(p, 1, 1, "sin", opts)
    return {
        "v1": ec2 - e1 * e1,
        "v2": eps2_c - q * e1,
        "v3": ec3 - 3.0 * e1 * ec2 + 2.0 * e1**3,
        "q": q,
    }


def skewness_x(p: CylinderParams, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """Skewness of the marginal of ``X``: ``(3 v2 lam + v3 lam^3) / (v1 lam^2 + q)^(3/2)``."""
    c = skewness_components(p, opts)
    lam = p.lam
    return (3.0 * c["v2"] * lam + c["v3"] * lam**3) / (c["v1"] * lam**2 + c["q"]) ** 1.5


def regression_mean(p: CylinderParams, theta):
    """``E(X | Theta = theta) = mu + lam cos(theta - nu)``.

    The conditional law is t with ``alpha + 2`` degrees of freedom, so the mean
    exists only for ``alpha > -1``.
    """
    if not p.alpha > -1:
        raise PreconditionError("conditional mean requires alpha > -1")
    return p.mu_of_theta(theta)


def regression_variance(p: CylinderParams, theta):
    """``Var(X | Theta = theta) = 2 sigma^2 / alpha * s(theta)``; requires ``alpha > 0``."""
    if not p.alpha > 0:
        raise PreconditionError("conditional variance requires alpha > 0")
    s = circular_base(theta, p.kappa1, p.mu1, p.kappa2, p.mu2)
    out = 2.0 * p.sigma**2 / p.alpha * s
    return float(out) if np.ndim(out) == 0 else out
