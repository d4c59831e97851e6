"""Special functions behind the normalizing constants and moment formulas.

Every infinite series here follows the same truncation contract, carried by
:class:`SeriesOptions`: summation stops once the absolute term (or, for
double series, the absolute anti-diagonal sum) has stayed below
``rel_tol * |running sum|`` for three consecutive indices. Reaching
``max_terms`` first raises :class:`~cylt.exceptions.ConvergenceError`.

Only the argument ranges the cylinder model actually reaches are supported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import ConvergenceError, DomainError, DomainWarning

__all__ = [
    "SeriesOptions",
    "DEFAULT_OPTIONS",
    "pochhammer",
    "gauss_2f1",
    "appell_f4",
    "bessel_i",
    "assoc_legendre",
]

# consecutive small terms required before a series is declared converged
_GUARD = 3
# sqrt(z1) + sqrt(z2) above this triggers a DomainWarning in appell_f4
F4_WARN_RADIUS = 0.95
_LEGENDRE_MAX_NODES = 1 << 14


@dataclass(frozen=True)
class SeriesOptions:
    """Truncation policy shared by all series and quadrature evaluations.

    Attributes
    ----------
    rel_tol : float
        Relative term-size stopping threshold, in (0, 1).
    max_terms : int
        Hard cap on the number of terms per summation index (>= 8).
    quadrature_nodes : int
        Starting node count for periodic quadratures (>= 16); doubled until
        two successive evaluations agree to ``rel_tol``.
    """

    rel_tol: float = 1e-12
    max_terms: int = 500
    quadrature_nodes: int = 2048

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 8:
            raise ValueError(f"max_terms must be an integer >= 8, got {self.max_terms}")
        if int(self.quadrature_nodes) != self.quadrature_nodes or self.quadrature_nodes < 16:
            raise ValueError(
                f"quadrature_nodes must be an integer >= 16, got {self.quadrature_nodes}"
            )


DEFAULT_OPTIONS = SeriesOptions()


def _is_nonpositive_integer(c: float) -> bool:
    return c <= 0 and float(c).is_integer()


def pochhammer(c: float, j: int) -> float:
    """Rising factorial ``c (c+1) ... (c+j-1)``, with ``(c)_0 = 1``.

    Computed as a left-to-right product, so ``pochhammer(c, j + 1)`` equals
    ``pochhammer(c, j) * (c + j)`` bit for bit. Large arguments overflow to
    ``inf``.
    """
    if j < 0 or int(j) != j:
        raise ValueError(f"j must be a nonnegative integer, got {j}")
    out = 1.0
    for k in range(int(j)):
        out *= c + k
    return out


def _log_pochhammer_table(c: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """log|(c)_k| and sign((c)_k) for k = 0..n-1."""
    factors = c + np.arange(n - 1, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.concatenate(([0.0], np.cumsum(np.log(np.abs(factors)))))
    signs = np.concatenate(([1.0], np.cumprod(np.sign(factors))))
    return logs, signs


def _log_power_table(z: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    if z == 0.0:
        out = np.full(n, -np.inf)
        out[0] = 0.0
        return out
    return k * math.log(z)


def gauss_2f1(a: float, b: float, c: float, z: float, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """Gauss hypergeometric function by its defining power series.

    Parameters
    ----------
    a, b, c : float
        Series parameters; ``c`` must not be a nonpositive integer.
    z : float
        Argument with ``|z| < 1``.
    opts : SeriesOptions
        Truncation policy.

    Raises
    ------
    DomainError
        If ``|z| >= 1`` or ``c`` is a nonpositive integer.
    ConvergenceError
        If ``opts.max_terms`` terms do not reach ``opts.rel_tol``.
    """
    if not abs(z) < 1.0:
        raise DomainError(f"2F1 series requires |z| < 1, got z={z}")
    if _is_nonpositive_integer(c):
        raise DomainError(f"c must not be a nonpositive integer, got c={c}")
    total = 1.0
    term = 1.0
    small = 0
    for n in range(opts.max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if abs(term) < opts.rel_tol * abs(total):
            small += 1
            if small >= _GUARD:
                return total
        else:
            small = 0
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) did not converge in {opts.max_terms} terms"
    )


def appell_f4(
    a1: float,
    a2: float,
    b1: float,
    b2: float,
    z1: float,
    z2: float,
    opts: SeriesOptions = DEFAULT_OPTIONS,
    log: bool = False,
) -> float:
    """Appell's fourth double hypergeometric function F4.

    The double series is summed along anti-diagonals ``i + j = n``; the
    truncation test is applied to the anti-diagonal sums. All arithmetic is
    done in log space with a running scale, so large Pochhammer products do
    not overflow before they are combined.

    Parameters
    ----------
    a1, a2, b1, b2 : float
        Series parameters; ``b1`` and ``b2`` must not be nonpositive integers.
    z1, z2 : float
        Nonnegative arguments with ``sqrt(z1) + sqrt(z2) < 1``.
    opts : SeriesOptions
        Truncation policy.
    log : bool
        Return the natural log of the value instead (requires a positive sum).

    Raises
    ------
    DomainError
        Outside the convergence region or for invalid ``b1``/``b2``.
    ConvergenceError
        If the anti-diagonal sums do not settle within ``opts.max_terms``.

    Warns
    -----
    DomainWarning
        When ``sqrt(z1) + sqrt(z2)`` exceeds 0.95, where convergence is slow and
        callers should prefer a quadrature route.
    """
    if z1 < 0 or z2 < 0:
        raise DomainError(f"F4 arguments must be nonnegative, got z1={z1}, z2={z2}")
    radius = math.sqrt(z1) + math.sqrt(z2)
    if not radius < 1.0:
        raise DomainError(f"F4 series requires sqrt(z1)+sqrt(z2) < 1, got {radius}")
    if _is_nonpositive_integer(b1) or _is_nonpositive_integer(b2):
        raise DomainError(f"b1, b2 must not be nonpositive integers, got {b1}, {b2}")
    if radius > F4_WARN_RADIUS:
        warnings.warn(
            f"F4 evaluated at sqrt(z1)+sqrt(z2)={radius:.4f}; convergence is slow "
            "near the boundary, use a quadrature route instead",
            DomainWarning,
            stacklevel=2,
        )

    n_max = opts.max_terms
    idx = np.arange(n_max, dtype=float)
    pa1, sa1 = _log_pochhammer_table(a1, n_max)
    pa2, sa2 = _log_pochhammer_table(a2, n_max)
    pb1, sb1 = _log_pochhammer_table(b1, n_max)
    pb2, sb2 = _log_pochhammer_table(b2, n_max)
    fact = gammaln(idx + 1.0)
    # row/column factors z^i / ((b)_i i!)
    la = _log_power_table(z1, n_max) - pb1 - fact
    lb = _log_power_table(z2, n_max) - pb2 - fact
    lp = pa1 + pa2
    sp = sa1 * sa2

    scale = -np.inf  # running sum is acc * exp(scale)
    acc = 0.0
    small = 0
    for n in range(n_max):
        i = np.arange(n + 1)
        logs = la[i] + lb[n - i] + lp[n]
        signs = sb1[i] * sb2[n - i] * sp[n]
        finite = np.isfinite(logs) & (signs != 0)
        if finite.any():
            m = logs[finite].max()
            diag = float(np.sum(signs[finite] * np.exp(logs[finite] - m)))
        else:
            m, diag = -np.inf, 0.0
        if diag == 0.0:
            contrib = 0.0
        elif m > scale:
            acc = acc * math.exp(scale - m) if np.isfinite(scale) else 0.0
            scale = m
            contrib = diag
        else:
            contrib = diag * math.exp(m - scale)
        acc += contrib
        if abs(contrib) < opts.rel_tol * abs(acc):
            small += 1
            if small >= _GUARD:
                break
        else:
            small = 0
    else:
        raise ConvergenceError(
            f"F4({a1}, {a2}; {b1}, {b2}; {z1}, {z2}) did not converge in {n_max} "
            "anti-diagonals"
        )
    if log:
        if acc <= 0:
            raise DomainError("log requested for a non-positive F4 value")
        return scale + math.log(acc)
    return acc * math.exp(scale)


def bessel_i(j: int, z: float, opts: SeriesOptions = DEFAULT_OPTIONS) -> float:
    """Modified Bessel function of the first kind ``I_j(z)`` for integer order.

    Uses the ascending series ``sum_r (z/2)^(2r+j) / (r! (r+j)!)``; the first
    term is formed in log space so moderately large ``z`` and ``j`` are safe.
    """
    if j < 0 or int(j) != j:
        raise ValueError(f"order must be a nonnegative integer, got {j}")
    j = int(j)
    if z == 0.0:
        return 1.0 if j == 0 else 0.0
    sign = -1.0 if (z < 0 and j % 2 == 1) else 1.0
    half = abs(z) / 2.0
    term = math.exp(j * math.log(half) - math.lgamma(j + 1.0))
    total = term
    sq = half * half
    small = 0
    for r in range(opts.max_terms):
        term *= sq / ((r + 1.0) * (r + 1.0 + j))
        total += term
        if term < opts.rel_tol * total:
            small += 1
            if small >= _GUARD:
                return sign * total
        else:
            small = 0
    raise ConvergenceError(f"I_{j}({z}) did not converge in {opts.max_terms} terms")


def assoc_legendre(nu: float, m: int, z: float, rel_tol: float = 1e-13) -> complex:
    """Associated Legendre function ``P_nu^m(z)`` for ``z <= -1``.

    Evaluates the Laplace-type integral

        P_nu^m(z) = (nu+1)_m / pi * int_0^pi (z + sqrt(z^2-1) cos(phi))^nu cos(m phi) dphi

    by Gauss-Legendre quadrature with node doubling. For ``z <= -1`` the base
    is negative on the whole range, so the power is taken on the principal
    branch, ``|base|^nu * exp(i pi nu)``, and both parts are returned as a
    complex number. Callers choose how to remove the phase.

    Raises
    ------
    DomainError
        If ``z > -1``.
    ConvergenceError
        If the quadrature has not settled at 16384 nodes.
    """
    if z > -1.0:
        raise DomainError(f"assoc_legendre supports z <= -1 only, got z={z}")
    if m < 0 or int(m) != m:
        raise ValueError(f"order m must be a nonnegative integer, got {m}")
    root = math.sqrt(z * z - 1.0)
    prefactor = pochhammer(nu + 1.0, int(m)) / math.pi
    phase = complex(math.cos(math.pi * nu), math.sin(math.pi * nu))

    def integral(n_nodes: int) -> tuple[float, float]:
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        phi = 0.5 * math.pi * (x + 1.0)
        base = -(z + root * np.cos(phi))  # magnitude of the negative base
        mag = np.exp(nu * np.log(base))
        return (
            0.5 * math.pi * float(np.dot(w, mag * np.cos(m * phi))),
            0.5 * math.pi * float(np.dot(w, mag)),
        )

    n_nodes = 32
    prev, _ = integral(n_nodes)
    while n_nodes < _LEGENDRE_MAX_NODES:
        n_nodes *= 2
        cur, size = integral(n_nodes)
        # cancellation can make the value itself ~0, so compare against |integrand|
        if abs(cur - prev) <= rel_tol * size:
            return prefactor * cur * phase
        prev = cur
    raise ConvergenceError(f"P_{nu}^{m}({z}) quadrature did not settle")
