"""Vectorized double-double arithmetic for cancellation-prone series.

A value is carried as ``(hi + lo) * 2**ex`` with float64 arrays ``hi``, ``lo``
and an integer array ``ex``; ``hi`` stays in ``[0.5, 1)`` for table entries so
that products of a handful of entries never leave the normal float range.
Products are error-free (Dekker splitting), so a product of k table entries
carries a relative error of order ``k * 2**-104``.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1
# exponent stored for exact zeros; far below anything that can matter
ZERO_EXP = -(1 << 40)


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    a1, a2 = _split(a)
    b1, b2 = _split(b)
    return p, ((a1 * b1 - p) + a1 * b2 + a2 * b1) + a2 * b2


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    h = p + e
    return h, e - (h - p)


def add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    e = e + (al + bl)
    h = s + e
    return h, e - (h - s)


def pairwise_sum(hi, lo) -> tuple[float, float]:
    """Double-double sum of nonnegative double-double arrays by pairwise halving."""
    hi = np.ravel(hi)
    lo = np.ravel(lo)
    while hi.size > 1:
        if hi.size % 2:
            hi = np.append(hi, 0.0)
            lo = np.append(lo, 0.0)
        hi, lo = add(hi[0::2], lo[0::2], hi[1::2], lo[1::2])
    return float(hi[0]), float(lo[0])


def from_mpf(values) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split mpmath numbers into ``(hi, lo, ex)`` with ``hi`` in ``[0.5, 1)``."""
    n = len(values)
    hi = np.zeros(n)
    lo = np.zeros(n)
    ex = np.full(n, ZERO_EXP, dtype=np.int64)
    for k, v in enumerate(values):
        if v == 0:
            continue
        m, e = mpmath.frexp(v)
        h = float(m)
        hi[k] = h
        lo[k] = float(m - h)
        ex[k] = e
    return hi, lo, ex


def to_mpf(hi: float, lo: float, ex: int):
    return mpmath.ldexp(mpmath.mpf(hi) + mpmath.mpf(lo), int(ex))


class RecurrenceTable:
    """Growable table ``t[0] = 1, t[k + 1] = t[k] * factor(k)`` in double-double form.

    ``factor`` receives ``k`` and returns an mpmath number; the recurrence is
    run at ``dps`` decimal digits so the stored pairs are correctly rounded to
    about 32 digits.
    """

    def __init__(self, factor, dps: int = 40):
        self._factor = factor
        self._dps = dps
        self._last = None
        self._size = 0
        self.hi = np.zeros(0)
        self.lo = np.zeros(0)
        self.ex = np.zeros(0, dtype=np.int64)

    def ensure(self, n: int) -> None:
        if n <= self._size:
            return
        n = max(n, 2 * self._size, 64)
        with mpmath.workdps(self._dps):
            vals = []
            v = self._last
            for k in range(self._size, n):
                v = mpmath.mpf(1) if k == 0 else v * self._factor(k - 1)
                vals.append(v)
            self._last = v
            hi, lo, ex = from_mpf(vals)
        self.hi = np.concatenate((self.hi, hi))
        self.lo = np.concatenate((self.lo, lo))
        self.ex = np.concatenate((self.ex, ex))
        self._size = n

    def take(self, idx):
        self.ensure(int(np.max(idx)) + 1)
        return self.hi[idx], self.lo[idx], self.ex[idx]


def log2_of(hi: float, lo: float, ex: int) -> float:
    v = hi + lo
    return ex + math.log2(v) if v > 0 else -math.inf
