"""Integer-order Bessel functions of the first kind.

All orders 0..m_max are produced at once by Miller's downward recurrence,
normalized with the identity J_0(x) + 2 * sum_k J_2k(x) = 1.  This is the
only special function the spiral analysis needs, and computing the whole
order ladder in one sweep is much cheaper than one call per order.
"""

from __future__ import annotations

import math

import numpy as np

_BIG = 1e250
_TINY = 1e-8  # below this the recurrence overflows; two series terms are exact


def _start_order(m_max: int, x_max: float) -> int:
    top = max(m_max, x_max)
    start = int(top + 30 + 4 * math.sqrt(top))
    return start + (start % 2)  # even, so the normalization sum lines up


def jn_all(m_max: int, x) -> np.ndarray:
    """J_m(x) for m = 0..m_max; result has shape (m_max + 1, *x.shape)."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    x = np.asarray(x, dtype=float)
    shape = x.shape
    flat = x.ravel()
    sign_flip = flat < 0
    ax = np.abs(flat)
    tiny = ax < _TINY
    safe = np.where(tiny, 1.0, ax)
    out = np.zeros((m_max + 1, flat.size))
    if flat.size == 0:
        return out.reshape((m_max + 1,) + shape)

    start = _start_order(m_max, float(ax.max()))
    j_up = np.zeros_like(safe)  # J_{k+1}
    j_k = np.full_like(safe, 1e-30)  # J_k, arbitrary seed
    norm = np.zeros_like(safe)
    two_over_x = 2.0 / safe
    for k in range(start, 0, -1):
        if k <= m_max:
            out[k] = j_k
        if k % 2 == 0:
            norm += 2.0 * j_k
        j_down = k * two_over_x * j_k - j_up
        j_up, j_k = j_k, j_down
        big = np.abs(j_k) > _BIG
        if big.any():
            s = np.where(big, 1.0 / _BIG, 1.0)
            j_k *= s
            j_up *= s
            norm *= s
            out[k:] *= s
    out[0] = j_k
    norm += j_k
    out /= norm

    if tiny.any():
        out[:, tiny] = _series(m_max, ax[tiny])
    if sign_flip.any():
        odd = np.arange(m_max + 1) % 2 == 1
        out[np.ix_(odd, sign_flip)] *= -1.0
    return out.reshape((m_max + 1,) + shape)


def _series(m_max: int, x: np.ndarray) -> np.ndarray:
    """First two terms of the power series, (x/2)^m / m! * (1 - (x/2)^2 / (m+1))."""
    half = x / 2.0
    out = np.zeros((m_max + 1, x.size))
    term = np.ones_like(x)
    for m in range(m_max + 1):
        out[m] = term * (1.0 - half * half / (m + 1))
        term = term * half / (m + 1)
    return out


def jn(m: int, x) -> np.ndarray:
    """J_m(x) for a single integer order (negative orders allowed)."""
    vals = jn_all(abs(m), x)[abs(m)]
    if m < 0 and m % 2:
        vals = -vals
    return vals


def jn_integral(m: int, x: float, samples: int = 4096) -> float:
    """Reference value from J_m(x) = (1/pi) int_0^pi cos(m t - x sin t) dt.

    The integrand is smooth and periodic, so the trapezoid rule converges
    geometrically; used as an independent check on :func:`jn_all`.
    """
    t = np.linspace(0.0, math.pi, samples + 1)
    f = np.cos(m * t - x * np.sin(t))
    return float((f.sum() - 0.5 * (f[0] + f[-1])) * (math.pi / samples) / math.pi)
