"""
Special functions used by the error-probability formulas.

Everything here works on floats or numpy arrays of floats.  The modified
Bessel function is evaluated by its power series for small arguments and by
the Hankel large-argument series otherwise; the exponentially scaled form is
what the error formulas actually consume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .expansion import asymptotic_coeffs

__all__ = [
    "I0_SERIES_MAX",
    "I0_OVERFLOW",
    "MARCUM_ASYMPTOTIC_MIN",
    "ScaledBessel",
    "bessel_i0",
    "bessel_i0_scaled",
    "bessel_ratio_series",
    "erfc",
    "marcum_q1",
]

I0_SERIES_MAX = 15.0
I0_OVERFLOW = 700.0
MARCUM_ASYMPTOTIC_MIN = 400.0  # switch to the large-argument expansion when a*b exceeds this

_SERIES_TERMS = 60
_HANKEL_TERMS = 30
_MARCUM_ORDER = 8


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _i0_series(x: np.ndarray) -> np.ndarray:
    # sum (x^2/4)^k / (k!)^2, all terms positive so no cancellation
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    return total


def _i0e_hankel(x: np.ndarray) -> np.ndarray:
    # exp(-x) I0(x) ~ (2 pi x)^(-1/2) sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(_HANKEL_TERMS):
        term = term * (2 * k + 1) ** 2 / (8.0 * (k + 1) * x)
        total = total + term
    return total / np.sqrt(2.0 * np.pi * x)


def bessel_i0_scaled(x):
    """
    Exponentially scaled modified Bessel function ``exp(-x) I0(x)``.

    Parameters
    ----------
    x : float or array_like
        Non-negative argument, no upper limit.

    Returns
    -------
    float or ndarray
    """
    arr, scalar = _as_float_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("bessel_i0_scaled needs x >= 0")
    out = np.empty_like(arr)
    small = arr <= I0_SERIES_MAX
    out[small] = _i0_series(arr[small]) * np.exp(-arr[small])
    out[~small] = _i0e_hankel(arr[~small])
    return float(out) if scalar else out


def bessel_i0(x):
    """
    Modified Bessel function of the first kind, order zero.

    Raises
    ------
    OverflowError
        If any argument exceeds ``I0_OVERFLOW``; use :func:`bessel_i0_scaled`.
    """
    arr, scalar = _as_float_array(x)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("bessel_i0 needs x >= 0")
    if np.any(arr > I0_OVERFLOW):
        raise OverflowError("I0 overflows above x = 700; use bessel_i0_scaled")
    out = np.empty_like(arr)
    small = arr <= I0_SERIES_MAX
    out[small] = _i0_series(arr[small])
    out[~small] = _i0e_hankel(arr[~small]) * np.exp(arr[~small])
    return float(out) if scalar else out


@dataclass(frozen=True)
class ScaledBessel:
    """``value = exp(-x) I0(x)`` kept together with its argument."""

    value: float
    x: float

    def __post_init__(self):
        if self.x < 0:
            raise ValueError("x must be non-negative")
        if not 0.0 < self.value <= 1.0:
            raise ValueError("scaled Bessel value must lie in (0, 1]")

    @classmethod
    def at(cls, x: float) -> "ScaledBessel":
        return cls(bessel_i0_scaled(float(x)), float(x))

    def unscaled(self) -> float:
        return bessel_i0(self.x)


def erfc(x):
    """Complementary error function (delegates to ``scipy.special.erfc``)."""
    out = _sp.erfc(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def bessel_ratio_series(t, x):
    """
    ``sum_{k>=1} t**k I_k(x) / I_0(x)`` for ``0 <= t <= 1``, ``x >= 0``.

    The ratios ``I_k / I_{k-1}`` come from the backward continued-fraction
    recurrence, so the sum is accumulated without forming any ``I_k``.
    Broadcasts over array arguments.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    scalar = t.ndim == 0
    t = np.atleast_1d(t).astype(float)
    x = np.atleast_1d(x).astype(float)
    out = np.zeros(t.shape)
    live = (x > 0) & (t > 0)
    if np.any(live):
        tl, xl = t[live], x[live]
        kmax = int(40 + math.ceil(math.sqrt(100.0 * float(np.max(xl)))))
        nu = kmax + 1.0
        # uniform large-order estimate of I_{nu}/I_{nu-1} as the starting value
        r = xl / (nu - 0.5 + np.sqrt((nu + 0.5) ** 2 + xl * xl))
        acc = np.zeros_like(xl)
        for k in range(kmax, 0, -1):
            r = xl / (2.0 * k + xl * r)
            acc = tl * r * (1.0 + acc)
        out[live] = acc
    return float(out[0]) if scalar else out.reshape(t.shape)


def _poisson_pmf(lam: float, kmax: int) -> np.ndarray:
    k = np.arange(kmax + 1)
    if lam == 0:
        pmf = np.zeros(kmax + 1)
        pmf[0] = 1.0
        return pmf
    logp = k * math.log(lam) - lam - _sp.gammaln(k + 1.0)
    return np.exp(logp)


def _marcum_series(a: float, b: float) -> float:
    # Q1(a, b) = P(M <= K) with K ~ Pois(a^2/2), M ~ Pois(b^2/2) independent.
    # For b < a the complement P(M > K) is the small quantity, summed directly.
    lam = 0.5 * a * a
    mu = 0.5 * b * b
    if b < a:
        jmax = int(math.ceil(max(lam, mu) + 14.0 * math.sqrt(max(lam, mu)) + 40.0))
        w = _poisson_pmf(mu, jmax)
        cdf = np.cumsum(_poisson_pmf(lam, jmax))
        # P(K <= j - 1) for j = 0..jmax
        below = np.concatenate([[0.0], cdf[:-1]])
        return 1.0 - float(np.dot(w, np.minimum(below, 1.0)))
    kmax = int(math.ceil(lam + 14.0 * math.sqrt(lam) + 40.0))
    w = _poisson_pmf(lam, kmax)
    cdf = np.minimum(np.cumsum(_poisson_pmf(mu, kmax)), 1.0)
    return float(np.dot(w, cdf))


def _marcum_expansion(a: float, b: float) -> float:
    # valid for a <= b with a*b large
    gs = a * a + b * b
    gamma = min(1.0, 2.0 * a * b / gs)
    co = asymptotic_coeffs(gamma, gs, _MARCUM_ORDER, one_minus_gamma=(b - a) ** 2 / gs)
    z2 = 0.5 * (b - a) ** 2
    return float(co.e_sum) * math.exp(-z2) + float(co.f_sum) * math.erfc(math.sqrt(z2))


def _marcum_scalar(a: float, b: float) -> float:
    if a < 0 or b < 0 or math.isnan(a) or math.isnan(b):
        raise ValueError("marcum_q1 needs a, b >= 0")
    if b == 0:
        return 1.0
    if a == 0:
        return math.exp(-0.5 * b * b)
    if a * b <= MARCUM_ASYMPTOTIC_MIN:
        q = _marcum_series(a, b)
    elif a <= b:
        q = _marcum_expansion(a, b)
    else:
        # Q1(a,b) + Q1(b,a) = 1 + exp(-(a^2+b^2)/2) I0(ab)
        bessel = math.exp(-0.5 * (a - b) ** 2) * bessel_i0_scaled(a * b)
        q = 1.0 + bessel - _marcum_expansion(b, a)
    return min(1.0, max(0.0, q))


def marcum_q1(a, b):
    """
    First-order Marcum Q function ``Q1(a, b)``.

    Uses a Poisson-weighted gamma-tail series for ``a*b <= 400`` and the
    erfc-based large-argument expansion above that.

    Parameters
    ----------
    a, b : float or array_like
        Non-negative arguments; broadcast together.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if a_arr.ndim == 0 and b_arr.ndim == 0:
        return _marcum_scalar(float(a_arr), float(b_arr))
    a_arr, b_arr = np.broadcast_arrays(a_arr, b_arr)
    out = np.empty(a_arr.shape)
    for idx in np.ndindex(a_arr.shape):
        out[idx] = _marcum_scalar(float(a_arr[idx]), float(b_arr[idx]))
    return out
