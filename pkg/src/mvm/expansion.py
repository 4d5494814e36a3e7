"""
Large-argument expansion coefficients for the pairwise error formula.

For a symbol pair with coherence ``gamma`` at symbol SNR ``gamma_s`` the
Marcum term ``Q1(rho_- sqrt(gs), rho_+ sqrt(gs))`` is approximated by

    e''_n exp(-z**2) + f''_n erfc(z),      z = sqrt(gs (1 - gamma) / 2)

and the Bessel term ``exp(-gs/2) I0(gamma gs / 2)`` by ``g_n exp(-z**2)``.
The sequences are built by the recursions below and summed up to ``order``.
``gamma`` and ``gamma_s`` may be arrays; every sequence then carries the
order as its leading axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["AsymptoticCoeffs", "a_coefficient", "asymptotic_coeffs", "hankel_coefficient"]

_SQRT_PI = math.sqrt(math.pi)


def a_coefficient(n: int, m: int) -> float:
    """``Gamma(1/2 + m + n) / (n! 2**n Gamma(1/2 + m - n))`` as a finite product."""
    prod = 1.0
    for i in range(-n, n):
        prod *= m + i + 0.5
    return prod / (math.factorial(n) * 2.0**n)


def hankel_coefficient(n: int) -> float:
    """Coefficient of ``(gamma gs)**(-n - 1/2) / sqrt(pi)`` in the I0 expansion."""
    dfact = 1.0
    for j in range(1, 2 * n, 2):
        dfact *= j
    return dfact * dfact / (4.0**n * math.factorial(n))


@dataclass(frozen=True)
class AsymptoticCoeffs:
    """
    Expansion sequences for one ``(gamma, gamma_s)`` point or a batch of them.

    ``e_terms``, ``f_terms`` hold ``e_n`` and ``f_n``; ``e_primes`` and
    ``f_primes`` the products with ``lambdas``; ``g_terms`` the partial
    Hankel sums ``g_0 .. g_order``.
    """

    order: int
    gamma: np.ndarray
    gamma_s: np.ndarray
    e_terms: np.ndarray
    f_terms: np.ndarray
    lambdas: np.ndarray
    a_coeffs: np.ndarray  # (order + 1, 2): A_{n,0}, A_{n,1}
    g_terms: np.ndarray
    e_primes: np.ndarray
    f_primes: np.ndarray

    def partial(self, n: int):
        """``(e''_n, f''_n, g_n)`` for ``n <= order``."""
        if not 0 <= n <= self.order:
            raise ValueError(f"partial order {n} outside 0..{self.order}")
        return (
            np.sum(self.e_primes[: n + 1], axis=0),
            np.sum(self.f_primes[: n + 1], axis=0),
            self.g_terms[n],
        )

    @property
    def e_sum(self):
        return self.partial(self.order)[0]

    @property
    def f_sum(self):
        return self.partial(self.order)[1]

    @property
    def g(self):
        return self.g_terms[self.order]


def asymptotic_coeffs(gamma, gamma_s, order: int, one_minus_gamma=None) -> AsymptoticCoeffs:
    """
    Build the expansion sequences up to ``order``.

    ``one_minus_gamma`` may carry ``1 - gamma`` computed without cancellation
    (as the Marcum routine does near ``a = b``); by default it is formed from
    ``gamma``.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    g, gs = np.broadcast_arrays(np.asarray(gamma, dtype=float), np.asarray(gamma_s, dtype=float))
    if np.any(~(g > 0)) or np.any(g > 1):
        raise ValueError("expansion needs 0 < gamma <= 1")
    if np.any(~(gs > 0)):
        raise ValueError("gamma_s must be positive")
    shape = (order + 1,) + g.shape

    if one_minus_gamma is None:
        one_m_g = np.maximum(0.0, 1.0 - g)
    else:
        one_m_g = np.broadcast_to(np.asarray(one_minus_gamma, dtype=float), g.shape)
        if np.any(one_m_g < 0):
            raise ValueError("one_minus_gamma must be non-negative")
    delta = np.sqrt(one_m_g * (1.0 + g))
    # rho_- written without the 1 - delta cancellation
    rho_m = g / np.sqrt(2.0 * (1.0 + delta))
    ratio = one_m_g / g
    x = 0.5 * g * gs

    e = np.zeros(shape)
    f = np.zeros(shape)
    with np.errstate(divide="ignore"):
        f[0] = _SQRT_PI * np.sqrt(g / one_m_g)
    for n in range(1, order + 1):
        e[n] = (ratio * e[n - 1] - x ** (0.5 - n)) / (0.5 - n)
        prev = np.where(np.isfinite(f[n - 1]), f[n - 1], 0.0)
        f[n] = np.where(one_m_g > 0, ratio * prev / (0.5 - n), 0.0)

    a = np.array([[a_coefficient(n, 0), a_coefficient(n, 1)] for n in range(order + 1)])
    # rho_+/rho_- = 1 + sqrt(1 - gamma)/rho_-, finite as gamma -> 1
    excess = np.sqrt(one_m_g) / rho_m
    lam = np.stack(
        [
            (-1) ** n / (2.0 * math.sqrt(2.0 * math.pi)) * (excess * a[n, 0] + (a[n, 0] - a[n, 1]))
            for n in range(order + 1)
        ]
    )
    e_p = lam * e
    f_p = np.zeros(shape)
    f_p[0] = np.sqrt(g) / (2.0 * math.sqrt(2.0) * rho_m)
    for n in range(1, order + 1):
        fn = _SQRT_PI * np.sqrt(g) * one_m_g ** (n - 0.5) * g ** (-n)
        for i in range(1, n + 1):
            fn = fn / (0.5 - i)
        f_p[n] = lam[n] * fn

    gg = g * gs
    hank = np.cumsum(
        np.stack([hankel_coefficient(n) * gg ** (-n - 0.5) for n in range(order + 1)]), axis=0
    ) / _SQRT_PI
    return AsymptoticCoeffs(order, g, gs, e, f, lam, a, hank, e_p, f_p)
