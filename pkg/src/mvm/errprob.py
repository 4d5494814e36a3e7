"""
Pairwise error probabilities for incoherent ML detection of equipower
Jones-vector symbols, and the union bounds built from them.

A symbol pair enters only through its coherence ``gamma = |<s|t>|``.  With
``rho_-/+ = sqrt((1 -/+ delta) / 2)`` and ``delta = sqrt(1 - gamma**2)`` the
binary error probability is

    P = Q1(sqrt(gs) rho_-, sqrt(gs) rho_+) - exp(-gs/2) I0(gamma gs / 2) / 2.

The exact evaluator writes both terms against the common factor
``exp(-gs (1 - gamma) / 2)`` so no cancellation occurs at high SNR.
"""
from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .core import Constellation, PairGeometry, coherence_matrix
from .expansion import AsymptoticCoeffs, asymptotic_coeffs
from .specfun import bessel_i0_scaled, bessel_ratio_series, erfc

__all__ = [
    "AsymptoticCoeffs",
    "BerCurve",
    "CurveKind",
    "GAMMA_ZERO",
    "METHODS",
    "SnrPoint",
    "T_SWITCH",
    "TargetUnreachable",
    "asymptotic_coeffs",
    "db_to_linear",
    "evaluate_curve",
    "hamming_matrix",
    "linear_to_db",
    "pairwise_error",
    "pairwise_error_asymptotic",
    "pairwise_error_exact",
    "pairwise_error_matrix",
    "pairwise_error_simple",
    "read_curves_csv",
    "solve_snr_at_target",
    "spectral_efficiency",
    "union_bound_bit",
    "union_bound_symbol",
    "welch_rankin_bound",
    "write_curves_csv",
]

T_SWITCH = 50.0  # gamma*gs/2 above which auto mode hands off to the expansion
GAMMA_ZERO = 1e-12  # coherences below this are treated as orthogonal
METHODS = ("exact", "auto", "asymp0", "asymp1", "simple")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SnrPoint:
    """Symbol SNR per SDOF ``gamma_s`` and bit SNR ``gamma_b = gamma_s / k``."""

    gamma_s: float
    gamma_b: float
    k: float = 1.0

    def __post_init__(self):
        if not self.gamma_s > 0 or not self.gamma_b > 0:
            raise ValueError("SNR values must be positive")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if abs(self.gamma_s - self.k * self.gamma_b) > 1e-12 * max(1.0, self.gamma_s):
            raise ValueError("gamma_s must equal k * gamma_b")

    @classmethod
    def from_gamma_s(cls, gamma_s: float, k: float = 1.0) -> "SnrPoint":
        return cls(float(gamma_s), float(gamma_s) / k, float(k))

    @classmethod
    def from_gamma_b(cls, gamma_b: float, k: float = 1.0) -> "SnrPoint":
        return cls(float(gamma_b) * k, float(gamma_b), float(k))

    @classmethod
    def from_symbol_db(cls, db: float, k: float = 1.0) -> "SnrPoint":
        return cls.from_gamma_s(float(db_to_linear(db)), k)

    @classmethod
    def from_bit_db(cls, db: float, k: float = 1.0) -> "SnrPoint":
        return cls.from_gamma_b(float(db_to_linear(db)), k)

    @property
    def sigma2(self) -> float:
        """Noise variance per real quadrature."""
        return 1.0 / (2.0 * self.gamma_s)

    @property
    def symbol_db(self) -> float:
        return float(linear_to_db(self.gamma_s))

    @property
    def bit_db(self) -> float:
        return float(linear_to_db(self.gamma_b))


def _gamma_of(geom) -> np.ndarray:
    if isinstance(geom, PairGeometry):
        return np.asarray(geom.gamma, dtype=float)
    return np.asarray(geom, dtype=float)


def _gs_of(snr) -> np.ndarray:
    if isinstance(snr, SnrPoint):
        return np.asarray(snr.gamma_s, dtype=float)
    return np.asarray(snr, dtype=float)


def _finish(out: np.ndarray):
    return float(out) if out.ndim == 0 else out


def pairwise_error_exact(geom, snr):
    """
    Exact binary error probability of an equiprobable symbol pair.

    Parameters
    ----------
    geom : PairGeometry or float or array_like
        Pair geometry, or the coherence ``gamma`` directly.
    snr : SnrPoint or float or array_like
        SNR point, or the linear symbol SNR directly.

    Returns
    -------
    float or ndarray
        Value in ``(0, 1/2]``.

    Notes
    -----
    With ``a = rho_- sqrt(gs)``, ``b = rho_+ sqrt(gs)`` the Neumann series
    of ``Q1`` gives ``P = exp(-(b-a)^2/2) Ie0(ab) [1/2 + sum_k t^k I_k/I_0]``
    where ``t = a/b`` and ``Ie0`` is the scaled Bessel function.
    """
    g, gs = np.broadcast_arrays(_gamma_of(geom), _gs_of(snr))
    if np.any(g < 0) or np.any(g > 1 + 1e-12) or np.any(~(gs > 0)):
        raise ValueError("need 0 <= gamma <= 1 and gamma_s > 0")
    g = np.clip(g, 0.0, 1.0)
    out = np.empty(g.shape)
    orth = g < GAMMA_ZERO
    same = g >= 1.0
    out[orth] = 0.5 * np.exp(-0.5 * gs[orth])
    out[same] = 0.5
    mid = ~(orth | same)
    if np.any(mid):
        gm, gsm = g[mid], gs[mid]
        delta = np.sqrt(1.0 - gm * gm)
        t = gm / (1.0 + delta)
        x = 0.5 * gm * gsm
        expo = 0.5 * gsm * (1.0 - gm)
        out[mid] = np.exp(-expo) * bessel_i0_scaled(x) * (0.5 + bessel_ratio_series(t, x))
    return _finish(out)


def pairwise_error_asymptotic(geom, snr, order: int = 1, truncated: bool = False):
    """
    Large-SNR expansion of the pairwise error probability.

    Parameters
    ----------
    order : int
        Expansion order; 0 and 1 are the usual choices, higher orders are
        accepted.
    truncated : bool
        Drop the highest Hankel term (for order 1, the ``(gamma gs)^-3/2``
        term) from the Bessel part.

    Raises
    ------
    ValueError
        If any ``gamma`` is zero, where the expansion does not apply.
    """
    g, gs = np.broadcast_arrays(_gamma_of(geom), _gs_of(snr))
    if np.any(g < GAMMA_ZERO):
        raise ValueError("asymptotic expansion is not valid for orthogonal pairs (gamma = 0)")
    g = np.minimum(g, 1.0)
    co = asymptotic_coeffs(g, gs, order)
    e2, f2, gn = co.partial(order)
    if truncated:
        gn = co.g_terms[order - 1] if order > 0 else np.zeros_like(gn)
    z2 = 0.5 * gs * (1.0 - g)
    out = f2 * erfc(np.sqrt(z2)) + (e2 - 0.5 * gn) * np.exp(-z2)
    return _finish(np.asarray(out))


def pairwise_error_simple(geom, snr):
    """Leading-order closed form, meant for ``gamma`` away from 0 and 1."""
    g, gs = np.broadcast_arrays(_gamma_of(geom), _gs_of(snr))
    if np.any(g <= 0) or np.any(g >= 1):
        raise ValueError("simple asymptote needs 0 < gamma < 1")
    out = (
        np.sqrt((1.0 + g) / (1.0 - g))
        / (2.0 * math.sqrt(math.pi) * np.sqrt(g * gs))
        * np.exp(-0.5 * gs * (1.0 - g))
    )
    return _finish(out)


def pairwise_error(gamma, gamma_s, method: str = "exact"):
    """
    Vectorized dispatch over the evaluation methods in ``METHODS``.

    Orthogonal pairs always take the exact value ``exp(-gs/2)/2`` and
    identical pairs ``1/2``, whatever the method.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    g, gs = np.broadcast_arrays(np.asarray(gamma, dtype=float), np.asarray(gamma_s, dtype=float))
    g = np.clip(g, 0.0, 1.0)
    if method == "exact":
        return np.asarray(pairwise_error_exact(g, gs), dtype=float)
    out = np.empty(g.shape)
    edge = (g < GAMMA_ZERO) | (g >= 1.0)
    if np.any(edge):
        out[edge] = pairwise_error_exact(g[edge], gs[edge])
    rest = ~edge
    if method == "auto":
        use_exact = rest & (0.5 * g * gs <= T_SWITCH)
        use_asym = rest & ~use_exact
        if np.any(use_exact):
            out[use_exact] = pairwise_error_exact(g[use_exact], gs[use_exact])
        if np.any(use_asym):
            out[use_asym] = pairwise_error_asymptotic(g[use_asym], gs[use_asym], order=1)
    elif np.any(rest):
        if method == "simple":
            out[rest] = pairwise_error_simple(g[rest], gs[rest])
        else:
            out[rest] = pairwise_error_asymptotic(g[rest], gs[rest], order=int(method[-1]))
    return out


def hamming_matrix(bits: Sequence[int]) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    x = b[:, None] ^ b[None, :]
    h = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        h += x & 1
        x = x >> 1
    return h


def _pair_values(c: Constellation, gamma_s: float, method: str):
    gam = coherence_matrix(c)
    iu = np.triu_indices(c.m, 1)
    return iu, pairwise_error(gam[iu], gamma_s, method)


def pairwise_error_matrix(c: Constellation, snr, method: str = "exact") -> np.ndarray:
    """Symmetric ``M x M`` matrix of pairwise error probabilities, zero diagonal."""
    iu, vals = _pair_values(c, float(_gs_of(snr)), method)
    p = np.zeros((c.m, c.m))
    p[iu] = vals
    return p + p.T


def union_bound_symbol(c: Constellation, snr, mode: str = "exact", clip: bool = True) -> float:
    """
    Union bound on the symbol error probability,
    ``(1/M) sum_m sum_{m' != m} P(gamma_mm', gs)``.

    ``clip=False`` returns the raw sum, which can exceed one at low SNR.
    """
    if c.m < 2:
        raise ValueError("need at least two symbols")
    _, vals = _pair_values(c, float(_gs_of(snr)), mode)
    total = 2.0 * float(np.sum(vals)) / c.m
    return min(1.0, max(0.0, total)) if clip else total


def union_bound_bit(c: Constellation, snr, mode: str = "exact", clip: bool = True, bits=None) -> float:
    """
    Union bound on the bit error probability,
    ``(1/(kM)) sum_m sum_{m' != m} P(gamma_mm', gs) h_mm'``.

    ``bits`` overrides the labels stored on the constellation.
    """
    labels = c.bits if bits is None else np.asarray(bits)
    if labels is None:
        raise ValueError("bit error bound needs bit labels")
    iu, vals = _pair_values(c, float(_gs_of(snr)), mode)
    h = hamming_matrix(labels)[iu]
    total = 2.0 * float(np.sum(vals * h)) / (c.k * c.m)
    return min(1.0, max(0.0, total)) if clip else total


class TargetUnreachable(ValueError):
    pass


def _bound_at(c: Constellation, db: float, kind: str, mode: str) -> float:
    k = c.k
    if kind == "symbol":
        return union_bound_symbol(c, SnrPoint.from_symbol_db(db, k), mode)
    return union_bound_bit(c, SnrPoint.from_bit_db(db, k), mode)


def solve_snr_at_target(
    c: Constellation,
    target: float,
    kind: str = "symbol",
    mode: str = "auto",
    bracket: tuple = (-10.0, 60.0),
    tol_db: float = 1e-6,
) -> SnrPoint:
    """
    Bisect the union bound for the SNR where it equals ``target``.

    The bracket and the result are in symbol-SNR dB for ``kind="symbol"``
    and bit-SNR dB for ``kind="bit"``.

    Raises
    ------
    TargetUnreachable
        If the bound does not cross ``target`` inside ``bracket``.
    """
    if kind not in ("symbol", "bit"):
        raise ValueError("kind must be 'symbol' or 'bit'")
    if not 0.0 < target < 0.5:
        raise ValueError("target must lie in (0, 0.5)")
    lo, hi = bracket
    f_lo = _bound_at(c, lo, kind, mode) - target
    f_hi = _bound_at(c, hi, kind, mode) - target
    if f_lo < 0 or f_hi > 0:
        raise TargetUnreachable(f"target {target:g} not bracketed by [{lo}, {hi}] dB")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if _bound_at(c, mid, kind, mode) > target:
            lo = mid
        else:
            hi = mid
    db = 0.5 * (lo + hi)
    if kind == "symbol":
        return SnrPoint.from_symbol_db(db, c.k)
    return SnrPoint.from_bit_db(db, c.k)


def spectral_efficiency(c: Union[Constellation, tuple]) -> float:
    """``log2(M) / N`` in bit/s/Hz per SDOF; accepts a constellation or ``(n, m)``."""
    if isinstance(c, Constellation):
        n, m = c.n, c.m
    else:
        n, m = c
    return math.log2(m) / n


def welch_rankin_bound(n: int, m: int) -> float:
    """Lower bound on the largest pair coherence of ``m`` unit vectors in ``C^n``."""
    if m <= n:
        raise ValueError("Welch-Rankin bound needs M > N (orthogonal sets exist otherwise)")
    return math.sqrt((m - n) / (n * (m - 1)))


class CurveKind(str, enum.Enum):
    SYMBOL_UNION_BOUND = "symbolUnionBound"
    BIT_UNION_BOUND = "bitUnionBound"
    ASYMPTOTIC0 = "asymptotic0"
    ASYMPTOTIC1 = "asymptotic1"
    ASYMPTOTIC_SIMPLE = "asymptoticSimple"
    MONTE_CARLO = "monteCarlo"

    @property
    def is_bound(self) -> bool:
        return self is not CurveKind.MONTE_CARLO


@dataclass(frozen=True)
class BerCurve:
    """Sampled probability curve over an increasing dB grid."""

    snr_db: tuple
    values: tuple
    kind: CurveKind

    def __post_init__(self):
        kind = CurveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        snr = tuple(float(v) for v in self.snr_db)
        val = tuple(float(v) for v in self.values)
        object.__setattr__(self, "snr_db", snr)
        object.__setattr__(self, "values", val)
        if len(snr) != len(val):
            raise ValueError("snr_db and values differ in length")
        if any(b <= a for a, b in zip(snr, snr[1:])):
            raise ValueError("snr_db must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in val):
            raise ValueError("probabilities must lie in [0, 1]")
        if kind.is_bound and any(b > a for a, b in zip(val, val[1:])):
            raise ValueError("bound curve is not non-increasing")

    @property
    def points(self):
        return list(zip(self.snr_db, self.values))

    def __len__(self):
        return len(self.snr_db)


def evaluate_curve(
    c: Constellation, snr_db: Iterable[float], kind: str = "ser", method: str = "auto"
) -> BerCurve:
    """
    Union-bound curve over a dB grid.

    ``kind="ser"`` keys the grid by symbol SNR, ``kind="ber"`` by bit SNR.
    """
    grid = [float(v) for v in snr_db]
    vals = []
    for db in grid:
        if kind == "ser":
            vals.append(union_bound_symbol(c, SnrPoint.from_symbol_db(db, c.k), method))
        elif kind == "ber":
            vals.append(union_bound_bit(c, SnrPoint.from_bit_db(db, c.k), method))
        else:
            raise ValueError("kind must be 'ser' or 'ber'")
    ck = {
        "asymp0": CurveKind.ASYMPTOTIC0,
        "asymp1": CurveKind.ASYMPTOTIC1,
        "simple": CurveKind.ASYMPTOTIC_SIMPLE,
    }.get(method, CurveKind.SYMBOL_UNION_BOUND if kind == "ser" else CurveKind.BIT_UNION_BOUND)
    return BerCurve(tuple(grid), tuple(vals), ck)


def write_curves_csv(path, curves: Sequence[BerCurve], append: bool = False) -> None:
    """Write ``snr_db,value,kind`` rows; the header is written unless appending to a non-empty file."""
    need_header = not (append and os.path.exists(path) and os.path.getsize(path) > 0)
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if need_header:
            w.writerow(["snr_db", "value", "kind"])
        for cur in curves:
            for s, v in cur.points:
                w.writerow([format(s, ".17g"), format(v, ".17g"), cur.kind.value])


def read_curves_csv(path) -> list:
    """Read a curve CSV back, one :class:`BerCurve` per kind in file order."""
    groups: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ["snr_db", "value", "kind"]:
            raise ValueError("curve CSV must have header snr_db,value,kind")
        for row in r:
            groups.setdefault(row["kind"], ([], []))
            groups[row["kind"]][0].append(float(row["snr_db"]))
            groups[row["kind"]][1].append(float(row["value"]))
    return [BerCurve(tuple(s), tuple(v), k) for k, (s, v) in groups.items()]
