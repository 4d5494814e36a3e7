"""
Bit-to-symbol labeling by simulated annealing.

The objective is the bit-level union bound

    xi = (1 / (k M)) sum_m sum_{m' != m} P(gamma_mm') h(b_m, b_m'),

with the pairwise error matrix ``P`` computed once.  Moves swap the labels
of two symbols; the change in ``xi`` is evaluated in O(M).
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numba
import numpy as np

from .channel import worker_count
from .core import Constellation, is_power_of_two
from .errprob import SnrPoint, hamming_matrix, pairwise_error_matrix

__all__ = [
    "AnnealResult",
    "AnnealSchedule",
    "BitMapping",
    "T0_FLOOR",
    "anneal_mapping",
    "brute_force_mapping",
    "canonical_labels",
    "default_training_snr",
    "gray_code_ring",
    "initial_temperature",
    "xi_from_matrix",
    "xi_objective",
]

T0_FLOOR = 1e-12
TRAINING_BIT_SNR_DB = 10.0


@dataclass(frozen=True)
class BitMapping:
    """Labels ``b_m`` of the symbols, a permutation of ``0..M-1``."""

    labels: tuple

    def __post_init__(self):
        lab = tuple(int(b) for b in np.asarray(self.labels).reshape(-1))
        m = len(lab)
        if not is_power_of_two(m):
            raise ValueError(f"M must be a power of two, got {m}")
        if sorted(lab) != list(range(m)):
            raise ValueError("labels must be a permutation of 0..M-1")
        object.__setattr__(self, "labels", lab)

    @classmethod
    def identity(cls, m: int) -> "BitMapping":
        return cls(tuple(range(m)))

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "BitMapping":
        return cls(tuple(rng.permutation(m)))

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return self.m.bit_length() - 1

    def array(self) -> np.ndarray:
        return np.array(self.labels, dtype=np.int64)

    def hamming(self) -> np.ndarray:
        return hamming_matrix(self.labels)


@dataclass(frozen=True)
class AnnealSchedule:
    """
    Exponential cooling ``T_n = alpha**n T_0`` down to ``min_temp``.

    ``iters_per_temp`` and ``min_temp`` default to ``M**2`` and
    ``T_0 * 1e-6`` when left as ``None``; see :meth:`resolved`.
    """

    t0: float
    alpha: float = 0.995
    iters_per_temp: Optional[int] = None
    min_temp: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.min_temp is not None and not 0 < self.min_temp <= self.t0:
            raise ValueError("min_temp must lie in (0, t0]")
        if self.iters_per_temp is not None and self.iters_per_temp < 1:
            raise ValueError("iters_per_temp must be >= 1")

    def resolved(self, m: int) -> "AnnealSchedule":
        return AnnealSchedule(
            self.t0,
            self.alpha,
            self.iters_per_temp if self.iters_per_temp is not None else m * m,
            self.min_temp if self.min_temp is not None else self.t0 * 1e-6,
            self.seed,
        )

    def temperatures(self) -> np.ndarray:
        floor = self.min_temp if self.min_temp is not None else self.t0 * 1e-6
        count = int(math.floor(math.log(floor / self.t0) / math.log(self.alpha) + 1e-9)) + 1
        return self.t0 * self.alpha ** np.arange(count)


def default_training_snr(k: float) -> SnrPoint:
    return SnrPoint.from_bit_db(TRAINING_BIT_SNR_DB, k)


def xi_from_matrix(pmat: np.ndarray, labels) -> float:
    m = pmat.shape[0]
    k = math.log2(m)
    h = hamming_matrix(np.asarray(labels))
    return float(np.sum(pmat * h)) / (k * m)


def xi_objective(c: Constellation, labels, snr: SnrPoint, method: str = "exact") -> float:
    """Bit union bound (unclipped) of ``c`` under ``labels``."""
    lab = labels.labels if isinstance(labels, BitMapping) else labels
    return xi_from_matrix(pairwise_error_matrix(c, snr, method), lab)


@numba.njit(cache=True, nogil=True)
def _anneal_kernel(pmat, ham, labels, temps, iters, seed, scale):
    np.random.seed(seed)
    m = labels.shape[0]
    lab = labels.copy()
    xi = 0.0
    for i in range(m):
        for j in range(m):
            xi += pmat[i, j] * ham[lab[i], lab[j]]
    xi *= scale
    best = lab.copy()
    best_xi = xi
    nt = temps.shape[0]
    cur_trace = np.empty(nt)
    best_trace = np.empty(nt)
    for ti in range(nt):
        temp = temps[ti]
        for _ in range(iters):
            u = np.random.randint(m)
            v = np.random.randint(m - 1)
            if v >= u:
                v += 1
            bu = lab[u]
            bv = lab[v]
            acc = 0.0
            for w in range(m):
                if w == u or w == v:
                    continue
                bw = lab[w]
                acc += (pmat[u, w] - pmat[v, w]) * (ham[bv, bw] - ham[bu, bw])
            delta = 2.0 * scale * acc
            if delta <= 0.0 or np.random.random() < math.exp(-delta / temp):
                lab[u] = bv
                lab[v] = bu
                xi += delta
                if xi < best_xi:
                    best_xi = xi
                    best[:] = lab
        cur_trace[ti] = xi
        best_trace[ti] = best_xi
    return best, cur_trace, best_trace


@dataclass
class AnnealResult:
    mapping: BitMapping
    xi: float
    start_xi: float
    seed: int
    temperatures: np.ndarray = field(repr=False)
    current_xi: np.ndarray = field(repr=False)
    best_xi: np.ndarray = field(repr=False)
    restarts: List["AnnealResult"] = field(default_factory=list, repr=False)


def initial_temperature(
    c: Constellation, snr: SnrPoint, samples: int = 100, seed: int = 0, pmat=None
) -> float:
    """Sample standard deviation of ``xi`` over uniformly random labelings."""
    if samples < 30:
        raise ValueError("need at least 30 samples")
    p = pairwise_error_matrix(c, snr) if pmat is None else pmat
    rng = np.random.default_rng(seed)
    vals = np.array([xi_from_matrix(p, rng.permutation(c.m)) for _ in range(samples)])
    # a spread at rounding level means xi does not depend on the labeling
    if np.ptp(vals) <= 16 * np.finfo(float).eps * np.max(np.abs(vals)):
        return 0.0
    return float(np.std(vals, ddof=1))


def anneal_mapping(
    c: Constellation,
    snr: Optional[SnrPoint] = None,
    sched: Optional[AnnealSchedule] = None,
    start=None,
    restarts: int = 1,
    method: str = "exact",
) -> AnnealResult:
    """
    Simulated annealing over label swaps.

    Parameters
    ----------
    snr : SnrPoint, optional
        Training SNR; defaults to 10 dB bit SNR.
    sched : AnnealSchedule, optional
        Defaults to ``T_0`` from :func:`initial_temperature` and the default
        cooling constants.
    start : BitMapping or sequence, optional
        Start labeling; random (from the schedule seed) when omitted.
    restarts : int
        Independent chains with seeds ``sched.seed + r``; the lowest final
        ``xi`` wins, ties going to the lowest seed.

    Returns
    -------
    AnnealResult
        Best labeling ever visited, never worse than the start.
    """
    m = c.m
    if not is_power_of_two(m):
        raise ValueError(f"M must be a power of two, got {m}")
    snr = snr if snr is not None else default_training_snr(c.k)
    pmat = pairwise_error_matrix(c, snr, method)
    if sched is None:
        t0 = max(initial_temperature(c, snr, pmat=pmat), T0_FLOOR)
        sched = AnnealSchedule(t0)
    sched = sched.resolved(m)
    temps = sched.temperatures()
    ham = hamming_matrix(np.arange(m)).astype(np.float64)
    scale = 1.0 / (math.log2(m) * m)

    def one(r: int) -> AnnealResult:
        seed = sched.seed + r
        if start is None:
            lab0 = np.random.default_rng(seed).permutation(m).astype(np.int64)
        else:
            lab0 = np.asarray(getattr(start, "labels", start), dtype=np.int64)
        xi0 = xi_from_matrix(pmat, lab0)
        best, cur, bt = _anneal_kernel(pmat, ham, lab0, temps, sched.iters_per_temp, seed, scale)
        xi_best = xi_from_matrix(pmat, best)
        if xi_best > xi0:
            best, xi_best = lab0, xi0
        return AnnealResult(BitMapping(tuple(best)), xi_best, xi0, seed, temps, cur, bt)

    workers = min(worker_count(), restarts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(one, range(restarts)))
    else:
        runs = [one(r) for r in range(restarts)]
    win = min(runs, key=lambda res: (res.xi, res.seed))
    win.restarts = runs
    return win


def gray_code_ring(m: int) -> BitMapping:
    """Reflected binary Gray code assigned to ring positions ``0..m-1``."""
    if not is_power_of_two(m):
        raise ValueError("m must be a power of two")
    return BitMapping(tuple(i ^ (i >> 1) for i in range(m)))


def brute_force_mapping(c: Constellation, snr: SnrPoint, method: str = "exact"):
    """
    Exhaustive search over all ``M!`` labelings (``M <= 8``).

    Returns ``(BitMapping, xi)`` of the first minimizer in lexicographic order.
    """
    m = c.m
    if m > 8:
        raise ValueError("brute force is limited to M <= 8")
    pmat = pairwise_error_matrix(c, snr, method)
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    ham = hamming_matrix(np.arange(m))
    # xi for every permutation: sum_ij P_ij h(perm_i, perm_j)
    h = ham[perms[:, :, None], perms[:, None, :]]
    vals = np.einsum("pij,ij->p", h, pmat) / (math.log2(m) * m)
    best = int(np.argmin(vals))
    return BitMapping(tuple(perms[best])), float(vals[best])


def canonical_labels(labels: Sequence[int]) -> BitMapping:
    """XOR all labels so the first symbol carries label 0."""
    lab = np.asarray(getattr(labels, "labels", labels), dtype=np.int64)
    return BitMapping(tuple(lab ^ lab[0]))
