"""
Monte-Carlo simulation of the additive white Gaussian noise channel with
incoherent ML detection.

The received vector is ``r = exp(i theta) s + n`` with ``n`` i.i.d.
circular complex Gaussian, variance ``sigma2 = 1 / (2 gamma_s)`` per real
quadrature.  The detector picks ``argmax_m |<s_m|r>|``.

Trials are processed in fixed blocks of ``BLOCK`` draws.  Block ``b`` draws
from ``default_rng([seed, b])`` and counts are summed in block order, so the
outcome depends only on the seed and the trial count, never on how many
worker threads ran.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import Constellation, PairGeometry
from .errprob import SnrPoint

__all__ = [
    "BLOCK",
    "ChannelConfig",
    "SimResult",
    "detect_ml",
    "pairwise_error_rice_oracle",
    "received_dyad_decomposition",
    "rice_oracle_counts",
    "simulate",
    "transmit",
    "worker_count",
]

BLOCK = 65536
EARLY_STOP_ERRORS = 100
EARLY_STOP_TRIALS = 1_000_000
_RICE_CHUNK = 1 << 22


def worker_count() -> int:
    """CPU count, capped by the ``MVM_THREADS`` environment variable."""
    n = os.cpu_count() or 1
    cap = os.environ.get("MVM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


@dataclass(frozen=True)
class ChannelConfig:
    snr: SnrPoint
    apply_random_phase: bool = False
    seed: int = 0
    trials: int = 1_000_000
    early_stop: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def sigma2(self) -> float:
        return 0.0 if math.isinf(self.snr.gamma_s) else self.snr.sigma2


@dataclass(frozen=True)
class SimResult:
    trials: int
    symbol_errors: int
    bit_errors: Optional[int]
    ser: float
    ber: Optional[float]
    ser_stderr: float
    ber_stderr: Optional[float]
    seed: int

    @staticmethod
    def _stderr(p: float, n: int) -> float:
        return math.sqrt(max(p * (1.0 - p), 0.0) / n)

    @classmethod
    def from_counts(cls, trials: int, sym: int, bits: Optional[int], k: float, seed: int) -> "SimResult":
        ser = sym / trials
        if bits is None:
            return cls(trials, sym, None, ser, None, cls._stderr(ser, trials), None, seed)
        nb = k * trials
        ber = bits / nb
        return cls(
            trials, sym, bits, ser, ber, cls._stderr(ser, trials), math.sqrt(max(ber * (1 - ber), 0.0) / nb), seed
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def transmit(s, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Channel uses: rotate by a random phase (if enabled) and add noise.

    ``s`` is one N-vector or a (T, N) batch; each row gets its own phase and
    noise draw.
    """
    v = np.asarray(getattr(s, "entries", s), dtype=complex)
    sigma = math.sqrt(cfg.sigma2)
    lead = v.shape[:-1]
    theta = rng.uniform(0.0, 2.0 * math.pi, size=lead) if cfg.apply_random_phase else np.zeros(lead)
    noise = sigma * (rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape))
    return np.exp(1j * theta)[..., None] * v + noise


def detect_ml(r, c: Constellation):
    """
    ``argmax_m |<s_m|r>|``, lowest index on ties.

    ``r`` may be a single N-vector or a (T, N) batch.
    """
    r = np.asarray(r, dtype=complex)
    if r.shape[-1] != c.n:
        raise ValueError(f"received vector has dimension {r.shape[-1]}, constellation {c.n}")
    metric = np.abs(r @ np.conj(c.vectors).T)
    out = np.argmax(metric, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    total = np.zeros_like(x)
    while np.any(x):
        total += x & 1
        x >>= 1
    return total


def _run_block(c: Constellation, cfg: ChannelConfig, block: int, size: int, with_bits: bool):
    rng = np.random.default_rng([cfg.seed, block])
    m, n = c.m, c.n
    idx = rng.integers(0, m, size=size)
    sigma = math.sqrt(cfg.sigma2)
    noise = rng.standard_normal((size, 2 * n))
    r = c.vectors[idx]
    if cfg.apply_random_phase:
        r = r * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=size))[:, None]
    r = r + sigma * (noise[:, :n] + 1j * noise[:, n:])
    dec = np.argmax(np.abs(r @ np.conj(c.vectors).T), axis=1)
    wrong = dec != idx
    sym = int(np.count_nonzero(wrong))
    bits = None
    if with_bits and sym:
        bits = int(np.sum(_popcount(c.bits[idx[wrong]] ^ c.bits[dec[wrong]])))
    elif with_bits:
        bits = 0
    return sym, bits


def simulate(c: Constellation, cfg: ChannelConfig, count_bits: Optional[bool] = None) -> SimResult:
    """
    Estimate symbol and bit error rates.

    Parameters
    ----------
    count_bits : bool, optional
        Count bit errors through the labels; defaults to whether the
        constellation carries labels.

    Notes
    -----
    With ``cfg.early_stop`` the run ends at the first block boundary where at
    least 100 errors (bit errors when counted, else symbol errors) and at
    least one million trials have accumulated.
    """
    with_bits = c.bits is not None if count_bits is None else count_bits
    if with_bits and c.bits is None:
        raise ValueError("bit errors requested but the constellation has no labels")
    nblocks = -(-cfg.trials // BLOCK)
    sizes = [BLOCK] * (nblocks - 1) + [cfg.trials - BLOCK * (nblocks - 1)]
    workers = worker_count()
    done_trials = 0
    sym_total = 0
    bit_total = 0 if with_bits else None
    wave = max(1, workers) * 4
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        b0 = 0
        stop = False
        while b0 < nblocks and not stop:
            ids = range(b0, min(nblocks, b0 + wave))
            if pool is not None:
                res = list(pool.map(lambda b: _run_block(c, cfg, b, sizes[b], with_bits), ids))
            else:
                res = [_run_block(c, cfg, b, sizes[b], with_bits) for b in ids]
            for b, (sym, bits) in zip(ids, res):
                done_trials += sizes[b]
                sym_total += sym
                if with_bits:
                    bit_total += bits
                if cfg.early_stop:
                    errs = bit_total if with_bits else sym_total
                    if errs >= EARLY_STOP_ERRORS and done_trials >= EARLY_STOP_TRIALS:
                        stop = True
                        break
            b0 += wave
    finally:
        if pool is not None:
            pool.shutdown()
    return SimResult.from_counts(done_trials, sym_total, bit_total, c.k, cfg.seed)


def received_dyad_decomposition(s, noise):
    """
    Split ``|r><r|`` for ``r = s + n`` into the signal dyad, the
    signal-noise beating ``|s><n| + |n><s|`` and the noise dyad.
    """
    v = np.asarray(getattr(s, "entries", s), dtype=complex)
    nv = np.asarray(noise, dtype=complex)
    if v.shape != nv.shape:
        raise ValueError("signal and noise dimensions differ")
    sig = np.outer(v, np.conj(v))
    cross = np.outer(v, np.conj(nv))
    beat = cross + cross.conj().T
    return sig, beat, np.outer(nv, np.conj(nv))


def rice_oracle_counts(geom, snr, trials: int, seed: int = 0):
    """
    Count trials with ``psi_- >= psi_+`` for two independent Rice variables.

    ``psi_- = |(x_1 + rho_-) + i y_1|`` and ``psi_+ = |(x_2 + rho_+) + i y_2|``
    with four i.i.d. Gaussians of variance ``1 / (2 gamma_s)``.

    Returns
    -------
    (int, int)
        Event count and number of trials.
    """
    if trials < 10_000:
        raise ValueError("use at least 1e4 trials")
    g = geom if isinstance(geom, PairGeometry) else PairGeometry.from_gamma(float(geom))
    gs = snr.gamma_s if isinstance(snr, SnrPoint) else float(snr)
    sigma = math.sqrt(1.0 / (2.0 * gs))
    rm, rp = g.rho_minus / sigma, g.rho_plus / sigma  # work in units of sigma
    nchunks = -(-trials // _RICE_CHUNK)

    def chunk(i: int) -> int:
        size = min(_RICE_CHUNK, trials - i * _RICE_CHUNK)
        rng = np.random.default_rng([seed, i])
        x = rng.standard_normal((4, size))
        a = x[0] + rm
        b = x[2] + rp
        return int(np.count_nonzero(a * a + x[1] * x[1] >= b * b + x[3] * x[3]))

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            counts = list(ex.map(chunk, range(nchunks)))
    else:
        counts = [chunk(i) for i in range(nchunks)]
    return int(sum(counts)), int(trials)


def pairwise_error_rice_oracle(geom, snr, trials: int = 10_000_000, seed: int = 0) -> float:
    """Monte-Carlo estimate of the pairwise error probability from Rice draws."""
    hits, n = rice_oracle_counts(geom, snr, trials, seed)
    return hits / n
