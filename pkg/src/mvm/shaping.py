"""
Geometric shaping of Jones-vector constellations.

Pair potentials depend on a pair only through ``t = |<s_i|s_j>|**2``.  For
a total energy ``U = sum_{i<j} u(t_ij)`` the gradient with respect to the
real and imaginary parts of ``s_i``, packed as ``dU/dx + i dU/dy``, is

    G_i = 2 sum_j u'(t_ij) <s_j|s_i> s_j.

Descent steps move along the component of ``G_i`` tangent to the sphere and
then renormalize each vector.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .core import Constellation, coherence_matrix, stokes_constant
from .errprob import SnrPoint, pairwise_error

__all__ = [
    "COINCIDENT_TOL",
    "DescentConfig",
    "DescentDiverged",
    "DescentTrace",
    "Histogram",
    "NeighborGraph",
    "Potential",
    "SicConvergenceError",
    "coherence_histogram",
    "distance_matrix",
    "neighbor_graph",
    "optimize",
    "orthogonal_set",
    "potential_energy",
    "potential_gradient",
    "projected_gradient",
    "shortest_edges",
    "sic_povm",
    "standard_hypercube",
    "weyl_heisenberg_displacements",
]

COINCIDENT_TOL = 1e-9
HYPERCUBE_MAX_M = 4096
SIC_MAX_N = 16


class DescentDiverged(RuntimeError):
    """Backtracking could not find a descent step while the gradient is large."""


class SicConvergenceError(RuntimeError):
    def __init__(self, n: int, residual: float):
        super().__init__(f"SIC search for N={n} failed; best residual {residual:.3g}")
        self.n = n
        self.residual = residual


@dataclass(frozen=True)
class Potential:
    """
    Pair potential used as the shaping objective.

    ``kind="coulomb"`` sums inverse Stokes distances; ``kind="union_bound"``
    is the (unclipped) symbol union bound at ``snr``.
    """

    kind: str = "coulomb"
    snr: Optional[SnrPoint] = None
    method: str = "exact"
    fd_step: float = 1e-7  # step in t = gamma**2 for the union-bound derivative

    def __post_init__(self):
        if self.kind not in ("coulomb", "union_bound"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "union_bound" and self.snr is None:
            raise ValueError("union_bound potential needs an SNR point")

    @classmethod
    def coulomb(cls) -> "Potential":
        return cls("coulomb")

    @classmethod
    def union_bound(cls, snr: SnrPoint, method: str = "exact") -> "Potential":
        return cls("union_bound", snr=snr, method=method)


@dataclass(frozen=True)
class DescentConfig:
    max_iters: int = 5000
    initial_step: float = 0.05
    step_shrink: float = 0.5
    step_grow: float = 1.1
    grad_tolerance: float = 1e-6
    seed: int = 0
    normalize_energy: bool = False  # divide the potential by its starting value

    def __post_init__(self):
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class DescentTrace:
    """Accepted steps as ``(iter, energy, grad_norm, step)`` rows."""

    iterations: List[Tuple[int, float, float, float]] = field(default_factory=list)
    initial_energy: float = math.nan
    final_grad_norm: float = math.nan
    status: str = "running"

    def record(self, it: int, energy: float, grad_norm: float, step: float) -> None:
        self.iterations.append((int(it), float(energy), float(grad_norm), float(step)))

    @property
    def accepted(self) -> int:
        return len(self.iterations)

    @property
    def energies(self) -> np.ndarray:
        return np.array([row[1] for row in self.iterations])

    @property
    def final_energy(self) -> float:
        return self.iterations[-1][1] if self.iterations else self.initial_energy

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "energy", "grad_norm", "step"])
            for it, e, g, s in self.iterations:
                w.writerow([it, format(e, ".17g"), format(g, ".17g"), format(s, ".17g")])


# ---------------------------------------------------------------------------
# Energies and gradients
# ---------------------------------------------------------------------------


def _vectors(c) -> np.ndarray:
    return c.vectors if isinstance(c, Constellation) else np.asarray(c, dtype=complex)


def _coulomb_terms(t: np.ndarray, n: int):
    """Energy per pair and du/dt for u = 1 / d_Stokes."""
    two_c = 2.0 * stokes_constant(n)
    d = two_c * np.sqrt(np.maximum(0.0, 1.0 - t))
    if np.any(d < COINCIDENT_TOL):
        raise ValueError("coincident symbols: Coulomb energy is infinite")
    return 1.0 / d, 0.5 * two_c**2 / d**3


def _union_pair_p(t: np.ndarray, p: Potential) -> np.ndarray:
    return pairwise_error(np.sqrt(np.clip(t, 0.0, 1.0)), p.snr.gamma_s, p.method)


def _union_terms(t: np.ndarray, m: int, p: Potential, need_grad: bool):
    scale = 2.0 / m
    val = scale * _union_pair_p(t, p)
    if not need_grad:
        return val, None
    h = p.fd_step
    lo = np.clip(t - h, 0.0, 1.0)
    hi = np.clip(t + h, 0.0, 1.0)
    # one-sided at the ends of [0, 1]
    deriv = scale * (_union_pair_p(hi, p) - _union_pair_p(lo, p)) / (hi - lo)
    return val, deriv


def _pair_terms(v: np.ndarray, p: Potential, need_grad: bool):
    m, n = v.shape
    z = np.conj(v) @ v.T  # z[j, i] = <s_j|s_i>
    iu = np.triu_indices(m, 1)
    t = np.minimum(np.abs(z[iu]) ** 2, 1.0)
    if p.kind == "coulomb":
        val, deriv = _coulomb_terms(t, n)
    else:
        val, deriv = _union_terms(t, m, p, need_grad)
    return z, iu, val, deriv


def potential_energy(c, p: Potential) -> float:
    """Total pair energy of a constellation (or an (M, N) array)."""
    v = _vectors(c)
    if v.shape[0] < 2:
        raise ValueError("need at least two symbols")
    _, _, val, _ = _pair_terms(v, p, need_grad=False)
    return float(np.sum(val))


def potential_gradient(c, p: Potential) -> np.ndarray:
    """
    Euclidean gradient as a complex (M, N) array ``dU/dx + i dU/dy``.

    For the Coulomb potential this is ``4 C_N^2 sum_j d_ij^-3 <s_j|s_i> s_j``.
    """
    v = _vectors(c)
    m = v.shape[0]
    z, iu, _, deriv = _pair_terms(v, p, need_grad=True)
    w = np.zeros((m, m))
    w[iu] = deriv
    w = w + w.T
    return 2.0 * (w * z.T) @ v


def projected_gradient(c, grad: np.ndarray) -> np.ndarray:
    """Remove the radial part ``Re<s_i|G_i> s_i`` from each row."""
    v = _vectors(c)
    radial = np.real(np.sum(np.conj(v) * grad, axis=1))
    return grad - radial[:, None] * v


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def optimize(c0: Constellation, p: Potential, cfg: DescentConfig = DescentConfig()):
    """
    Projected gradient descent with per-vector renormalization.

    The step grows by ``cfg.step_grow`` after each accepted move and shrinks
    by ``cfg.step_shrink`` until the energy strictly decreases.  Stops when
    the projected gradient norm falls to ``cfg.grad_tolerance``, after
    ``cfg.max_iters`` accepted steps, or when the energy can no longer be
    lowered at working precision (``status == "stalled"``).

    Returns
    -------
    (Constellation, DescentTrace)

    Raises
    ------
    DescentDiverged
        If the step underflows while the gradient is too large for the
        stall to be explained by rounding, or the energy becomes non-finite.
    """
    v = c0.vectors.copy()
    trace = DescentTrace()
    energy = potential_energy(v, p)
    trace.initial_energy = energy
    unit = 1.0
    if cfg.normalize_energy and energy > 0:
        unit = 1.0 / energy
    grad = projected_gradient(v, potential_gradient(v, p)) * unit
    gnorm = float(np.linalg.norm(grad))
    step = cfg.initial_step
    eps = np.finfo(float).eps
    trace.status = "max_iters"
    it = 0
    while it < cfg.max_iters:
        if not np.isfinite(gnorm):
            raise DescentDiverged("gradient is not finite")
        if gnorm <= cfg.grad_tolerance:
            trace.status = "converged"
            break
        while True:
            cand = _normalize_rows(v - step * grad)
            e_new = potential_energy(cand, p)
            if not math.isfinite(e_new):
                raise DescentDiverged("energy is not finite")
            if e_new < energy:
                break
            step *= cfg.step_shrink
            if step < 1e-15:
                break
        if step < 1e-15:
            # a first-order decrease of step * |g|^2 is below rounding of the energy
            if step * gnorm**2 > 1e3 * eps * abs(energy * unit):
                raise DescentDiverged(f"step underflow with gradient norm {gnorm:.3g}")
            trace.status = "stalled"
            break
        it += 1
        v = cand
        energy = e_new
        grad = projected_gradient(v, potential_gradient(v, p)) * unit
        gnorm = float(np.linalg.norm(grad))
        trace.record(it, energy, gnorm, step)
        step *= cfg.step_grow
    trace.final_grad_norm = gnorm
    meta = dict(c0.metadata)
    meta.update({"shaped_with": p.kind, "descent_steps": str(trace.accepted)})
    out = Constellation(_normalize_rows(v), bits=c0.bits, metadata=meta)
    return out, trace


# ---------------------------------------------------------------------------
# Deterministic generators
# ---------------------------------------------------------------------------


def standard_hypercube(n: int) -> Constellation:
    """``[1, u_2, ..., u_N] / sqrt(N)`` with every ``u_i`` in ``{1, -1, i, -i}``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    m = 4 ** (n - 1)
    if m > HYPERCUBE_MAX_M:
        raise ValueError(f"hypercube with N={n} has {m} points, above the cap {HYPERCUBE_MAX_M}")
    alphabet = (1.0, -1.0, 1j, -1j)
    rows = [(1.0,) + tail for tail in itertools.product(alphabet, repeat=n - 1)]
    return Constellation(
        np.array(rows, dtype=complex) / math.sqrt(n), metadata={"generator": "hypercube"}
    )


def orthogonal_set(n: int, m: Optional[int] = None) -> Constellation:
    """First ``m`` standard basis vectors of ``C^n``."""
    m = n if m is None else m
    if m > n:
        raise ValueError(f"cannot place {m} orthogonal vectors in dimension {n}")
    if m < 1:
        raise ValueError("m must be >= 1")
    return Constellation(np.eye(n, dtype=complex)[:m], metadata={"generator": "orthogonal"})


def weyl_heisenberg_displacements(d: int) -> np.ndarray:
    """All ``X^p Z^q`` for ``p, q`` in ``0..d-1`` as a (d*d, d, d) array."""
    w = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(w ** np.arange(d))
    out = np.empty((d * d, d, d), dtype=complex)
    xp = np.eye(d, dtype=complex)
    for p in range(d):
        zq = np.eye(d, dtype=complex)
        for q in range(d):
            out[p * d + q] = xp @ zq
            zq = zq @ clock
        xp = xp @ shift
    return out


def _fiducial_objective(d: int, disp: np.ndarray):
    disp_h = np.conj(disp.transpose(0, 2, 1))

    def fun(x):
        psi = x[:d] + 1j * x[d:]
        n2 = float(np.vdot(psi, psi).real)
        dp = disp @ psi
        c = dp @ np.conj(psi)  # <psi|D|psi>
        a = np.abs(c) ** 2
        num = float(np.sum(a * a))
        den = n2**4
        dhp = disp_h @ psi
        g_num = 4.0 * np.sum((a * np.conj(c))[:, None] * dp + (a * c)[:, None] * dhp, axis=0)
        g_den = 8.0 * n2**3 * psi
        g = (g_num * den - num * g_den) / den**2
        return num / den, np.concatenate([g.real, g.imag])

    return fun


def sic_povm(n: int, seed: int = 0, tol: float = 1e-6, restarts: Optional[int] = None) -> Constellation:
    """
    Numerical SIC-POVM: ``N**2`` unit vectors with ``|<s_i|s_j>|**2 = 1/(N+1)``.

    The set is the orbit of a fiducial vector under the Weyl-Heisenberg
    displacements.  The fiducial minimizes the fourth frame potential of that
    orbit, whose minimum ``2N/(N+1)`` is reached exactly by SIC fiducials;
    seeded random starts are refined with L-BFGS.

    Raises
    ------
    SicConvergenceError
        If no start reaches ``tol`` within the retry budget.
    """
    if not 2 <= n <= SIC_MAX_N:
        raise ValueError(f"sic_povm supports 2 <= n <= {SIC_MAX_N}, got {n}")
    budget = restarts if restarts is not None else (200 if n >= 8 else 20)
    disp = weyl_heisenberg_displacements(n)
    fun = _fiducial_objective(n, disp)
    rng = np.random.default_rng(seed)
    target = 1.0 / (n + 1)
    off = ~np.eye(n * n, dtype=bool)
    best_res, best_vecs = math.inf, None
    for attempt in range(budget):
        x0 = rng.standard_normal(2 * n)
        res = minimize(
            fun, x0, jac=True, method="L-BFGS-B",
            options={"maxiter": 20000, "gtol": 1e-14, "ftol": 1e-16},
        )
        psi = res.x[:n] + 1j * res.x[n:]
        psi = psi / np.linalg.norm(psi)
        vecs = _normalize_rows(disp @ psi)
        resid = float(np.max(np.abs(coherence_matrix(vecs)[off] ** 2 - target)))
        if resid < best_res:
            best_res, best_vecs = resid, vecs
        if resid <= tol:
            break
    if best_res > tol:
        raise SicConvergenceError(n, best_res)
    return Constellation(
        best_vecs,
        metadata={"generator": "sic", "seed": str(seed), "residual": format(best_res, ".3g")},
    )


# ---------------------------------------------------------------------------
# Packing diagnostics
# ---------------------------------------------------------------------------


def distance_matrix(c, metric: str = "stokes") -> np.ndarray:
    """Pairwise ``d_dd``, ``d_hs``, ``d_stokes`` or ``d_coh`` distances."""
    v = _vectors(c)
    z = np.conj(v) @ v.T
    g = np.clip(np.abs(z), 0.0, 1.0)
    if metric == "dd":
        d = math.sqrt(2.0) * np.sqrt(1.0 - g)
    elif metric == "hs":
        d = math.sqrt(2.0) * np.sqrt(1.0 - g * g)
    elif metric == "stokes":
        d = 2.0 * stokes_constant(v.shape[1]) * np.sqrt(1.0 - g * g)
    elif metric == "coh":
        d = math.sqrt(2.0) * np.sqrt(np.maximum(0.0, 1.0 - z.real))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    np.fill_diagonal(d, 0.0)
    return d


def shortest_edges(c, count: int, metric: str = "stokes") -> np.ndarray:
    """The ``count`` smallest pair distances in ascending order."""
    d = distance_matrix(c, metric)
    iu = np.triu_indices(d.shape[0], 1)
    return np.sort(d[iu])[:count]


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    minimum: float
    maximum: float
    mean: float

    def nonempty(self):
        """``(left_edge, count)`` for every occupied bin."""
        return [(float(self.edges[i]), int(k)) for i, k in enumerate(self.counts) if k]


def coherence_histogram(c, metric: str = "dd", bin_width: float = 0.05, snap: float = 1e-6) -> Histogram:
    """
    Histogram of all pair distances, bins of ``bin_width`` aligned at 0.

    Distances within ``snap`` of a bin edge are moved onto it, so equal
    distances carrying optimizer-level noise stay in one bin.
    """
    d = distance_matrix(c, metric)
    iu = np.triu_indices(d.shape[0], 1)
    vals = d[iu]
    if vals.size == 0:
        raise ValueError("need at least two symbols")
    pos = vals / bin_width
    near = np.abs(pos - np.round(pos)) * bin_width <= snap
    pos = np.where(near, np.round(pos), pos)
    lo = math.floor(pos.min())
    idx = np.floor(pos).astype(int) - lo
    nb = int(idx.max()) + 1
    edges = bin_width * (lo + np.arange(nb + 1))
    counts = np.bincount(idx, minlength=nb)
    return Histogram(edges, counts, float(vals.min()), float(vals.max()), float(vals.mean()))


@dataclass(frozen=True)
class NeighborGraph:
    """Pairs within ``factor`` times the minimum distance."""

    edges: Tuple[Tuple[int, int], ...]
    min_distance: float
    degrees: np.ndarray

    @property
    def mean_degree(self) -> float:
        return float(np.mean(self.degrees))

    def degree_histogram(self) -> dict:
        vals, counts = np.unique(self.degrees, return_counts=True)
        return {int(v): int(k) for v, k in zip(vals, counts)}


def neighbor_graph(c, metric: str = "stokes", factor: float = 1.05) -> NeighborGraph:
    d = distance_matrix(c, metric)
    m = d.shape[0]
    iu = np.triu_indices(m, 1)
    dmin = float(d[iu].min())
    mask = d[iu] <= factor * dmin
    edges = tuple((int(i), int(j)) for i, j, ok in zip(iu[0], iu[1], mask) if ok)
    deg = np.zeros(m, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    return NeighborGraph(edges, dmin, deg)
