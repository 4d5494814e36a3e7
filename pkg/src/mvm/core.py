"""
Generalized Jones/Stokes algebra for equipower mode-vector constellations.

Jones vectors are unit complex N-vectors defined up to a global phase.  The
generalized Stokes vector of ``|s>`` is ``C_N <s|Lambda|s>`` where ``Lambda``
collects the N**2 - 1 generalized Gell-Mann matrices and
``C_N = sqrt(N / (2 (N - 1)))``.

Gell-Mann ordering used throughout (and in the file format): all symmetric
off-diagonal matrices ``E_jk + E_kj`` for j < k in lexicographic order, then
all antisymmetric ones ``-i E_jk + i E_kj`` in the same order, then the
diagonal ones ``sqrt(2 / (l (l + 1))) diag(1, ..., 1, -l, 0, ..., 0)`` for
l = 1, ..., N - 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

import numpy as np

__all__ = [
    "NORM_TOL",
    "IDENTITY_TOL",
    "ZERO_NORM",
    "JonesVector",
    "HypersphericalCoords",
    "StokesVector",
    "GellMannBasis",
    "PairGeometry",
    "Constellation",
    "stokes_constant",
    "gell_mann_basis",
    "jones_from_hyperspherical",
    "hyperspherical_from_jones",
    "stokes_from_jones",
    "stokes_matrix",
    "pair_geometry",
    "dist_coherent",
    "dist_dd",
    "dist_hs",
    "dist_stokes",
    "projection_dyad",
    "stokes_from_dyad",
    "dyad_from_stokes",
    "jones_from_stokes",
    "canonicalize",
    "coherence_matrix",
    "random_constellation",
    "is_power_of_two",
    "load_constellation",
    "save_constellation",
    "constellation_to_json",
    "constellation_from_json",
]

NORM_TOL = 1e-12
IDENTITY_TOL = 1e-10
ZERO_NORM = 1e-9

ArrayLike = Union[np.ndarray, Sequence[complex]]


def is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


def stokes_constant(n: int) -> float:
    """Normalization ``C_N = sqrt(N / (2 (N - 1)))``."""
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    return math.sqrt(n / (2.0 * (n - 1)))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JonesVector:
    """Unit complex N-vector (one equipower symbol, phase ambiguous)."""

    entries: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.entries, dtype=complex).reshape(-1)
        if v.size < 2:
            raise ValueError("Jones vectors need N >= 2 entries")
        nrm = np.linalg.norm(v)
        if nrm < ZERO_NORM:
            raise ValueError("zero Jones vector")
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"Jones vector is not unit norm (|s| = {nrm!r})")
        v.setflags(write=False)
        object.__setattr__(self, "entries", v)

    @classmethod
    def normalized(cls, entries: ArrayLike) -> "JonesVector":
        v = np.asarray(entries, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm < ZERO_NORM:
            raise ValueError("zero Jones vector")
        return cls(v / nrm)

    @property
    def n(self) -> int:
        return self.entries.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class HypersphericalCoords:
    """Polar angles ``phis`` in [0, pi/2] and phases ``thetas`` in [0, 2 pi)."""

    phis: tuple
    thetas: tuple

    def __post_init__(self):
        phis = tuple(float(p) for p in np.atleast_1d(self.phis))
        thetas = tuple(float(t) for t in np.atleast_1d(self.thetas))
        if len(phis) != len(thetas):
            raise ValueError(
                f"need as many phases as polar angles, got {len(phis)} and {len(thetas)}"
            )
        if len(phis) < 1:
            raise ValueError("need at least one angle pair (N >= 2)")
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "thetas", thetas)

    @property
    def n(self) -> int:
        return len(self.phis) + 1


@dataclass(frozen=True)
class StokesVector:
    components: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.components, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "components", v)

    @property
    def n(self) -> int:
        return int(round(math.sqrt(self.components.size + 1)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


@dataclass(frozen=True)
class GellMannBasis:
    """The N**2 - 1 generalized Gell-Mann matrices, shape (N**2 - 1, N, N)."""

    matrices: np.ndarray

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def __len__(self):
        return self.matrices.shape[0]


@dataclass(frozen=True)
class PairGeometry:
    gamma: float
    delta: float
    rho_minus: float
    rho_plus: float

    @classmethod
    def from_gamma(cls, gamma: float) -> "PairGeometry":
        g = float(min(max(gamma, 0.0), 1.0))
        d = math.sqrt(max(0.0, 1.0 - g * g))
        return cls(g, d, math.sqrt((1.0 - d) / 2.0), math.sqrt((1.0 + d) / 2.0))


@dataclass
class Constellation:
    """M unit Jones vectors in C^N plus optional bit labels.

    ``vectors`` is an (M, N) complex array; rows are renormalized on
    construction only if they already sit within ``NORM_TOL`` of the sphere.
    """

    vectors: np.ndarray
    bits: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.vectors, dtype=complex)
        if v.ndim != 2:
            raise ValueError("vectors must be an (M, N) array")
        if v.shape[1] < 2:
            raise ValueError("N must be >= 2")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms < ZERO_NORM):
            raise ValueError("constellation contains a zero vector")
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValueError("constellation vectors must have unit norm")
        self.vectors = v
        if self.bits is not None:
            b = np.asarray(self.bits, dtype=np.int64).reshape(-1)
            m = v.shape[0]
            if not is_power_of_two(m):
                raise ValueError(f"bit labels need M to be a power of two, got M={m}")
            if b.size != m or not np.array_equal(np.sort(b), np.arange(m)):
                raise ValueError("bit labels must be a permutation of 0..M-1")
            self.bits = b
        self.metadata = {str(k): str(val) for k, val in dict(self.metadata).items()}

    @classmethod
    def from_rows(cls, rows: ArrayLike, bits=None, metadata=None) -> "Constellation":
        """Build from arbitrary nonzero rows, normalizing each."""
        v = np.array(rows, dtype=complex)
        if v.ndim != 2:
            raise ValueError("rows must be two-dimensional")
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norms < ZERO_NORM):
            raise ValueError("constellation contains a zero vector")
        return cls(v / norms, bits=bits, metadata=dict(metadata or {}))

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> float:
        return math.log2(self.m)

    def __len__(self):
        return self.m

    def __getitem__(self, i) -> JonesVector:
        return JonesVector(self.vectors[i])

    def with_bits(self, bits) -> "Constellation":
        return Constellation(self.vectors.copy(), bits=bits, metadata=dict(self.metadata))

    def with_vectors(self, vectors) -> "Constellation":
        return Constellation(vectors, bits=self.bits, metadata=dict(self.metadata))


# ---------------------------------------------------------------------------
# Gell-Mann machinery
# ---------------------------------------------------------------------------


def _pairs(n: int):
    return [(j, k) for j in range(n) for k in range(j + 1, n)]


@lru_cache(maxsize=32)
def _gell_mann_array(n: int) -> np.ndarray:
    mats = []
    pairs = _pairs(n)
    for j, k in pairs:
        a = np.zeros((n, n), dtype=complex)
        a[j, k] = a[k, j] = 1.0
        mats.append(a)
    for j, k in pairs:
        a = np.zeros((n, n), dtype=complex)
        a[j, k] = -1j
        a[k, j] = 1j
        mats.append(a)
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag * math.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    out = np.array(mats)
    out.setflags(write=False)
    return out


def gell_mann_basis(n: int) -> GellMannBasis:
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    return GellMannBasis(_gell_mann_array(n))


def _as_array(s) -> np.ndarray:
    if isinstance(s, JonesVector):
        return s.entries
    return np.asarray(s, dtype=complex)


def _check_unit(v: np.ndarray, tol: float = NORM_TOL) -> None:
    nrm = np.linalg.norm(v, axis=-1)
    if np.any(nrm < ZERO_NORM):
        raise ValueError("zero Jones vector")
    if np.any(np.abs(nrm - 1.0) > tol):
        raise ValueError("Jones vector is not unit norm")


def _check_same_dim(s: np.ndarray, t: np.ndarray) -> None:
    if s.shape[-1] != t.shape[-1]:
        raise ValueError(f"dimension mismatch: {s.shape[-1]} vs {t.shape[-1]}")


# ---------------------------------------------------------------------------
# Parametrization and embeddings
# ---------------------------------------------------------------------------


def jones_from_hyperspherical(coords: HypersphericalCoords) -> JonesVector:
    """Unit Jones vector with real non-negative first entry from 2N - 2 angles."""
    phis = np.asarray(coords.phis)
    thetas = np.asarray(coords.thetas)
    if phis.size != thetas.size:
        raise ValueError("phis and thetas must have the same length")
    n = phis.size + 1
    out = np.empty(n, dtype=complex)
    sin_prod = 1.0
    out[0] = math.cos(phis[0])
    sin_prod = math.sin(phis[0])
    for i in range(1, n - 1):
        out[i] = sin_prod * math.cos(phis[i]) * np.exp(1j * thetas[i - 1])
        sin_prod *= math.sin(phis[i])
    out[n - 1] = sin_prod * np.exp(1j * thetas[n - 2])
    # cos/sin products are unit up to rounding
    return JonesVector(out / np.linalg.norm(out))


def hyperspherical_from_jones(s) -> HypersphericalCoords:
    """Inverse of :func:`jones_from_hyperspherical` after phase canonicalization.

    Phases of entries that vanish are reported as 0.
    """
    v = _as_array(s)
    _check_unit(v)
    v = v * np.exp(-1j * np.angle(v[0])) if abs(v[0]) > 0 else v
    mags = np.abs(v)
    n = v.size
    phis, thetas = [], []
    for i in range(n - 1):
        tail = np.linalg.norm(mags[i:])
        phis.append(float(np.arccos(np.clip(mags[i] / tail, -1.0, 1.0))) if tail > 0 else 0.0)
    for i in range(1, n):
        th = float(np.angle(v[i])) % (2 * math.pi) if mags[i] > 0 else 0.0
        thetas.append(th)
    return HypersphericalCoords(tuple(phis), tuple(thetas))


def stokes_matrix(vectors: np.ndarray) -> np.ndarray:
    """Stokes images of the rows of ``vectors`` (M, N) -> (M, N**2 - 1)."""
    v = np.atleast_2d(np.asarray(vectors, dtype=complex))
    n = v.shape[1]
    cn = stokes_constant(n)
    j, k = np.triu_indices(n, 1)
    cross = np.conj(v[:, j]) * v[:, k]
    sym = 2.0 * cross.real
    asym = 2.0 * cross.imag
    p = np.abs(v) ** 2
    cums = np.cumsum(p, axis=1)
    l = np.arange(1, n)
    diag = np.sqrt(2.0 / (l * (l + 1))) * (cums[:, :-1] - l * p[:, 1:])
    return cn * np.concatenate([sym, asym, diag], axis=1)


def stokes_from_jones(s) -> StokesVector:
    v = _as_array(s)
    _check_unit(v)
    return StokesVector(stokes_matrix(v[None, :])[0])


def projection_dyad(s) -> np.ndarray:
    """The rank-one projector ``|s><s|``."""
    v = _as_array(s)
    _check_unit(v)
    return np.outer(v, np.conj(v))


def stokes_from_dyad(dyad: np.ndarray) -> StokesVector:
    """Stokes coefficients of ``2 C_N (S - I/N)`` in the Gell-Mann basis."""
    S = np.asarray(dyad, dtype=complex)
    n = S.shape[0]
    cn = stokes_constant(n)
    traceless = 2.0 * cn * (S - np.eye(n) / n)
    basis = _gell_mann_array(n)
    # tr(Lambda_a Lambda_b) = 2 delta_ab
    coeffs = np.einsum("aij,ji->a", basis, traceless).real / 2.0
    return StokesVector(coeffs)


def dyad_from_stokes(stokes) -> np.ndarray:
    """``I/N + (1/(2 C_N)) s . Lambda`` for a Stokes vector of length N**2 - 1."""
    comps = np.asarray(getattr(stokes, "components", stokes), dtype=float)
    n = int(round(math.sqrt(comps.size + 1)))
    if n * n - 1 != comps.size:
        raise ValueError(f"length {comps.size} is not N**2 - 1")
    basis = _gell_mann_array(n)
    return np.eye(n) / n + np.einsum("a,aij->ij", comps, basis) / (2.0 * stokes_constant(n))


def jones_from_stokes(stokes) -> JonesVector:
    """Jones vector whose projector is closest to the dyad of ``stokes``.

    Exact for images of pure states (every unit 3-vector when N = 2).
    """
    w, u = np.linalg.eigh(dyad_from_stokes(stokes))
    return canonicalize(u[:, -1])


def canonicalize(s) -> JonesVector:
    """Rotate the global phase so the first nonzero entry is real positive."""
    v = np.array(_as_array(s), dtype=complex)
    nz = np.flatnonzero(np.abs(v) > 1e-15)
    if nz.size == 0:
        raise ValueError("zero Jones vector")
    v = v * np.exp(-1j * np.angle(v[nz[0]]))
    v[nz[0]] = abs(v[nz[0]])
    return JonesVector(v / np.linalg.norm(v))


# ---------------------------------------------------------------------------
# Pair geometry and distances
# ---------------------------------------------------------------------------


def _inner(s, t) -> complex:
    a, b = _as_array(s), _as_array(t)
    _check_same_dim(a, b)
    _check_unit(a)
    _check_unit(b)
    return complex(np.vdot(a, b))


def pair_geometry(s, t) -> PairGeometry:
    return PairGeometry.from_gamma(abs(_inner(s, t)))


def dist_coherent(s, t) -> float:
    return math.sqrt(2.0) * math.sqrt(max(0.0, 1.0 - _inner(s, t).real))


def dist_dd(s, t) -> float:
    return math.sqrt(2.0) * math.sqrt(max(0.0, 1.0 - min(1.0, abs(_inner(s, t)))))


def dist_hs(s, t) -> float:
    g = min(1.0, abs(_inner(s, t)))
    return math.sqrt(2.0) * math.sqrt(max(0.0, 1.0 - g * g))


def dist_stokes(s, t) -> float:
    a = _as_array(s)
    g = min(1.0, abs(_inner(s, t)))
    return 2.0 * stokes_constant(a.size) * math.sqrt(max(0.0, 1.0 - g * g))


def coherence_matrix(c: Union[Constellation, np.ndarray]) -> np.ndarray:
    """Matrix of pairwise ``gamma = |<s_i|s_j>|`` clipped to [0, 1]."""
    v = c.vectors if isinstance(c, Constellation) else np.asarray(c, dtype=complex)
    return np.clip(np.abs(np.conj(v) @ v.T), 0.0, 1.0)


def random_constellation(n: int, m: int, seed: int = 0) -> Constellation:
    """i.i.d. complex Gaussian rows, normalized (uniform on the unit sphere)."""
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    return Constellation.from_rows(
        rows, metadata={"generator": "random", "seed": str(seed)}
    )


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite number cannot be serialized")
    s = format(float(x), ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def constellation_to_json(c: Constellation) -> str:
    rows = []
    for row in c.vectors:
        pairs = ", ".join(f"[{_fmt(z.real)}, {_fmt(z.imag)}]" for z in row)
        rows.append(f"    [{pairs}]")
    parts = [f'  "n": {c.n}', f'  "m": {c.m}', '  "vectors": [\n' + ",\n".join(rows) + "\n  ]"]
    if c.bits is not None:
        parts.append('  "bits": [' + ", ".join(str(int(b)) for b in c.bits) + "]")
    parts.append('  "metadata": ' + json.dumps(dict(sorted(c.metadata.items())), ensure_ascii=False))
    return "{\n" + ",\n".join(parts) + "\n}\n"


def constellation_from_json(text: str) -> Constellation:
    try:
        obj = json.loads(text)
        n, m = int(obj["n"]), int(obj["m"])
        raw = np.asarray(obj["vectors"], dtype=float)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed constellation file: {exc}") from exc
    if raw.shape != (m, n, 2):
        raise ValueError(f"vectors have shape {raw.shape}, expected {(m, n, 2)}")
    vec = raw[..., 0] + 1j * raw[..., 1]
    meta = obj.get("metadata") or {}
    if not isinstance(meta, Mapping):
        raise ValueError("metadata must be an object")
    # decimal round trip can leave ~1e-16 norm error; tolerate and renormalize
    norms = np.linalg.norm(vec, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("vectors in file are not unit norm")
    # 17 significant digits reproduce the stored doubles exactly; only rows
    # written with fewer digits need renormalizing
    fix = np.abs(norms - 1.0) > NORM_TOL
    vec[fix] /= norms[fix, None]
    return Constellation(vec, bits=obj.get("bits"), metadata=dict(meta))


def save_constellation(c: Constellation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(constellation_to_json(c))


def load_constellation(path) -> Constellation:
    with open(path, "r", encoding="utf-8") as fh:
        return constellation_from_json(fh.read())
