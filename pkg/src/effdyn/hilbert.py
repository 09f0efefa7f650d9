"""Basis bookkeeping, sparse kets, coupling profiles and small dense algebra.

Everything in here is shared by the chain builder, the brute-force engine and
the observables.  Conventions: hbar = 1, a two-level system is "excited"
when its bit is set, and a fixed-excitation sector of N two-level systems
with m excitations is indexed by the colex rank of the excited subset.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

PRUNE = 1e-15
DENSE_ACCUMULATE = 1 << 22

SINE_CAVITY = "sine_cavity"
GAUSSIAN_DOT = "gaussian_dot"
HOMOGENEOUS_MATCHED = "homogeneous_matched"
EXPLICIT = "explicit"
PROFILE_KINDS = (SINE_CAVITY, GAUSSIAN_DOT, HOMOGENEOUS_MATCHED, EXPLICIT)

# Dot cutoff radius in units of the envelope size r0, see make_profile.
DEFAULT_DOT_RADIUS = 2.0


class GuardError(ValueError):
    """Requested problem size exceeds what an engine is allowed to build."""


# --------------------------------------------------------------------------- #
#                              coupling profiles                              #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class CouplingProfile:
    """Per-particle coupling strengths g_i (cavity) or alpha_i (dot)."""

    values: np.ndarray
    kind: str = EXPLICIT
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size < 1:
            raise ValueError("coupling profile needs at least one particle")
        if not np.all(np.isfinite(vals)):
            raise ValueError("coupling values must be finite")
        if np.any(vals < 0):
            raise ValueError("coupling values must be non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def norm(self) -> float:
        """Collective coupling sqrt(sum g_i^2), the one-excitation Rabi scale."""
        return float(np.sqrt(np.sum(self.values ** 2)))

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def matched_homogeneous(self) -> "CouplingProfile":
        return make_profile(HOMOGENEOUS_MATCHED, self.n, {"profile": self})


def dot_radii(n, R=DEFAULT_DOT_RADIUS):
    """Radii of n nuclei that each fill an equal volume of a ball of radius R.

    Sorted outward, so index 0 is the dot centre and index n-1 the edge.
    """
    i = np.arange(1, n + 1)
    return R * ((i - 0.5) / n) ** (1.0 / 3.0)


def make_profile(kind, N, params=None) -> CouplingProfile:
    """Build a coupling profile.

    Parameters
    ----------
    kind : str
        One of ``sine_cavity`` (needs ``g``), ``gaussian_dot`` (needs ``A``
        and ``r0``; ``R`` is optional and measured in the same units as
        ``r0``), ``homogeneous_matched`` (needs ``profile`` or ``values``)
        or ``explicit`` (needs ``values``).
    N : int
        Number of two-level systems.
    params : dict

    Returns
    -------
    CouplingProfile
    """
    params = dict(params or {})
    if N is None or int(N) < 1:
        raise ValueError("N must be >= 1")
    N = int(N)

    def need(*keys):
        missing = [k for k in keys if k not in params]
        if missing:
            raise ValueError(f"{kind} profile needs parameters {missing}")

    if kind == SINE_CAVITY:
        need("g")
        j = np.arange(1, N + 1)
        vals = float(params["g"]) * np.sin(j * np.pi / (N + 1))
        return CouplingProfile(vals, kind, {"g": float(params["g"]), "N": N})

    if kind == GAUSSIAN_DOT:
        need("A", "r0")
        A, r0 = float(params["A"]), float(params["r0"])
        R = float(params.get("R", DEFAULT_DOT_RADIUS * r0))
        r = dot_radii(N, R)
        w = np.exp(-(r / r0) ** 2)
        vals = A * w / w.sum()
        return CouplingProfile(vals, kind, {"A": A, "r0": r0, "R": R, "N": N})

    if kind == HOMOGENEOUS_MATCHED:
        if "profile" in params:
            src = np.asarray(params["profile"].values)
        else:
            need("values")
            src = np.asarray(params["values"], dtype=float)
        if src.size != N:
            raise ValueError("matched profile must have the same N as its source")
        level = np.sqrt(np.sum(src ** 2) / N)
        return CouplingProfile(np.full(N, level), kind, {"N": N, "level": level})

    if kind == EXPLICIT:
        need("values")
        vals = np.asarray(params["values"], dtype=float)
        if vals.size != N:
            raise ValueError(f"explicit profile has {vals.size} values, expected {N}")
        return CouplingProfile(vals, kind, {"N": N})

    raise ValueError(f"unknown profile kind {kind!r}")


# --------------------------------------------------------------------------- #
#                               sector indexing                               #
# --------------------------------------------------------------------------- #

def sector_dim(N, m) -> int:
    if not 0 <= m <= N:
        raise ValueError(f"excitation number {m} out of range for N={N}")
    return comb(N, m)


@lru_cache(maxsize=64)
def _binom_table(N, kmax):
    """binom[s, k] = C(s, k) for s <= N, k <= kmax, as int64."""
    t = np.zeros((N + 1, kmax + 1), dtype=np.int64)
    t[:, 0] = 1
    for s in range(1, N + 1):
        t[s, 1:] = t[s - 1, 1:] + t[s - 1, :-1]
    t.setflags(write=False)
    return t


class SectorBasis:
    """m-subsets of N two-level systems, indexed by colex rank.

    A subset s_0 < s_1 < ... < s_{m-1} (zero based) has rank
    sum_k C(s_k, k+1).  Ranks are contiguous in 0..C(N, m)-1.
    """

    def __init__(self, N, m):
        if not 0 <= m <= N:
            raise ValueError(f"excitation number {m} out of range for N={N}")
        self.N = int(N)
        self.m = int(m)
        self.dim = comb(self.N, self.m)
        if self.dim >= 2 ** 62:
            raise GuardError("sector too large to index with int64")
        self._table = _binom_table(self.N, self.m + 1)

    def __eq__(self, other):
        return isinstance(other, SectorBasis) and (self.N, self.m) == (other.N, other.m)

    def __hash__(self):
        return hash((self.N, self.m))

    def __repr__(self):
        return f"SectorBasis(N={self.N}, m={self.m})"

    def rank(self, subsets) -> np.ndarray:
        """Rank rows of a (k, m) array of sorted subsets."""
        subsets = np.asarray(subsets, dtype=np.int64)
        if self.m == 0:
            count = subsets.shape[0] if subsets.ndim == 2 else 1
            return np.zeros(count, dtype=np.int64)
        subsets = subsets.reshape(-1, self.m)
        out = np.zeros(subsets.shape[0], dtype=np.int64)
        for k in range(self.m):
            out += self._table[subsets[:, k], k + 1]
        return out

    def unrank(self, index) -> np.ndarray:
        """Inverse of rank: (k,) indices -> (k, m) sorted subsets."""
        r = np.array(index, dtype=np.int64).ravel()
        if r.size and (r.min() < 0 or r.max() >= self.dim):
            raise IndexError("sector index out of range")
        out = np.empty((r.size, self.m), dtype=np.int64)
        for k in range(self.m, 0, -1):
            col = self._table[:, k]
            s = np.searchsorted(col, r, side="right") - 1
            out[:, k - 1] = s
            r = r - col[s]
        return out

    def index_of(self, subset) -> int:
        return int(self.rank(np.sort(np.asarray(subset, dtype=np.int64)))[0])

    def subset_of(self, index) -> tuple:
        return tuple(int(x) for x in self.unrank([index])[0])

    def bitstrings(self) -> np.ndarray:
        """Integer bit patterns of every basis state, in rank order.

        Only for N <= 62.
        """
        if self.N > 62:
            raise GuardError("bitstrings need N <= 62")
        if self.m == 0:
            return np.zeros(1, dtype=np.int64)
        subs = self.unrank(np.arange(self.dim))
        return np.sum(np.left_shift(np.int64(1), subs), axis=1)


# --------------------------------------------------------------------------- #
#                                 sparse kets                                 #
# --------------------------------------------------------------------------- #

def _accumulate(indices, values, dim=None):
    """Sum duplicate indices; returns sorted unique indices and summed values."""
    if indices.size == 0:
        return indices.astype(np.int64), values.astype(complex)
    if dim is not None and dim <= max(DENSE_ACCUMULATE, 4 * indices.size):
        # bincount over the whole sector beats a sort when the sector is small
        re = np.bincount(indices, weights=values.real, minlength=dim)
        im = np.bincount(indices, weights=values.imag, minlength=dim)
        hit = np.bincount(indices, minlength=dim) > 0
        uniq = np.flatnonzero(hit)
        return uniq, re[uniq] + 1j * im[uniq]
    uniq, inv = np.unique(indices, return_inverse=True)
    re = np.bincount(inv, weights=values.real, minlength=uniq.size)
    im = np.bincount(inv, weights=values.imag, minlength=uniq.size)
    return uniq, re + 1j * im


class SparseKet:
    """Sparse complex vector over one SectorBasis.

    Stored as sorted unique int64 indices and complex amplitudes; entries
    with modulus below 1e-15 are dropped.  Instances are not mutated after
    construction.
    """

    __slots__ = ("sector", "indices", "values")

    def __init__(self, sector, indices=(), values=(), *, _trusted=False):
        self.sector = sector
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=complex).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        if not _trusted:
            idx, val = _accumulate(idx, val, sector.dim)
        keep = np.abs(val) >= PRUNE
        if not keep.all():
            idx, val = idx[keep], val[keep]
        idx.setflags(write=False)
        val.setflags(write=False)
        self.indices = idx
        self.values = val

    # construction helpers
    @classmethod
    def basis_state(cls, sector, subset, amplitude=1.0):
        return cls(sector, [sector.index_of(subset)], [amplitude])

    @classmethod
    def from_dense(cls, sector, vec):
        vec = np.asarray(vec, dtype=complex).ravel()
        if vec.size != sector.dim:
            raise ValueError("dense vector does not match the sector dimension")
        nz = np.flatnonzero(np.abs(vec) >= PRUNE)
        return cls(sector, nz, vec[nz], _trusted=True)

    @classmethod
    def zero(cls, sector):
        return cls(sector, [], [], _trusted=True)

    # basic algebra
    @property
    def nnz(self) -> int:
        return self.indices.size

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.sector.dim, dtype=complex)
        out[self.indices] = self.values
        return out

    def vdot(self, other) -> complex:
        """<self|other>."""
        self._check_same_sector(other)
        a, b = (self, other) if self.nnz <= other.nnz else (other, self)
        if a.nnz == 0:
            return 0j
        pos = np.searchsorted(b.indices, a.indices)
        pos[pos == b.nnz] = 0
        hit = b.indices[pos] == a.indices
        va, vb = a.values[hit], b.values[pos[hit]]
        if a is not self:
            va, vb = vb, va
        return complex(np.vdot(va, vb))

    def scale(self, c) -> "SparseKet":
        return SparseKet(self.sector, self.indices, self.values * c, _trusted=True)

    def combine(self, coeffs, kets) -> "SparseKet":
        """self + sum_k coeffs[k] * kets[k]."""
        idx = [self.indices] + [k.indices for k in kets]
        val = [self.values] + [c * k.values for c, k in zip(coeffs, kets)]
        for k in kets:
            self._check_same_sector(k)
        return SparseKet(self.sector, np.concatenate(idx), np.concatenate(val))

    def __add__(self, other):
        return self.combine([1.0], [other])

    def __sub__(self, other):
        return self.combine([-1.0], [other])

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def _check_same_sector(self, other):
        if self.sector != other.sector:
            raise ValueError(f"kets live in different sectors: {self.sector} vs {other.sector}")

    def __repr__(self):
        return f"SparseKet({self.sector}, nnz={self.nnz}, norm={self.norm():.6g})"


def collective_raise(profile, ket) -> SparseKet:
    """sum_i g_i sigma_i^+ |ket>, unnormalized, into sector m+1."""
    sec = ket.sector
    N, m = sec.N, sec.m
    if m >= N:
        raise ValueError("cannot raise a fully excited sector")
    g = np.asarray(profile.values)
    if g.size != N:
        raise ValueError("profile length does not match the ket's sector")
    target = SectorBasis(N, m + 1)
    if ket.nnz == 0:
        return SparseKet.zero(target)
    subs = sec.unrank(ket.indices)                      # (k, m)
    k = subs.shape[0]
    occ = np.zeros((k, N), dtype=bool)
    if m:
        occ[np.repeat(np.arange(k), m), subs.ravel()] = True
    rows, sites = np.nonzero(~occ)                      # every (state, free site)
    amp = ket.values[rows] * g[sites]
    if m:
        new = np.concatenate([subs[rows], sites[:, None]], axis=1)
        new.sort(axis=1)
    else:
        new = sites[:, None]
    return SparseKet(target, target.rank(new), amp)


def collective_lower(profile, ket) -> SparseKet:
    """sum_i g_i sigma_i^- |ket>, the adjoint of collective_raise."""
    sec = ket.sector
    N, m = sec.N, sec.m
    if m == 0:
        raise ValueError("cannot lower the empty sector")
    g = np.asarray(profile.values)
    if g.size != N:
        raise ValueError("profile length does not match the ket's sector")
    target = SectorBasis(N, m - 1)
    if ket.nnz == 0:
        return SparseKet.zero(target)
    subs = sec.unrank(ket.indices)
    idx, amp = [], []
    for drop in range(m):
        rest = np.delete(subs, drop, axis=1)
        idx.append(target.rank(rest) if m > 1 else np.zeros(subs.shape[0], dtype=np.int64))
        amp.append(ket.values * g[subs[:, drop]])
    return SparseKet(target, np.concatenate(idx), np.concatenate(amp))


# --------------------------------------------------------------------------- #
#                            small dense algebra                              #
# --------------------------------------------------------------------------- #

class DensityMatrixSmall:
    """Dense Hermitian, unit-trace, positive matrix (electron or small space)."""

    def __init__(self, entries, *, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10):
        rho = np.array(entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > trace_tol:
            raise ValueError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
        rho = 0.5 * (rho + rho.conj().T)
        if np.linalg.eigvalsh(rho).min() < -eig_tol:
            raise ValueError("density matrix has negative eigenvalues")
        rho.setflags(write=False)
        self.entries = rho

    @classmethod
    def pure(cls, psi):
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def __repr__(self):
        return f"DensityMatrixSmall(dim={self.dim}, purity={self.purity():.6g})"


def hermitian_eig(H, tol=1e-10):
    """Eigen-decomposition of a dense Hermitian matrix, eigenvalues ascending."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol:
        raise ValueError("matrix is not Hermitian within tolerance")
    return np.linalg.eigh(0.5 * (H + H.conj().T))
