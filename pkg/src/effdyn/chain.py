"""Collective-state chains and the effective Hamiltonians they span.

A chain starts from a seed ket of the two-level ensemble and grows by
alternately applying the collective raising operator J+ = sum_i g_i sigma_i^+
and its adjoint J-, Gram-Schmidt orthogonalizing every new image against the
states already kept in its excitation column.  States are labelled by
(row, col): ``col`` is the number of ensemble excitations and ``row`` the
orthogonalization depth, so the first row is the ladder (J+)^m |seed> and
each further row collects the directions that the inhomogeneity leaks into.

Rows are built one at a time, sweeping columns left to right.  The state at
(row r, col m) is the first candidate, in the order

    J+ (r, m-1),   J- (r-1, m+1),   J+ (r-1, m-1)

whose residual survives orthogonalization.  For a ground-state seed this
reproduces the familiar |1_p> = residual of J-|2>, |2_p> = residual of
J+|1_p>, |1_pp> = residual of J-|2_p>, ...
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .hilbert import (SectorBasis, SparseKet, collective_lower,
                      collective_raise)

ITC = "itc"
CENTRAL_SPIN = "central_spin"
UP, DOWN = "up", "down"

DEP_TOL = 1e-10


class ChainLabel(NamedTuple):
    row: int
    col: int


@dataclass
class Orthogonalized:
    residual: SparseKet | None
    overlaps: np.ndarray
    residual_norm: float
    dependent: bool


def orthogonalize(candidate, basis, tol=DEP_TOL) -> Orthogonalized:
    """Project ``candidate`` off an orthonormal ``basis`` (classical GS, twice).

    Returns the normalized residual (``None`` when the candidate is linearly
    dependent, i.e. the residual norm is below ``tol`` times its own norm),
    the overlaps <b_k|candidate> and the residual norm, such that
    candidate = sum_k overlaps[k] b_k + residual_norm * residual.
    """
    total = np.zeros(len(basis), dtype=complex)
    vec = candidate
    scale = candidate.norm()
    for _ in range(2):
        if not basis:
            break
        c = np.array([b.vdot(vec) for b in basis])
        total += c
        vec = vec.combine(-c, basis)
    rnorm = vec.norm()
    if scale == 0.0 or rnorm < tol * scale:
        return Orthogonalized(None, total, rnorm, True)
    return Orthogonalized(vec.scale(1.0 / rnorm), total, rnorm, False)


@dataclass
class EffectiveBasis:
    """Orthonormal collective states of one chain.

    ``couplings[m]`` is the matrix <col m+1, i| J+ |col m, j> between the kept
    states of neighbouring columns (rows indexed in ``column(m)`` order).
    ``residual_log`` lists every candidate that was dropped, as
    (label it would have had, residual norm, reason).
    """

    model: str
    profile: object
    labels: list
    vectors: list
    couplings: dict
    residual_log: list = field(default_factory=list)
    seed_label: ChainLabel | None = None
    min_col: int = 0
    max_col: int = 0

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(ChainLabel(*label))

    def column(self, m) -> list:
        """Positions (into labels/vectors) of the states in column m, by row."""
        return [i for i, lab in enumerate(self.labels) if lab.col == m]

    @property
    def columns(self) -> list:
        return sorted({lab.col for lab in self.labels})

    @property
    def rows(self) -> list:
        return sorted({lab.row for lab in self.labels})

    def gram(self, m) -> np.ndarray:
        vecs = [self.vectors[i] for i in self.column(m)]
        return np.array([[a.vdot(b) for b in vecs] for a in vecs])

    def dense_matrix(self, m) -> np.ndarray:
        """Column-m states as columns of a dense (C(N, m), k) array."""
        return np.column_stack([self.vectors[i].to_dense() for i in self.column(m)])


def _raise_in(profile, ket, cols):
    if ket.sector.m + 1 not in cols:
        return None
    return collective_raise(profile, ket)


def _lower_in(profile, ket, cols):
    if ket.sector.m - 1 not in cols:
        return None
    return collective_lower(profile, ket)


def build_effective_basis(profile, model=ITC, max_col=None, max_row=2, *,
                          seed=None, min_col=None) -> EffectiveBasis:
    """Grow the collective chain from ``seed`` inside columns min_col..max_col.

    Parameters
    ----------
    profile : CouplingProfile
    model : {"itc", "central_spin"}
        Only recorded; the chain itself depends on the profile alone.
    max_col : int, optional
        Largest excitation column kept; defaults to ``seed col + 1``.
    max_row : int or None
        Row truncation.  ``None`` keeps growing (extra closure sweeps over
        every kept state) until the span is invariant under J+ and J-, which
        makes the effective dynamics exact.
    seed : SparseKet, optional
        Defaults to the ensemble ground state (column 0).
    min_col : int, optional
        Smallest column kept; defaults to ``max(seed col - 1, 0)``.
    """
    N = profile.n
    if N < 1:
        raise ValueError("empty profile")
    if seed is None:
        seed = SparseKet.basis_state(SectorBasis(N, 0), ())
    if seed.sector.N != N:
        raise ValueError("seed does not match the profile size")
    m0 = seed.sector.m
    if max_col is None:
        max_col = min(m0 + 1, N)
    if min_col is None:
        min_col = max(m0 - 1, 0)
    if max_col > N:
        raise ValueError(f"max_col={max_col} exceeds N={N}")
    if not min_col <= m0 <= max_col:
        raise ValueError("seed column lies outside the column window")
    if max_row is not None and max_row < 1:
        raise ValueError("max_row must be >= 1")
    snorm = seed.norm()
    if snorm == 0:
        raise ValueError("seed ket is zero")

    cols = range(min_col, max_col + 1)
    kept = {}                                   # ChainLabel -> SparseKet
    by_col = {m: [] for m in cols}              # m -> list of kets, row order
    order = []
    log = []

    def keep(label, ket):
        kept[label] = ket
        by_col[label.col].append(ket)
        order.append(label)

    def try_add(label, candidates, record=True):
        for why, cand in candidates:
            if cand is None:
                continue
            res = orthogonalize(cand, by_col[label.col])
            if res.dependent:
                if record:
                    log.append((label, res.residual_norm, why))
                continue
            keep(label, res.residual)
            return True
        return False

    # row 1: the ladder through the seed
    keep(ChainLabel(1, m0), seed.scale(1.0 / snorm))
    for m in range(m0 - 1, min_col - 1, -1):
        prev = kept.get(ChainLabel(1, m + 1))
        if prev is None:
            break
        if not try_add(ChainLabel(1, m), [("lower", collective_lower(profile, prev))]):
            break
    for m in range(m0 + 1, max_col + 1):
        prev = kept.get(ChainLabel(1, m - 1))
        if prev is None:
            break
        if not try_add(ChainLabel(1, m), [("raise", collective_raise(profile, prev))]):
            break

    # deeper rows
    r = 1
    while max_row is None or r < max_row:
        r += 1
        added = False
        for m in cols:
            cands = []
            left = kept.get(ChainLabel(r, m - 1))
            if left is not None:
                cands.append(("raise", _raise_in(profile, left, cols)))
            up_right = kept.get(ChainLabel(r - 1, m + 1))
            if up_right is not None:
                cands.append(("lower", _lower_in(profile, up_right, cols)))
            up_left = kept.get(ChainLabel(r - 1, m - 1))
            if up_left is not None:
                cands.append(("raise", _raise_in(profile, up_left, cols)))
            if cands and try_add(ChainLabel(r, m), cands):
                added = True
        if not added:
            break

    if max_row is None:
        _close(profile, kept, by_col, order, cols, keep)
    else:
        # record what the truncation throws away at the next row
        for m in cols:
            cands = []
            for lab, ket in kept.items():
                if lab.row != max_row:
                    continue
                if lab.col == m + 1:
                    cands.append(_lower_in(profile, ket, cols))
                if lab.col == m - 1:
                    cands.append(_raise_in(profile, ket, cols))
            for cand in cands:
                if cand is None:
                    continue
                res = orthogonalize(cand, by_col[m])
                if not res.dependent:
                    log.append((ChainLabel(max_row + 1, m), res.residual_norm, "truncated"))
                    break

    labels = order
    vectors = [kept[lab] for lab in labels]
    basis = EffectiveBasis(model=model, profile=profile, labels=labels, vectors=vectors,
                           couplings={}, residual_log=log, seed_label=ChainLabel(1, m0),
                           min_col=min_col, max_col=max_col)
    basis.couplings = _coupling_matrices(profile, basis)
    return basis


def _close(profile, kept, by_col, order, cols, keep):
    """Add every missing J+/J- image until the span is closed."""
    done = set()
    changed = True
    while changed:
        changed = False
        for lab in list(order):
            if lab in done:
                continue
            done.add(lab)
            ket = kept[lab]
            for cand in (_raise_in(profile, ket, cols), _lower_in(profile, ket, cols)):
                if cand is None:
                    continue
                m = cand.sector.m
                res = orthogonalize(cand, by_col[m])
                if res.dependent:
                    continue
                row = max(l.row for l in order if l.col == m) + 1 if by_col[m] else 1
                keep(ChainLabel(row, m), res.residual)
                changed = True


def _coupling_matrices(profile, basis):
    out = {}
    for m in basis.columns:
        if m + 1 not in basis.columns:
            continue
        lo = [basis.vectors[i] for i in basis.column(m)]
        hi = [basis.vectors[i] for i in basis.column(m + 1)]
        mat = np.zeros((len(hi), len(lo)), dtype=complex)
        for j, v in enumerate(lo):
            up = collective_raise(profile, v)
            for i, w in enumerate(hi):
                mat[i, j] = w.vdot(up)
        out[m] = mat
    return out


def assemble_effective_hamiltonian(basis, field_dim=None, excitations=None):
    """Dense Hamiltonian of the chain coupled to a boson mode or an electron spin.

    ITC: product states |n> (x) |chain state (r, m)> with n < field_dim and
    n + m <= field_dim - 1 (no populated block of a truncated field carries
    more excitations), with H = sum_i g_i (sigma_i^- a^dag + sigma_i^+ a).

    Central spin: states |e> (x) |chain state>, e in {up, down}, with
    H = (A_- S_+ + A_+ S_-)/2 + abar S_z m, where m is the number of flipped
    nuclei (J_z measured from the fully polarized state).  Only products whose
    conserved excitation [e = up] + m lies in ``excitations`` are kept; by
    default every combination is.

    Returns
    -------
    H : ndarray
    labels : list of (n or electron, ChainLabel)
    """
    if basis.model == ITC:
        if field_dim is None or int(field_dim) < 1:
            raise ValueError("ITC assembly needs field_dim >= 1")
        return _assemble_itc(basis, int(field_dim))
    if basis.model == CENTRAL_SPIN:
        return _assemble_spin(basis, excitations)
    raise ValueError(f"unknown model {basis.model!r}")


def _assemble_itc(basis, field_dim):
    nmax = field_dim - 1
    labels = [(n, lab) for n in range(field_dim) for lab in basis.labels
              if n + lab.col <= nmax]
    pos = {key: i for i, key in enumerate(labels)}
    H = np.zeros((len(labels), len(labels)), dtype=complex)
    for m, mat in basis.couplings.items():
        lo = [basis.labels[i] for i in basis.column(m)]
        hi = [basis.labels[i] for i in basis.column(m + 1)]
        for n in range(1, field_dim):
            # <n-1, w| a J+ |n, v> = sqrt(n) <w|J+|v>
            for b, vl in enumerate(lo):
                j = pos.get((n, vl))
                if j is None:
                    continue
                for a, wl in enumerate(hi):
                    i = pos.get((n - 1, wl))
                    if i is None:
                        continue
                    H[i, j] = np.sqrt(n) * mat[a, b]
                    H[j, i] = np.conj(H[i, j])
    return H, labels


def nominal_itc_dim(max_row, field_dim, max_col=None):
    """Size of the (row, col) truncation table of an ITC chain.

    Counts |n>|(r, m)> with n + m <= field_dim - 1, one state in column 0 and
    ``max_row`` states in every later column, as if the ensemble were large
    enough for every slot to be filled.  A small ensemble can leave slots
    empty (for N = 6 the single fully excited state cannot carry a second
    row), so the rank of the built basis may fall below this number.
    """
    nmax = field_dim - 1
    top = nmax if max_col is None else min(max_col, nmax)
    return (nmax + 1) + max_row * sum(nmax - m + 1 for m in range(1, top + 1))


def _assemble_spin(basis, excitations):
    abar = basis.profile.mean
    labels = []
    for e in (UP, DOWN):
        for lab in basis.labels:
            k = lab.col + (1 if e == UP else 0)
            if excitations is None or k in excitations:
                labels.append((e, lab))
    pos = {lab: i for i, lab in enumerate(labels)}
    H = np.zeros((len(labels), len(labels)), dtype=complex)
    for (e, lab), i in pos.items():
        H[i, i] = abar * (0.5 if e == UP else -0.5) * lab.col
    for m, mat in basis.couplings.items():
        lo = [basis.labels[i] for i in basis.column(m)]
        hi = [basis.labels[i] for i in basis.column(m + 1)]
        for a, wl in enumerate(hi):
            for b, vl in enumerate(lo):
                i, j = pos.get((DOWN, wl)), pos.get((UP, vl))
                if i is None or j is None:
                    continue
                # S_- A_+ / 2 takes |up, v> to |down, A_+ v>
                H[i, j] += 0.5 * mat[a, b]
                H[j, i] += 0.5 * np.conj(mat[a, b])
    return H, labels


def state_vectors(basis, coeffs, m):
    """Rebuild the column-m ket sum_k coeffs[k] v_k from chain coordinates."""
    pos = basis.column(m)
    kets = [basis.vectors[i] for i in pos]
    c = np.asarray(coeffs, dtype=complex)
    if not kets:
        return SparseKet.zero(SectorBasis(basis.profile.n, m))
    return SparseKet.zero(kets[0].sector).combine(c, kets)
