"""Electron spin in a quantum dot coupled to polarized nuclei.

Joint states are kept as lists of :class:`Piece` objects: an electron
orientation, an excitation column and a set of orthonormal nuclear kets
with time-dependent coefficients.  Evolutions of different initial
components are computed separately and combined by linearity, which keeps
every chain small even for a thousand nuclei.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chain import (CENTRAL_SPIN, DOWN, UP, ChainLabel,
                     assemble_effective_hamiltonian, build_effective_basis)
from ..exact import (assemble_qd_full, assemble_qd_sector, conserved_blocks,
                     propagate, qd_excitations)
from ..hilbert import DensityMatrixSmall, SectorBasis, SparseKet
from ..observables import bloch_average, fidelity, tangle_from_reduced
from .config import RunResult, TimeSeries, electron_state
from .defects import DefectDistribution, defect_from_spec, eval_in_N

E_INDEX = {UP: 0, DOWN: 1}
DEFAULT_MAX_ROW = 6           # the 12-state truncation of the up branch
COHERENCE_FLOOR = 1e-12


def transfer_time(profile) -> float:
    """pi / N0 with N0 = sqrt(sum alpha_i^2)."""
    if profile.n < 1:
        raise ValueError("empty profile")
    return float(np.pi / profile.norm)


# --------------------------------------------------------------------------- #
#                          closed three-state solution                        #
# --------------------------------------------------------------------------- #

def three_state_amplitudes(profile, defect, times, detuning=None):
    """Amplitudes (a1, b1, c1) of |down, d>, |up, 0> and |down, d_perp>.

    The initial state is |down> (x) |d> with |d> = sum_j a_j |1_j>.  The
    flip-flop couples |up, 0> to the bright combination of |d> and its
    orthogonal partner |d_perp>; the dark combination only picks up the
    detuning phase exp(i abar t / 2).

    Parameters
    ----------
    profile : CouplingProfile
    defect : DefectDistribution or array_like
        Real defect amplitudes.
    times : array_like
    detuning : float, optional
        Replaces abar = mean(alpha).  ``detuning=0`` gives the resonant
        two-level limit.

    Returns
    -------
    a1, b1, c1 : ndarray of complex
    """
    a = defect.amplitudes if isinstance(defect, DefectDistribution) else np.asarray(defect, float)
    alpha = profile.values
    if a.shape != alpha.shape:
        raise ValueError("defect and profile sizes differ")
    t = np.asarray(times, dtype=float)
    abar = profile.mean if detuning is None else float(detuning)
    gamma = float(a @ alpha)
    omega2 = profile.norm ** 2
    beta2 = max(omega2 - gamma ** 2, 0.0)
    beta = np.sqrt(beta2)
    delta = np.sqrt((abar / 2) ** 2 + omega2)
    s, c = np.sin(delta * t / 2), np.cos(delta * t / 2)
    bright = np.exp(1j * abar * t / 4) * (c + 1j * (abar / (2 * delta)) * s)
    dark = np.exp(1j * abar * t / 2)
    a1 = (beta2 / omega2) * dark + (gamma ** 2 / omega2) * bright
    b1 = -1j * (gamma / delta) * np.exp(1j * abar * t / 4) * s
    c1 = (gamma * beta / omega2) * (bright - dark)
    return a1, b1, c1


def analytic_three_state(profile, defect, times, detuning=None) -> TimeSeries:
    """Closed-form evolution from |down> (x) |defect> as a TimeSeries."""
    a1, b1, c1 = three_state_amplitudes(profile, defect, times, detuning)
    p_up = np.abs(b1) ** 2
    p_down = np.abs(a1) ** 2 + np.abs(c1) ** 2
    # the up and down parts sit in different excitation columns, so the
    # electron reduced state is diagonal
    tau = 2 * (1 - p_up ** 2 - p_down ** 2)
    return TimeSeries(times, {"abs_a1": np.abs(a1), "abs_b1": np.abs(b1),
                              "abs_c1": np.abs(c1), "P_down": p_down,
                              "tangle": np.clip(tau, 0, 1)})


# --------------------------------------------------------------------------- #
#                          column-resolved joint states                       #
# --------------------------------------------------------------------------- #

@dataclass
class Piece:
    """sum_k coeffs[:, k] |electron> (x) vectors[k], all kets in one column."""
    electron: str
    col: int
    vectors: list
    coeffs: np.ndarray

    def scaled(self, c):
        return Piece(self.electron, self.col, self.vectors, self.coeffs * c)

    def ket(self, k=0) -> SparseKet:
        zero = SparseKet.zero(self.vectors[0].sector)
        return zero.combine(self.coeffs[k], self.vectors)


def evolve_branch(profile, electron, seed, times, max_row=DEFAULT_MAX_ROW):
    """Evolve |electron> (x) |seed> under the dot Hamiltonian.

    The seed may be unnormalized; its norm is carried into the coefficients.
    An up electron with seed in column m mixes with down in column m + 1 and
    a down electron with up in column m - 1.  The chain built from the seed
    spans the two columns and is truncated at ``max_row`` rows (for a
    single-excitation down seed three states already close exactly).

    Returns a list of Piece.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    norm = seed.norm()
    if norm == 0:
        return []
    N = profile.n
    m0 = seed.sector.m
    if electron == UP:
        lo, hi, K = m0, min(m0 + 1, N), m0 + 1
    elif electron == DOWN:
        lo, hi, K = max(m0 - 1, 0), m0, m0
    else:
        raise ValueError(f"electron must be {UP!r} or {DOWN!r}")
    basis = build_effective_basis(profile, CENTRAL_SPIN, max_col=hi, max_row=max_row,
                                  seed=seed, min_col=lo)
    H, labels = assemble_effective_hamiltonian(basis, excitations={K})
    psi0 = np.zeros(len(labels), dtype=complex)
    psi0[labels.index((electron, ChainLabel(1, m0)))] = 1.0
    amps = propagate(H, psi0, times) * norm
    pieces = []
    for e in (UP, DOWN):
        for m in basis.columns:
            idx = [i for i, (ee, lab) in enumerate(labels) if ee == e and lab.col == m]
            if not idx:
                continue
            vecs = [basis.vectors[basis.index(labels[i][1])] for i in idx]
            pieces.append(Piece(e, m, vecs, amps[:, idx]))
    return pieces


class _GramCache:
    def __init__(self):
        self._store = {}

    def __call__(self, left, right):
        """Matrix <left_i | right_j>."""
        if left is right:
            return np.eye(len(left))
        key = (id(left), id(right))
        if key not in self._store:
            self._store[key] = (left, right, np.array([[u.vdot(v) for v in right] for u in left]))
        return self._store[key][2]


def cross_rdm(first, second, gram=None, T=None):
    """Electron matrix Tr_n |first><second| for two piece lists, shape (T, 2, 2).

    ``T`` is only needed when both lists may be empty.
    """
    gram = gram or _GramCache()
    for p in list(first) + list(second):
        T = p.coeffs.shape[0]
        break
    if T is None:
        raise ValueError("cannot infer the number of times from empty piece lists")
    out = np.zeros((T, 2, 2), dtype=complex)
    for p in first:
        for q in second:
            if p.col != q.col:
                continue
            G = gram(q.vectors, p.vectors)          # <q_l | p_k>
            val = np.einsum("tk,lk,tl->t", p.coeffs, G, q.coeffs.conj())
            out[:, E_INDEX[p.electron], E_INDEX[q.electron]] += val
    return out


def electron_rdm(pieces, gram=None):
    return cross_rdm(pieces, pieces, gram)


def nuclear_parts(pieces, electron, k=0):
    """Column-resolved nuclear kets of the ``electron`` component at time index k."""
    out = {}
    for p in pieces:
        if p.electron != electron:
            continue
        ket = p.ket(k)
        out[p.col] = out[p.col] + ket if p.col in out else ket
    return out


# --------------------------------------------------------------------------- #
#                              time-series runners                            #
# --------------------------------------------------------------------------- #

def _defect(config):
    return defect_from_spec(config.initial.get("defect", {"kind": "uniform"}), config.N)


def _times(config, profile, times):
    if times is not None:
        return np.asarray(times, dtype=float)
    return config.time_grid(transfer_time(profile))


def run_three_state(config, times=None) -> RunResult:
    profile = config.build_profile()
    t = _times(config, profile, times)
    series = analytic_three_state(profile, _defect(config), t,
                                  config.initial.get("detuning"))
    cols = {k: series[k] for k in config.observables}
    return RunResult(TimeSeries(t, cols), {"model": CENTRAL_SPIN, "N": profile.n,
                                           "engine": "closed_form", "dim": 3,
                                           "tau": transfer_time(profile)})


FIRST_FOUR = [(UP, ChainLabel(1, 1)), (DOWN, ChainLabel(1, 2)),
              (UP, ChainLabel(2, 1)), (DOWN, ChainLabel(2, 2))]


def up_defect_states(profile, defect, times, max_row=DEFAULT_MAX_ROW):
    """Chain evolution of |up> (x) |defect>; returns (states, labels, basis)."""
    seed = defect.ket()
    N = profile.n
    basis = build_effective_basis(profile, CENTRAL_SPIN, max_col=min(2, N), max_row=max_row,
                                  seed=seed, min_col=1)
    H, labels = assemble_effective_hamiltonian(basis, excitations={2})
    psi0 = np.zeros(len(labels), dtype=complex)
    psi0[labels.index((UP, ChainLabel(1, 1)))] = 1.0
    return propagate(H, psi0, times), labels, basis


def run_up_defect(config, times=None) -> RunResult:
    """|up> (x) |defect>, reporting the population P_T of the first four chain states."""
    profile = config.build_profile()
    t = _times(config, profile, times)
    defect = _defect(config)
    if config.engine_kind == "exact":
        return _run_up_defect_exact(config, profile, defect, t)
    max_row = config.max_row or DEFAULT_MAX_ROW
    states, labels, basis = up_defect_states(profile, defect, t, max_row)
    pops = np.abs(states) ** 2
    first = [labels.index(x) for x in FIRST_FOUR if x in labels]
    up = [i for i, (e, _) in enumerate(labels) if e == UP]
    cols = {"P_T": pops[:, first].sum(1), "P_up": pops[:, up].sum(1)}
    cols["P_down"] = 1 - cols["P_up"]
    info = {"model": CENTRAL_SPIN, "N": profile.n, "engine": "effective",
            "max_row": max_row, "effective_dim": len(labels),
            "tau": transfer_time(profile)}
    return RunResult(TimeSeries(t, {k: cols[k] for k in config.observables}), info)


def _run_up_defect_exact(config, profile, defect, t):
    H, n_up = assemble_qd_sector(profile, 2)
    psi0 = np.zeros(H.shape[0], dtype=complex)
    psi0[:n_up] = defect.amplitudes
    states = propagate(H, psi0, t)
    # project on the first four chain states
    basis = build_effective_basis(profile, CENTRAL_SPIN, max_col=2, max_row=2,
                                  seed=defect.ket(), min_col=1)
    proj = np.zeros_like(states[:, 0], dtype=float)
    for e, lab in FIRST_FOUR:
        if lab not in basis.labels:
            continue
        v = basis.vectors[basis.index(lab)].to_dense()
        part = states[:, :n_up] if e == UP else states[:, n_up:]
        proj += np.abs(part @ v.conj()) ** 2
    p_up = np.sum(np.abs(states[:, :n_up]) ** 2, axis=1)
    cols = {"P_T": proj, "P_up": p_up, "P_down": 1 - p_up}
    info = {"model": CENTRAL_SPIN, "N": profile.n, "engine": "exact", "dim": H.shape[0],
            "tau": transfer_time(profile)}
    return RunResult(TimeSeries(t, {k: cols[k] for k in config.observables}), info)


def superposition_pieces(profile, u, v, nuclear, times, max_row=DEFAULT_MAX_ROW):
    """(u |up> + v |down>) (x) |nuclear> evolved, as a piece list."""
    pieces = []
    if u != 0:
        pieces += [p.scaled(u) for p in evolve_branch(profile, UP, nuclear, times, max_row)]
    if v != 0:
        pieces += [p.scaled(v) for p in evolve_branch(profile, DOWN, nuclear, times, max_row)]
    return pieces


def run_tangle(config, times=None) -> RunResult:
    """Electron/nuclei tangle and electron populations from (u, v) (x) |defect>."""
    profile = config.build_profile()
    t = _times(config, profile, times)
    u, v = electron_state(config.initial.get("electron", [1, 1]))
    defect = _defect(config)
    if config.engine_kind == "exact":
        rho = _exact_dot_rdm(profile, u, v, defect.amplitudes, t)
        info = {"engine": "exact", "dim": 2 ** (profile.n + 1)}
    else:
        max_row = config.max_row or DEFAULT_MAX_ROW
        pieces = superposition_pieces(profile, u, v, defect.ket(), t, max_row)
        rho = electron_rdm(pieces)
        info = {"engine": "effective", "max_row": max_row,
                "effective_dim": sum(len(p.vectors) for p in pieces)}
    cols = {"tangle": tangle_from_reduced(rho), "P_down": rho[:, 1, 1].real,
            "P_up": rho[:, 0, 0].real}
    info.update(model=CENTRAL_SPIN, N=profile.n, tau=transfer_time(profile))
    return RunResult(TimeSeries(t, {k: cols[k] for k in config.observables}), info)


def _exact_dot_rdm(profile, u, v, amplitudes, times):
    """Full-space electron reduced state from (u, v) (x) sum_j a_j |1_j>."""
    N = profile.n
    D = 2 ** N
    H = assemble_qd_full(profile)
    psi0 = np.zeros(2 * D, dtype=complex)
    ones = 1 << np.arange(N)
    psi0[D + ones] = u * amplitudes
    psi0[ones] += v * amplitudes
    states = propagate(H, psi0, times, blocks=conserved_blocks(qd_excitations(N)))
    amp = np.stack([states[:, D:], states[:, :D]], axis=1)   # (T, up/down, bits)
    return np.einsum("tak,tbk->tab", amp, amp.conj())


# --------------------------------------------------------------------------- #
#                                memory cycle                                 #
# --------------------------------------------------------------------------- #

class MemoryChannel:
    """Write-in, storage and retrieval as a quadratic map (u, v) -> rho_f.

    Built once per defect: the first stage evolves |up> (x) |nuc> and
    |down> (x) |nuc> separately; tracing out the electron leaves the nuclei
    in a mixture of the electron-resolved parts, each of which is split by
    column and evolved again with a fresh down electron.  The final state
    for any input is then a bilinear combination of precomputed 2x2 blocks.

    Parameters
    ----------
    profile : CouplingProfile
    defect : DefectDistribution or None
        None stores into the fully polarized ensemble.
    tau : float
        Duration of each of the two interaction stages.
    max_row : int
        Chain truncation used for the two-excitation columns.
    """

    def __init__(self, profile, defect, tau, max_row=DEFAULT_MAX_ROW):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.profile = profile
        self.tau = float(tau)
        N = profile.n
        if defect is None:
            nuc = SparseKet.basis_state(SectorBasis(N, 0), ())
        else:
            nuc = defect.ket()
        t = [self.tau]
        stage1 = {x: evolve_branch(profile, x, nuc, t, max_row) for x in (UP, DOWN)}
        gram = _GramCache()
        # final[e][x]: retrieval pieces from the part of input x left with electron e
        final = {}
        for e in (UP, DOWN):
            final[e] = {}
            for x in (UP, DOWN):
                out = []
                for ket in nuclear_parts(stage1[x], e).values():
                    out += evolve_branch(profile, DOWN, ket, t, max_row)
                final[e][x] = out
        self.blocks = {(e, x, y): cross_rdm(final[e][x], final[e][y], gram, T=1)[0]
                       for e in (UP, DOWN) for x in (UP, DOWN) for y in (UP, DOWN)}
        self.phase = 0.0

    def raw(self, u, v):
        """Final electron matrix before any phase correction."""
        c = {UP: u, DOWN: v}
        rho = np.zeros((2, 2), dtype=complex)
        for (e, x, y), blk in self.blocks.items():
            rho += c[x] * np.conj(c[y]) * blk
        return 0.5 * (rho + rho.conj().T)

    def __call__(self, u, v):
        rho = self.raw(u, v)
        R = np.diag([np.exp(-1j * self.phase), 1.0])
        return DensityMatrixSmall(R @ rho @ R.conj().T)


def calibration_phase(profile, tau, max_row=DEFAULT_MAX_ROW):
    """Phase of the up/down coherence after a defect-free cycle on |+>.

    Removing it maps the ideal cycle onto the identity; it does not depend
    on the stored state.
    """
    chan = MemoryChannel(profile, None, tau, max_row)
    rho = chan.raw(1 / np.sqrt(2), 1 / np.sqrt(2))
    coh = rho[0, 1]
    return float(np.angle(coh)) if abs(coh) > COHERENCE_FLOOR else 0.0


def memory_cycle(profile, defect, psi_e, tau, max_row=DEFAULT_MAX_ROW,
                 phase=None) -> DensityMatrixSmall:
    """Final electron state of one storage cycle for input (u, v) = psi_e.

    ``phase`` defaults to the defect-free calibration phase.
    """
    u, v = (complex(x) for x in psi_e)
    chan = MemoryChannel(profile, defect, tau, max_row)
    chan.phase = calibration_phase(profile, tau, max_row) if phase is None else phase
    return chan(u, v)


def memory_fidelity(profile, defect, tau=None, max_row=DEFAULT_MAX_ROW, M=200,
                    phase=None):
    """Bloch-sphere average of <psi|rho_f|psi> over M lattice states."""
    tau = transfer_time(profile) if tau is None else tau
    chan = MemoryChannel(profile, defect, tau, max_row)
    chan.phase = calibration_phase(profile, tau, max_row) if phase is None else phase
    return bloch_average(lambda u, v: fidelity(chan(u, v), [u, v]), M)


def run_memory(config, times=None) -> RunResult:
    """Fidelity for every defect position listed under ``initial.j0_values``.

    The output is keyed by j0 rather than time; a config without
    ``j0_values`` evaluates its single defect (or the defect-free cycle).
    """
    profile = config.build_profile()
    tau = transfer_time(profile) * float(config.initial.get("tau_scale", 1.0))
    max_row = config.max_row or DEFAULT_MAX_ROW
    M = int(config.initial.get("bloch_points", 200))
    phase = calibration_phase(profile, tau, max_row)
    spec = config.initial.get("defect")
    values = config.initial.get("j0_values")
    if values is None:
        defect = defect_from_spec(spec, config.N) if spec else None
        keys = [float(defect.j0) if defect is not None and defect.j0 else 0.0]
        fids = [memory_fidelity(profile, defect, tau, max_row, M, phase)]
    else:
        keys, fids = [], []
        for val in values:
            j0 = int(round(eval_in_N(val, config.N)))
            d = defect_from_spec(dict(spec or {"kind": "lorentzian"}, j0=j0), config.N)
            keys.append(float(j0))
            fids.append(memory_fidelity(profile, d, tau, max_row, M, phase))
    series = TimeSeries(np.array(keys), {"fidelity": np.array(fids)}, key="j0")
    info = {"model": CENTRAL_SPIN, "N": profile.n, "engine": "effective", "max_row": max_row,
            "tau": tau, "phase": phase, "bloch_points": M}
    return RunResult(series, info)
