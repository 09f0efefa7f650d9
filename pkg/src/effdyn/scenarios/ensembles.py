"""Incoherent nuclear states: single-excitation mixtures and thermal spins.

Both initial nuclear density matrices are diagonal in the computational
basis, so the evolution splits into pure branches that are propagated
independently and summed with their weights.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..chain import CENTRAL_SPIN
from ..exact import MAX_QD_FULL_N, assemble_qd_sector
from ..hilbert import GuardError, SectorBasis, hermitian_eig
from .config import RunResult, TimeSeries, electron_state
from .defects import UNIFORM, defect_from_spec
from .dot import transfer_time


def thread_count():
    """Worker cap from EFFDYN_THREADS, defaulting to the CPU count."""
    env = os.environ.get("EFFDYN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def check_weights(weights, N):
    w = np.asarray(weights, dtype=float)
    if w.shape != (N,):
        raise ValueError(f"need {N} mixture weights, got {w.size}")
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
        raise ValueError("mixture weights must be non-negative and sum to 1")
    return w


class SingleExcitationBranches:
    """P_up(t) of |e> (x) |1_j> for every site j, exactly.

    Down branches stay in the three-state closure and give
    P_up = (alpha_j / delta)^2 sin^2(delta t / 2).  Up branches live in the
    two-excitation sector; there the flip-flop pairs each normal mode k of
    J- J+ restricted to one excitation (eigenvalue s_k^2, eigenvector V[:, k])
    with a single two-excitation partner detuned by 3 abar / 2, so
    P_up = sum_k |V_jk|^2 p_k(t) with the two-level return probability p_k.
    """

    def __init__(self, profile, times):
        self.profile = profile
        self.times = np.asarray(times, dtype=float)
        alpha = profile.values
        abar = profile.mean
        omega2 = profile.norm ** 2
        self.delta = np.sqrt((abar / 2) ** 2 + omega2)
        M = omega2 * np.eye(alpha.size) + np.outer(alpha, alpha) - 2 * np.diag(alpha ** 2)
        s2, self.V = np.linalg.eigh(M)
        gap = 1.5 * abar
        w = np.sqrt(gap ** 2 + np.clip(s2, 0, None))
        with np.errstate(invalid="ignore", divide="ignore"):
            r2 = np.where(w > 0, (gap / w) ** 2, 1.0)
        # cos^2(x/2) + r^2 sin^2(x/2) = (1 + r^2)/2 + (1 - r^2)/2 cos(x)
        self.p_modes = 0.5 * (1 + r2)[:, None] + (0.5 * (1 - r2))[:, None] * np.cos(
            np.outer(w, self.times))
        self.sin2 = 0.5 * (1 - np.cos(self.delta * self.times))

    def down(self, j):
        return (self.profile.values[j] / self.delta) ** 2 * self.sin2

    def up(self, j):
        return (self.V[j] ** 2) @ self.p_modes

    def branch(self, j, u, v):
        """P_up of (u |up> + v |down>) (x) |1_j>."""
        return abs(u) ** 2 * self.up(j) + abs(v) ** 2 * self.down(j)


def mixed_p_up(profile, weights, u, v, times, branches=None):
    """Weighted sum over sites of the single-branch P_up series."""
    w = check_weights(weights, profile.n)
    br = SingleExcitationBranches(profile, times) if branches is None else branches
    pu, pv = abs(u) ** 2, abs(v) ** 2
    down_scale = (profile.values / br.delta) ** 2
    total = np.zeros(br.times.size)
    for j in np.flatnonzero(w):
        # same as w_j * br.branch(j, u, v), without the temporaries
        total += (w[j] * pu * br.V[j] ** 2) @ br.p_modes
        total += (w[j] * pv * down_scale[j]) * br.sin2
    return total


def mixture_weights(spec, N):
    """Weights from ``initial.mixture``: a defect spec whose squared amplitudes are used."""
    if "weights" in spec:
        return check_weights(spec["weights"], N)
    d = defect_from_spec(dict(spec, kind=spec.get("kind", UNIFORM)), N)
    return d.mixture_weights()


def run_mixed(config, times=None) -> RunResult:
    profile = config.build_profile()
    t = config.time_grid(transfer_time(profile)) if times is None else np.asarray(times, float)
    u, v = electron_state(config.initial.get("electron", [1, 1]))
    w = mixture_weights(config.initial["mixture"], config.N)
    p_up = mixed_p_up(profile, w, u, v, t)
    info = {"model": CENTRAL_SPIN, "N": profile.n, "engine": "branches",
            "branches": int(np.count_nonzero(w)), "tau": transfer_time(profile)}
    return RunResult(TimeSeries(t, {"P_up": p_up}), info)


# --------------------------------------------------------------------------- #
#                                   thermal                                   #
# --------------------------------------------------------------------------- #

def _sector_p_up(profile, K, q_up, q_down, times):
    """P_up(t) in sector K from a diagonal initial density matrix.

    q_up weights the up (x) (K-1 excitations) states, q_down the
    down (x) (K excitations) states, both in colex order.
    """
    H, n_up = assemble_qd_sector(profile, K)
    q = np.concatenate([q_up, q_down])
    if not np.any(q):
        return np.zeros(times.size)
    lam, V = hermitian_eig(H.toarray())
    A = (V.conj().T * q) @ V                         # V^dag Q V
    B = V[:n_up].conj().T @ V[:n_up]                 # V^dag P_up V
    C = A * B.T                                      # C_kl = A_kl B_lk
    out = np.empty(times.size)
    for start in range(0, times.size, 64):
        ph = np.exp(-1j * np.outer(times[start:start + 64], lam))
        out[start:start + 64] = np.einsum("tk,kl,tl->t", ph, C, ph.conj()).real
    return out


def thermal_p_up(profile, k_mean, u, v, times, workers=None):
    """P_up(t) for (u, v) (x) product of single-spin thermal states."""
    N = profile.n
    if N > MAX_QD_FULL_N:
        raise GuardError(f"thermal runs need the full space, limited to N <= {MAX_QD_FULL_N}")
    if not 0 <= k_mean < 0.5:
        raise ValueError("k_mean must lie in [0, 0.5)")
    times = np.asarray(times, dtype=float)

    def weight(m):
        return k_mean ** m * (1 - k_mean) ** (N - m)

    jobs = []
    for K in range(N + 2):
        n_up = SectorBasis(N, K - 1).dim if K >= 1 else 0
        n_dn = SectorBasis(N, K).dim if K <= N else 0
        q_up = np.full(n_up, abs(u) ** 2 * weight(K - 1)) if n_up else np.zeros(0)
        q_dn = np.full(n_dn, abs(v) ** 2 * weight(K)) if n_dn else np.zeros(0)
        if np.any(q_up) or np.any(q_dn):
            jobs.append((K, q_up, q_dn))
    workers = thread_count() if workers is None else workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda j: _sector_p_up(profile, j[0], j[1], j[2], times), jobs))
    return np.sum(parts, axis=0)


def run_thermal(config, times=None) -> RunResult:
    profile = config.build_profile()
    t = config.time_grid(transfer_time(profile)) if times is None else np.asarray(times, float)
    u, v = electron_state(config.initial.get("electron", [1, 1]))
    k = float(config.initial["k_mean"])
    p_up = thermal_p_up(profile, k, u, v, t)
    info = {"model": CENTRAL_SPIN, "N": profile.n, "engine": "exact",
            "dim": 2 ** (profile.n + 1), "k_mean": k, "tau": transfer_time(profile)}
    return RunResult(TimeSeries(t, {"P_up": p_up}), info)
