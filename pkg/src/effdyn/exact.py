"""Brute-force full Hilbert space engine, used as the oracle.

ITC states are indexed n * 2**N + bits (photon number n, bit i set when
atom i is excited).  Central-spin states are indexed e * 2**N + bits with
e = 1 for electron up.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import jv

from .hilbert import GuardError, SectorBasis, hermitian_eig

MAX_ITC_N = 16
MAX_QD_FULL_N = 12
MAX_QD_SECTOR_N = 20
DENSE_LIMIT = 2500


class NumericalAbort(RuntimeError):
    """Propagation lost unitarity beyond tolerance."""


def _popcount(x):
    x = np.asarray(x, dtype=np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x = x >> 1
    return c


# --------------------------------------------------------------------------- #
#                             Tavis-Cummings model                            #
# --------------------------------------------------------------------------- #

def itc_excitations(N, field_dim):
    """Conserved n + popcount(bits) of every full-basis state."""
    bits = np.arange(2 ** N)
    pc = _popcount(bits)
    return (np.arange(field_dim)[:, None] + pc[None, :]).ravel()


def assemble_itc_full(profile, field_dim):
    """Sparse H = sum_i g_i (sigma_i^- a^dag + sigma_i^+ a) on field (x) 2**N atoms."""
    N = profile.n
    if N > MAX_ITC_N:
        raise GuardError(f"exact ITC engine limited to N <= {MAX_ITC_N} (got {N})")
    if field_dim < 1:
        raise ValueError("field_dim must be >= 1")
    D = 2 ** N
    g = profile.values
    bits = np.arange(D)
    rows, cols, vals = [], [], []
    for n in range(1, field_dim):
        for i in range(N):
            free = bits[(bits >> i) & 1 == 0]
            # a sigma_i^+ |n, bits> = sqrt(n) |n-1, bits + i>
            rows.append((n - 1) * D + (free | (1 << i)))
            cols.append(n * D + free)
            vals.append(np.full(free.size, g[i] * np.sqrt(n)))
    dim = field_dim * D
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    upper = sp.coo_matrix((v, (r, c)), shape=(dim, dim))
    return (upper + upper.T).tocsr().astype(complex)


# --------------------------------------------------------------------------- #
#                              central spin model                             #
# --------------------------------------------------------------------------- #

def _zz_diagonal(profile, bits, include_zz):
    if include_zz:
        occ = (bits[:, None] >> np.arange(profile.n)) & 1
        return occ @ profile.values
    return profile.mean * _popcount(bits)


def assemble_qd_full(profile, include_zz=False):
    """H = (A_- S_+ + A_+ S_-)/2 + abar S_z (J_z - <J_z>_0) on 2**(N+1) states.

    With ``include_zz`` the detuning term becomes S_z (A_z - <A_z>_0), i.e. the
    full inhomogeneous zz coupling, for cross-checks.
    """
    N = profile.n
    if N > MAX_QD_FULL_N:
        raise GuardError(f"full-space dot engine limited to N <= {MAX_QD_FULL_N} (got {N})")
    D = 2 ** N
    a = profile.values
    bits = np.arange(D)
    rows, cols, vals = [], [], []
    for i in range(N):
        free = bits[(bits >> i) & 1 == 0]
        # S_- I_+^i |up, bits> -> |down, bits + i>
        rows.append(free | (1 << i))
        cols.append(D + free)
        vals.append(np.full(free.size, 0.5 * a[i]))
    r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    flip = sp.coo_matrix((v, (r, c)), shape=(2 * D, 2 * D))
    zz = _zz_diagonal(profile, bits, include_zz)
    diag = np.concatenate([-0.5 * zz, 0.5 * zz])
    H = flip + flip.T + sp.diags(diag)
    return H.tocsr().astype(complex)


def qd_excitations(N):
    """Conserved [e = up] + popcount(bits) of every full-basis dot state."""
    pc = _popcount(np.arange(2 ** N))
    return np.concatenate([pc, pc + 1])


def raise_matrix(profile, m):
    """J+ as a sparse C(N, m+1) x C(N, m) matrix between sector bases."""
    N = profile.n
    lo, hi = SectorBasis(N, m), SectorBasis(N, m + 1)
    g = profile.values
    subs = lo.unrank(np.arange(lo.dim))
    occ = np.zeros((lo.dim, N), dtype=bool)
    if m:
        occ[np.repeat(np.arange(lo.dim), m), subs.ravel()] = True
    src, site = np.nonzero(~occ)
    new = np.sort(np.concatenate([subs[src], site[:, None]], axis=1), axis=1)
    return sp.csr_matrix((g[site], (hi.rank(new), src)), shape=(hi.dim, lo.dim))


def assemble_qd_sector(profile, K, include_zz=False):
    """Dot Hamiltonian restricted to conserved excitation K.

    Basis: |up> (x) sector K-1 (colex order) followed by |down> (x) sector K.
    Returns (H, n_up) where n_up is the size of the electron-up block.
    """
    N = profile.n
    if N > MAX_QD_SECTOR_N:
        raise GuardError(f"sector dot engine limited to N <= {MAX_QD_SECTOR_N} (got {N})")
    if not 0 <= K <= N + 1:
        raise ValueError("excitation number out of range")
    n_up = SectorBasis(N, K - 1).dim if K >= 1 else 0
    n_dn = SectorBasis(N, K).dim if K <= N else 0

    def zz(m, count):
        if not count:
            return np.zeros(0)
        if not include_zz:
            return np.full(count, profile.mean * m)
        subs = SectorBasis(N, m).unrank(np.arange(count))
        return profile.values[subs].sum(axis=1) if m else np.zeros(count)

    diag = np.concatenate([0.5 * zz(K - 1, n_up), -0.5 * zz(K, n_dn)])
    H = sp.diags(diag).astype(complex)
    if n_up and n_dn:
        B = 0.5 * raise_matrix(profile, K - 1)
        H = H + sp.bmat([[None, B.T], [B, None]])
    return H.tocsr(), n_up


# --------------------------------------------------------------------------- #
#                                 propagation                                 #
# --------------------------------------------------------------------------- #

def _spectral_bound(H):
    if sp.issparse(H):
        return float(abs(H).sum(axis=1).max())
    return float(np.abs(H).sum(axis=1).max())


def chebyshev_step(H, psi, dt, bound=None, tol=1e-16):
    """exp(-i H dt) psi by a Chebyshev expansion with Bessel coefficients.

    ``bound`` must dominate the spectral radius of H.
    """
    if dt == 0:
        return psi.copy()
    R = _spectral_bound(H) if bound is None else bound
    if R == 0:
        return psi.copy()
    x = R * dt
    kmax = int(abs(x) + 30 + 10 * abs(x) ** (1 / 3))
    coef = jv(np.arange(kmax + 1), x)
    last = np.nonzero(np.abs(coef) > tol)[0]
    kmax = int(last[-1]) if last.size else 0
    Hs = H / R
    t_prev = psi
    t_cur = Hs @ psi
    out = coef[0] * t_prev + 2 * (-1j) * coef[1] * t_cur
    phase = -1j
    for k in range(2, kmax + 1):
        t_next = 2 * (Hs @ t_cur) - t_prev
        phase *= -1j
        out = out + 2 * phase * coef[k] * t_next
        t_prev, t_cur = t_cur, t_next
    return out


def propagate(H, psi0, times, *, blocks=None, drift_tol=1e-8, norm_tol=1e-12):
    """States exp(-i H t) psi0 for every t in ``times``.

    Dense matrices (and sparse ones up to a few thousand states) go through
    an eigen-decomposition; larger sparse matrices are stepped from one time
    to the next with a Chebyshev expansion.  ``blocks`` (list of index
    arrays of invariant subspaces) lets each conserved block be handled on
    its own.

    Returns an array of shape (len(times), dim).
    """
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if abs(np.linalg.norm(psi0) - 1) > norm_tol:
        raise ValueError("initial state must be normalized")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    dim = psi0.size
    if H.shape != (dim, dim):
        raise ValueError("Hamiltonian and state dimensions differ")
    if blocks is None:
        blocks = [np.arange(dim)]
    out = np.zeros((times.size, dim), dtype=complex)
    for idx in blocks:
        idx = np.asarray(idx)
        sub = psi0[idx]
        if not np.any(sub):
            continue
        Hb = H[np.ix_(idx, idx)] if not sp.issparse(H) else H[idx][:, idx]
        out[:, idx] = _propagate_block(Hb, sub, times)
    drift = np.abs(np.linalg.norm(out, axis=1) - 1).max()
    if drift > drift_tol:
        raise NumericalAbort(f"norm drift {drift:.3g} exceeds {drift_tol:g}")
    return out


def _propagate_block(H, psi, times):
    n = psi.size
    if not sp.issparse(H) or n <= DENSE_LIMIT:
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, V = hermitian_eig(Hd)
        c = V.conj().T @ psi
        return (np.exp(-1j * np.outer(times, w)) * c) @ V.T
    H = H.tocsr()
    bound = _spectral_bound(H)
    out = np.empty((times.size, n), dtype=complex)
    cur, t_cur = psi, 0.0
    for k, t in enumerate(times):
        cur = chebyshev_step(H, cur, t - t_cur, bound)
        t_cur = t
        out[k] = cur
    return out


def conserved_blocks(labels):
    """Group state indices by a conserved label array."""
    labels = np.asarray(labels)
    return [np.flatnonzero(labels == k) for k in np.unique(labels)]
