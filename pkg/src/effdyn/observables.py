"""Observables evaluated on propagated states.

State arrays are either a single ket of shape (dim,) or a stack of kets of
shape (T, dim); every function accepting ``psi`` returns a scalar or a
length-T array accordingly.  ``labels`` is the list of basis labels the
state is expressed in, each a pair (field or electron part, ensemble part).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .hilbert import DensityMatrixSmall

STATE_POPULATION = "state_population"
ROW_POPULATION = "row_population"
QUADRATURE_VARIANCE = "quadrature_variance"
TANGLE = "tangle"
ELECTRON_POPULATION = "electron_population"
FIDELITY = "fidelity"
CONTRAST = "contrast"

KINDS = (STATE_POPULATION, ROW_POPULATION, QUADRATURE_VARIANCE, TANGLE,
         ELECTRON_POPULATION, FIDELITY, CONTRAST)


@dataclass(frozen=True)
class ObservableSpec:
    """What to measure.

    ``target`` depends on ``kind``: an ensemble label for state_population,
    a tuple of rows for row_population, ``"up"``/``"down"`` for
    electron_population and None otherwise.  ``name`` is the output column.
    """
    kind: str
    target: object = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == ROW_POPULATION:
            rows = self.target
            if not rows or any(int(r) < 1 for r in rows):
                raise ValueError("row_population needs a non-empty set of rows >= 1")
        if self.kind == ELECTRON_POPULATION and self.target not in ("up", "down"):
            raise ValueError("electron_population target must be 'up' or 'down'")
        if self.kind == STATE_POPULATION and self.target is None:
            raise ValueError("state_population needs a target label")
        if not self.name:
            object.__setattr__(self, "name", self.kind)


def _stack(psi):
    psi = np.asarray(psi, dtype=complex)
    return psi[None, :] if psi.ndim == 1 else psi, psi.ndim == 1


def _unstack(values, single):
    return float(values[0]) if single else values


def _masked_population(psi, mask):
    P, single = _stack(psi)
    if P.shape[1] != mask.size:
        raise ValueError("state and label list have different lengths")
    return _unstack(np.sum(np.abs(P[:, mask]) ** 2, axis=1), single)


def state_population(psi, labels, target):
    """Population of ensemble state ``target``, summed over the other factor."""
    mask = np.array([lab[1] == target for lab in labels], dtype=bool)
    if not mask.any():
        raise KeyError(f"label {target!r} not present in the basis")
    return _masked_population(psi, mask)


def row_population(psi, labels, rows, built=None):
    """Total population of chain states whose row is in ``rows``.

    ``built`` lists the rows the construction was allowed to reach; a row in
    it that holds no states (the chain closed early) contributes zero.  By
    default only rows present in ``labels`` count as built.
    """
    rows = set(int(r) for r in rows)
    built = {lab[1].row for lab in labels} if built is None else set(built)
    missing = rows - built
    if missing:
        raise KeyError(f"rows {sorted(missing)} were not built")
    mask = np.array([lab[1].row in rows for lab in labels], dtype=bool)
    return _masked_population(psi, mask)


def electron_population(psi, labels, which="up"):
    mask = np.array([lab[0] == which for lab in labels], dtype=bool)
    return _masked_population(psi, mask)


def field_density_matrix(psi, labels, field_dim):
    """Reduced density matrix of the boson mode, shape (T, field_dim, field_dim)."""
    P, single = _stack(psi)
    parts = {}
    for lab in labels:
        parts.setdefault(lab[1], len(parts))
    amp = np.zeros((P.shape[0], field_dim, len(parts)), dtype=complex)
    n = np.array([lab[0] for lab in labels])
    k = np.array([parts[lab[1]] for lab in labels])
    amp[:, n, k] = P
    rho = np.einsum("tnk,tmk->tnm", amp, amp.conj())
    return rho[0] if single else rho


def quadrature_variance(psi, labels, field_dim):
    """(Delta X1)^2 with X1 = (a + a^dag)/2, so the vacuum gives 1/4."""
    P, single = _stack(psi)
    rho = field_density_matrix(P, labels, field_dim)
    a = np.diag(np.sqrt(np.arange(1, field_dim)), 1)
    X = 0.5 * (a + a.T)
    ex = np.einsum("tnm,mn->t", rho, X).real
    ex2 = np.einsum("tnm,mn->t", rho, X @ X).real
    return _unstack(ex2 - ex ** 2, single)


def electron_rdm(psi, labels):
    """2x2 electron density matrices (basis order up, down) from joint kets."""
    P, single = _stack(psi)
    rest = {}
    for lab in labels:
        rest.setdefault(lab[1], len(rest))
    amp = np.zeros((P.shape[0], 2, len(rest)), dtype=complex)
    e = np.array([0 if lab[0] == "up" else 1 for lab in labels])
    k = np.array([rest[lab[1]] for lab in labels])
    amp[:, e, k] = P
    rho = np.einsum("tak,tbk->tab", amp, amp.conj())
    return rho[0] if single else rho


def tangle_from_reduced(rho_e):
    """2 (1 - tr rho_e^2) for one or a stack of reduced density matrices.

    Meaningful only when the joint state the reduction came from is pure.
    """
    rho = np.asarray(rho_e, dtype=complex)
    single = rho.ndim == 2
    if single:
        rho = rho[None]
    pur = np.einsum("tab,tba->t", rho, rho).real
    out = np.clip(2.0 * (1.0 - pur), 0.0, 1.0)
    return float(out[0]) if single else out


def tangle(state, dims=(2, None)):
    """Electron/ensemble tangle of a pure joint state.

    ``state`` is a ket whose index runs electron-major (a vector of length
    dims[0] * dims[1]) or a joint density matrix, which must be pure.
    """
    state = np.asarray(state, dtype=complex)
    d_a = dims[0]
    if state.ndim == 2:
        purity = np.trace(state @ state).real
        if abs(purity - 1) > 1e-10:
            raise ValueError("tangle is defined here for pure joint states only")
        w, V = np.linalg.eigh(state)
        state = V[:, -1] * np.sqrt(w[-1])
    if state.size % d_a:
        raise ValueError("state size is not a multiple of the electron dimension")
    m = state.reshape(d_a, -1)
    return tangle_from_reduced(m @ m.conj().T)


def fidelity(rho_f, psi_i):
    """<psi_i| rho_f |psi_i>, clipped to [0, 1] against round-off."""
    rho = rho_f.entries if isinstance(rho_f, DensityMatrixSmall) else np.asarray(rho_f)
    psi = np.asarray(psi_i, dtype=complex).ravel()
    if rho.shape != (psi.size, psi.size):
        raise ValueError("density matrix and state dimensions differ")
    f = float(np.vdot(psi, rho @ psi).real)
    if f < -1e-10 or f > 1 + 1e-10:
        raise ValueError(f"fidelity {f} outside [0, 1]; rho_f is not a state")
    return min(max(f, 0.0), 1.0)


def fibonacci_sphere(M=200):
    """Polar and azimuthal angles of an M-point Fibonacci lattice."""
    if M < 6:
        raise ValueError("need at least 6 sphere points")
    k = np.arange(M)
    theta = np.arccos(1 - 2 * (k + 0.5) / M)
    phi = np.pi * (1 + np.sqrt(5)) * k
    return theta, phi


def bloch_average(f, M=200):
    """Mean of f(u, v) over a Fibonacci lattice of qubit states.

    The states are u = cos(theta/2), v = exp(i phi) sin(theta/2).
    """
    theta, phi = fibonacci_sphere(M)
    u = np.cos(theta / 2)
    v = np.exp(1j * phi) * np.sin(theta / 2)
    vals = [f(complex(a), complex(b)) for a, b in zip(u, v)]
    if all(x == vals[0] for x in vals):
        return vals[0]
    return float(np.mean(vals))


def rabi_contrast(times, values):
    """Max minus min of an oscillating series over its first full period.

    The period is twice the spacing of the first two interior extrema of a
    cubic spline through the samples.  When the series ends before a full
    period has elapsed the window is clipped to the data.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size != y.size or t.size < 4:
        raise ValueError("need matching times and values with at least 4 samples")
    if np.ptp(y) < 1e-12:
        raise ValueError("no oscillation detected")
    spl = CubicSpline(t, y)
    ext = spl.derivative().roots(extrapolate=False)
    ext = ext[(ext > t[0]) & (ext < t[-1])]
    if ext.size < 2:
        raise ValueError("no oscillation detected")
    period = 2 * (ext[1] - ext[0])
    start = t[0]
    stop = min(start + period, t[-1])
    grid = np.concatenate([t[(t >= start) & (t <= stop)], ext[ext <= stop]])
    vals = spl(grid)
    return float(vals.max() - vals.min())
