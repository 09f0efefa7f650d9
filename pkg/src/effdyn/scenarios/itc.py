"""Atoms in a cavity: coherent field plus ensemble ground state."""
from __future__ import annotations

from math import lgamma

import numpy as np

from ..chain import (ITC, ChainLabel, assemble_effective_hamiltonian,
                     build_effective_basis, nominal_itc_dim)
from ..exact import assemble_itc_full, conserved_blocks, itc_excitations, propagate
from ..observables import quadrature_variance, row_population, state_population
from .config import RunResult, TimeSeries

GROUND = ChainLabel(1, 0)


def coherent_amplitudes(nbar, field_dim):
    """Coherent-state amplitudes truncated to ``field_dim`` levels and renormalized."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    n = np.arange(field_dim)
    if nbar == 0:
        c = (n == 0).astype(float)
    else:
        logc = -nbar / 2 + n * 0.5 * np.log(nbar) - 0.5 * np.array([lgamma(k + 1) for k in n])
        c = np.exp(logc)
    return c / np.linalg.norm(c)


def effective_states(profile, nbar, field_dim, times, max_row=2, max_col=None):
    """Propagate |coherent>|ground> in the truncated chain space.

    Returns (states, labels, basis); ``labels`` are (n, ChainLabel) pairs.
    """
    top = min(profile.n, field_dim - 1)
    max_col = top if max_col is None else min(max_col, top)
    basis = build_effective_basis(profile, ITC, max_col=max_col, max_row=max_row)
    H, labels = assemble_effective_hamiltonian(basis, field_dim)
    psi0 = np.zeros(len(labels), dtype=complex)
    c = coherent_amplitudes(nbar, field_dim)
    for i, (n, lab) in enumerate(labels):
        if lab == GROUND:
            psi0[i] = c[n]
    blocks = conserved_blocks([n + lab.col for n, lab in labels])
    return propagate(H, psi0, times, blocks=blocks), labels, basis


def exact_states(profile, nbar, field_dim, times):
    """Full-space propagation; labels are (n, atomic bitstring) pairs."""
    N = profile.n
    H = assemble_itc_full(profile, field_dim)
    D = 2 ** N
    psi0 = np.zeros(field_dim * D, dtype=complex)
    psi0[np.arange(field_dim) * D] = coherent_amplitudes(nbar, field_dim)
    blocks = conserved_blocks(itc_excitations(N, field_dim))
    states = propagate(H, psi0, times, blocks=blocks)
    labels = [(n, b) for n in range(field_dim) for b in range(D)]
    return states, labels


def _observe(name, states, labels, field_dim, effective, max_row=None):
    if name == "P0":
        return state_population(states, labels, GROUND if effective else 0)
    if name == "rows23":
        # an untruncated chain reaches every row; absent rows are just empty
        built = range(1, 4) if max_row is None else range(1, max_row + 1)
        return row_population(states, labels, (2, 3), built=built)
    if name in ("X1var", "X1var_matched"):
        return quadrature_variance(states, labels, field_dim)
    raise KeyError(name)


def run_itc(config, times=None) -> RunResult:
    """Run an ``itc`` scenario and evaluate its observables on the time grid."""
    profile = config.build_profile()
    nbar = float(config.initial["nbar"])
    fd = int(config.initial["field_dim"])
    times = config.time_grid() if times is None else np.asarray(times, dtype=float)
    effective = config.engine_kind == "effective"
    max_row = config.max_row
    max_col = config.engine.get("max_col")

    def states_for(prof):
        if effective:
            st, lab, basis = effective_states(prof, nbar, fd, times, max_row, max_col)
            return st, lab, basis
        st, lab = exact_states(prof, nbar, fd, times)
        return st, lab, None

    states, labels, basis = states_for(profile)
    cols = {}
    for name in config.observables:
        if name == "X1var_matched":
            continue
        cols[name] = _observe(name, states, labels, fd, effective, max_row)
    if "X1var_matched" in config.observables:
        st2, lab2, _ = states_for(profile.matched_homogeneous())
        cols["X1var_matched"] = quadrature_variance(st2, lab2, fd)

    info = {"model": ITC, "N": profile.n, "field_dim": fd, "engine": config.engine_kind,
            "exact_dim": fd * 2 ** profile.n}
    if effective:
        info.update(max_row=max_row, effective_dim=_nominal(basis, max_row, fd),
                    effective_rank=len(labels), chain_states=len(basis),
                    truncated_residual=_largest_residual(basis))
    else:
        info.update(dim=fd * 2 ** profile.n)
    return RunResult(TimeSeries(times, cols), info)


def _nominal(basis, max_row, field_dim):
    if max_row is None:
        return None
    return nominal_itc_dim(max_row, field_dim, basis.max_col)


def _largest_residual(basis):
    norms = [r[1] for r in basis.residual_log if r[2] == "truncated"]
    return float(max(norms)) if norms else 0.0


def compare_itc(config, times=None) -> RunResult:
    """Effective and exact P0 side by side with their absolute difference."""
    profile = config.build_profile()
    nbar = float(config.initial["nbar"])
    fd = int(config.initial["field_dim"])
    times = config.time_grid() if times is None else np.asarray(times, dtype=float)
    obs = [o for o in config.observables if o in ("P0", "X1var")] or ["P0"]
    name = obs[0]
    st_e, lab_e, basis = effective_states(profile, nbar, fd, times, config.max_row,
                                          config.engine.get("max_col"))
    st_x, lab_x = exact_states(profile, nbar, fd, times)
    eff = _observe(name, st_e, lab_e, fd, True)
    ex = _observe(name, st_x, lab_x, fd, False)
    err = np.abs(eff - ex)
    series = TimeSeries(times, {f"{name}_exact": ex, f"{name}_effective": eff, "abs_error": err})
    info = {"observable": name, "max_abs_error": float(err.max()),
            "mean_abs_error": float(err.mean()),
            "dims": {"exact": fd * 2 ** profile.n,
                     "effective": _nominal(basis, config.max_row, fd),
                     "effective_rank": len(lab_e)}}
    return RunResult(series, info)
