"""Reproducible experiment runners built on the chain and exact engines."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..observables import rabi_contrast
from .config import (OBSERVABLES, SCHEMA, ConfigError, RunResult, ScenarioConfig,
                     TimeSeries, config_from_dict, electron_state, load_config)
from .defects import DefectDistribution, defect_from_spec, eval_in_N
from .dot import (MemoryChannel, analytic_three_state, calibration_phase, memory_cycle,
                  memory_fidelity, run_memory, run_tangle, run_three_state, run_up_defect,
                  three_state_amplitudes, transfer_time)
from .ensembles import (SingleExcitationBranches, mixed_p_up, run_mixed, run_thermal,
                        thermal_p_up, thread_count)
from .itc import coherent_amplitudes, compare_itc, run_itc

RUNNERS = {
    "itc": run_itc,
    "three_state": run_three_state,
    "up_defect": run_up_defect,
    "tangle": run_tangle,
    "memory": run_memory,
    "mixed": run_mixed,
    "thermal": run_thermal,
}

SWEEP_AXES = ("j0", "Gamma", "N", "k_mean", "max_row")


def run(config: ScenarioConfig, times=None) -> RunResult:
    """Dispatch a validated config to its runner."""
    return RUNNERS[config.scenario](config, times)


def compare(config: ScenarioConfig) -> RunResult:
    """Effective versus exact engine on the same scenario."""
    if config.scenario == "itc":
        return compare_itc(config)
    if config.scenario in ("tangle", "up_defect"):
        eff = run(config.replace()).series
        doc = dict(config.raw, engine={"kind": "exact"})
        ex = run(config_from_dict(doc)).series
        name = config.observables[0]
        err = np.abs(eff[name] - ex[name])
        series = TimeSeries(eff.times, {f"{name}_exact": ex[name], f"{name}_effective": eff[name],
                                        "abs_error": err})
        return RunResult(series, {"observable": name, "max_abs_error": float(err.max()),
                                  "mean_abs_error": float(err.mean())})
    raise ConfigError(f"compare is not defined for {config.scenario!r} scenarios")


def summarize(config: ScenarioConfig, result: RunResult, axis=None) -> dict:
    """Scalar summaries of one run, used as a sweep row."""
    s = result.series
    out = {}
    if "tau" in result.info:
        out["tau"] = result.info["tau"]
    if config.scenario == "itc":
        if "rows23" in s.columns:
            out["max_leakage"] = float(s["rows23"].max())
        if "P0" in s.columns:
            out["min_P0"] = float(s["P0"].min())
        if "X1var" in s.columns:
            out["max_X1var"] = float(s["X1var"].max())
        if axis == "max_row":
            out["max_error"] = compare_itc(config).info["max_abs_error"]
    elif config.scenario == "memory":
        out["fidelity"] = float(s["fidelity"][0])
    elif config.scenario in ("mixed", "thermal"):
        out["contrast"] = rabi_contrast(s.times, s["P_up"])
    elif config.scenario == "tangle" and "tangle" in s.columns:
        tau = result.info["tau"]
        window = (s.times >= tau / 2) & (s.times <= 2 * tau)
        out["min_tangle"] = float(s["tangle"][window].min()) if window.any() else float("nan")
    elif config.scenario == "up_defect" and "P_T" in s.columns:
        out["min_P_T"] = float(s["P_T"].min())
    elif config.scenario == "three_state":
        out["max_P_up"] = float((s["abs_b1"] ** 2).max()) if "abs_b1" in s.columns else float("nan")
    return out


def sweep(config: ScenarioConfig, axis: str, values, workers=None) -> TimeSeries:
    """One summary row per value of ``axis``; values may be expressions in N."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unsupported sweep axis {axis!r}; choose from {SWEEP_AXES}")
    resolved = []
    for v in values:
        x = eval_in_N(v, config.N)
        if axis in ("j0", "N", "max_row"):
            x = int(round(x))
        resolved.append(x)
    if axis == "N":
        order = np.argsort(resolved, kind="stable")
        resolved = [resolved[i] for i in order]
    if np.any(np.diff(np.asarray(resolved, dtype=float)) <= 0):
        raise ConfigError("sweep values must be strictly increasing")

    def one(x):
        if axis == "j0" and config.scenario == "memory":
            doc = dict(config.raw)
            doc["initial"] = dict(doc.get("initial", {}))
            doc["initial"].pop("j0_values", None)
            cfg = config_from_dict(doc).replace(j0=x)
        else:
            cfg = config.replace(**{axis: x})
        return summarize(cfg, run(cfg), axis)

    workers = thread_count() if workers is None else workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, resolved))
    names = sorted({k for r in rows for k in r})
    cols = {n: np.array([r.get(n, np.nan) for r in rows], dtype=float) for n in names}
    return TimeSeries(np.asarray(resolved, dtype=float), cols, key=axis)


__all__ = [
    "SCHEMA", "OBSERVABLES", "ConfigError", "RunResult", "ScenarioConfig", "TimeSeries",
    "config_from_dict", "load_config", "electron_state",
    "DefectDistribution", "defect_from_spec", "eval_in_N",
    "analytic_three_state", "three_state_amplitudes", "transfer_time",
    "MemoryChannel", "memory_cycle", "memory_fidelity", "calibration_phase",
    "SingleExcitationBranches", "mixed_p_up", "thermal_p_up", "coherent_amplitudes",
    "run", "compare", "sweep", "summarize", "RUNNERS", "SWEEP_AXES",
    "run_itc", "compare_itc", "run_three_state", "run_up_defect", "run_tangle",
    "run_memory", "run_mixed", "run_thermal",
]
