"""Scenario configuration and result containers."""
from __future__ import annotations

import copy
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..hilbert import make_profile

SCHEMA = "effdyn/1"

SCENARIOS = ("itc", "three_state", "up_defect", "tangle", "memory", "mixed", "thermal")
ITC_SCENARIOS = ("itc",)
DOT_SCENARIOS = SCENARIOS[1:]

# observable columns each scenario can emit
OBSERVABLES = {
    "itc": ("P0", "rows23", "X1var", "X1var_matched"),
    "three_state": ("abs_a1", "abs_b1", "abs_c1", "P_down", "tangle"),
    "up_defect": ("P_T", "P_up", "P_down"),
    "tangle": ("tangle", "P_down", "P_up"),
    "memory": ("fidelity",),
    "mixed": ("P_up",),
    "thermal": ("P_up",),
}


class ConfigError(ValueError):
    """Configuration does not validate against the schema."""


@dataclass
class TimeSeries:
    """Sampled observables; ``columns`` maps names to arrays as long as ``times``."""
    times: np.ndarray
    columns: dict = field(default_factory=dict)
    key: str = "time"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly ascending")
        for name, col in list(self.columns.items()):
            col = np.asarray(col, dtype=float)
            if col.shape != self.times.shape:
                raise ValueError(f"column {name!r} has length {col.size}, expected {self.times.size}")
            self.columns[name] = col

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return self.times.size

    @property
    def names(self):
        return list(self.columns)

    def to_csv(self, path=None):
        """Write ``key,<columns>`` rows with 17 significant digits.

        Returns the text when ``path`` is None.
        """
        buf = io.StringIO()
        buf.write(",".join([self.key] + self.names) + "\n")
        data = np.column_stack([self.times] + [self.columns[n] for n in self.names])
        np.savetxt(buf, data, fmt="%.17g", delimiter=",", newline="\n")
        text = buf.getvalue()
        if path is None:
            return text
        Path(path).write_text(text, newline="\n")
        return None


@dataclass
class RunResult:
    """A runner's output: the sampled series plus engine metadata for manifests."""
    series: TimeSeries
    info: dict = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    """Validated scenario description.

    Attributes mirror the JSON keys; ``raw`` keeps the resolved document so
    it can be echoed into a run manifest.
    """
    name: str
    scenario: str
    N: int
    profile: dict
    initial: dict
    engine: dict
    times: dict
    observables: list
    output: str | None = None
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def model(self):
        return "itc" if self.scenario in ITC_SCENARIOS else "central_spin"

    @property
    def engine_kind(self):
        return self.engine.get("kind", "effective")

    @property
    def max_row(self):
        return self.engine.get("max_row")

    def build_profile(self):
        params = {k: v for k, v in self.profile.items() if k != "kind"}
        return make_profile(self.profile["kind"], self.N, params)

    def time_grid(self, unit_scale=1.0):
        """Uniform grid; ``unit`` "tau" measures start/stop in transfer times."""
        t = self.times
        scale = unit_scale if t.get("unit") == "tau" else 1.0
        return np.linspace(float(t.get("start", 0.0)) * scale, float(t["stop"]) * scale,
                           int(t.get("points", 600)))

    def replace(self, **changes):
        """Copy with top-level, ``initial`` or ``engine`` keys overridden."""
        doc = copy.deepcopy(self.raw)
        for key, val in changes.items():
            if key in ("N", "name", "output"):
                doc[key] = val
            elif key == "max_row":
                doc.setdefault("engine", {})[key] = val
            elif key in ("j0", "Gamma"):
                defect = doc.setdefault("initial", {}).get("defect") or {"kind": "lorentzian"}
                defect[key] = val
                doc["initial"]["defect"] = defect
            elif key == "k_mean":
                doc.setdefault("initial", {})[key] = val
            elif key == "points":
                doc.setdefault("times", {})["points"] = val
            else:
                raise KeyError(f"cannot override {key!r}")
        return config_from_dict(doc)


def _require(doc, key, kind=None):
    if key not in doc:
        raise ConfigError(f"missing required field {key!r}")
    val = doc[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"field {key!r} has the wrong type")
    return val


def config_from_dict(doc) -> ScenarioConfig:
    """Validate a config document and return a ScenarioConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    schema = _require(doc, "schema", str)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r} (expected {SCHEMA!r})")
    scenario = _require(doc, "scenario", str)
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    N = _require(doc, "N")
    if isinstance(N, bool) or not isinstance(N, int) or N < 1:
        raise ConfigError("N must be a positive integer")
    profile = dict(_require(doc, "profile", dict))
    if "kind" not in profile:
        raise ConfigError("profile needs a kind")
    initial = dict(doc.get("initial", {}))
    engine = dict(doc.get("engine", {"kind": "effective", "max_row": 2}))
    times = dict(_require(doc, "times", dict))
    if "stop" not in times:
        raise ConfigError("times needs a stop value")
    if int(times.get("points", 600)) < 2:
        raise ConfigError("time grid needs at least 2 points")
    if float(times["stop"]) <= float(times.get("start", 0.0)):
        raise ConfigError("time grid stop must exceed start")
    observables = list(doc.get("observables", OBSERVABLES[scenario][:1]))
    unknown = [o for o in observables if o not in OBSERVABLES[scenario]]
    if unknown:
        raise ConfigError(f"observables {unknown} are not available for {scenario!r}")

    kind = engine.get("kind", "effective")
    if kind not in ("effective", "exact"):
        raise ConfigError(f"unknown engine kind {kind!r}")
    if kind == "effective":
        mr = engine.get("max_row", 2)
        if mr is not None and (isinstance(mr, bool) or not isinstance(mr, int) or mr < 1):
            raise ConfigError("max_row must be a positive integer or null")
        engine["max_row"] = mr

    if scenario == "itc":
        if "nbar" not in initial or "field_dim" not in initial:
            raise ConfigError("itc scenarios need initial.nbar and initial.field_dim")
        if float(initial["nbar"]) < 0 or int(initial["field_dim"]) < 1:
            raise ConfigError("nbar must be >= 0 and field_dim >= 1")
        if kind == "exact" and "rows23" in observables:
            raise ConfigError("row populations need the effective engine")
    if scenario == "thermal":
        k = initial.get("k_mean")
        if k is None or not 0 <= float(k) < 0.5:
            raise ConfigError("thermal scenarios need 0 <= initial.k_mean < 0.5")
        if kind != "exact":
            raise ConfigError("thermal scenarios run on the exact engine only")
    if scenario in ("three_state", "up_defect", "tangle") and "defect" not in initial:
        raise ConfigError(f"{scenario} scenarios need initial.defect")
    if scenario == "mixed" and "mixture" not in initial:
        raise ConfigError("mixed scenarios need initial.mixture")
    if "electron" in initial:
        e = initial["electron"]
        if not (isinstance(e, list) and len(e) == 2):
            raise ConfigError("initial.electron must be [u, v]")

    return ScenarioConfig(name=str(doc.get("name", scenario)), scenario=scenario, N=N,
                          profile=profile, initial=initial, engine=engine, times=times,
                          observables=observables, output=doc.get("output"),
                          sweep=dict(doc.get("sweep", {})), raw=copy.deepcopy(doc))


def load_config(path) -> ScenarioConfig:
    """Read and validate a JSON config file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return config_from_dict(doc)


def electron_state(spec):
    """Normalized (u, v) from a config entry; each entry may be [re, im]."""
    def num(x):
        if isinstance(x, (list, tuple)):
            return complex(float(x[0]), float(x[1]))
        return complex(x)
    u, v = (num(x) for x in spec)
    norm = np.sqrt(abs(u) ** 2 + abs(v) ** 2)
    if norm == 0:
        raise ConfigError("electron state is zero")
    return u / norm, v / norm
