"""Command-line front end: ``effdyn run|compare|sweep <config>``.

Exit codes: 0 success, 2 invalid configuration, 3 engine guard violation,
4 numerical abort.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .exact import NumericalAbort
from .hilbert import GuardError
from .scenarios import (SWEEP_AXES, ConfigError, compare, config_from_dict, load_config,
                        run, sweep)

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERIC = 0, 2, 3, 4


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("effdyn.presets").iterdir()
                  if p.name.endswith(".json"))


def resolve_config(arg):
    """A config path, or the name of a shipped preset such as ``fig2``."""
    path = Path(arg)
    if path.exists():
        return load_config(path), str(path)
    if arg in preset_names():
        ref = resources.files("effdyn.presets") / f"{arg}.json"
        return config_from_dict(json.loads(ref.read_text())), f"preset:{arg}"
    raise ConfigError(f"no config file or preset named {arg!r}")


def _output_path(args, config, suffix=""):
    if args.out:
        return Path(args.out)
    stem = Path(config.output).stem if config.output else config.name
    return Path(f"{stem}{suffix}.csv")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _write_manifest(out, source, config, info, started, elapsed, extra=None):
    doc = {
        "tool": "effdyn",
        "version": __version__,
        "config_path": source,
        "config": config.raw,
        "fingerprint": {"model": config.model, "scenario": config.scenario, "N": config.N,
                        "engine": config.engine_kind, "max_row": config.max_row,
                        "time_points": int(config.times.get("points", 600))},
        "info": _jsonable(info),
        "started": started,
        "elapsed_seconds": elapsed,
    }
    if extra:
        doc.update(_jsonable(extra))
    path = out.with_suffix(".manifest.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _prepare(args):
    config, source = resolve_config(args.config)
    if getattr(args, "time_points", None):
        config = config.replace(points=int(args.time_points))
    return config, source


def cmd_run(args):
    config, source = _prepare(args)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    result = run(config)
    elapsed = time.perf_counter() - t0
    out = _output_path(args, config)
    result.series.to_csv(out)
    _write_manifest(out, source, config, result.info, started, elapsed)
    print(f"wrote {out} ({len(result.series)} rows)")
    return EXIT_OK


def cmd_compare(args):
    config, source = _prepare(args)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    result = compare(config)
    elapsed = time.perf_counter() - t0
    out = _output_path(args, config, "_compare")
    result.series.to_csv(out)
    summary = _jsonable(result.info)
    out.with_suffix(".summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, source, config, result.info, started, elapsed)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args):
    config, source = _prepare(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values needs at least one entry")
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    table = sweep(config, args.axis, values)
    elapsed = time.perf_counter() - t0
    out = _output_path(args, config, f"_sweep_{args.axis}")
    table.to_csv(out)
    _write_manifest(out, source, config, {"axis": args.axis, "values": values},
                    started, elapsed)
    print(f"wrote {out} ({len(table)} rows)")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="effdyn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"effdyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON config path or preset name (fig2 ... fig10)")
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--time-points", type=int, help="override the number of time points")

    common(sub.add_parser("run", help="run a scenario and write its time series"))
    common(sub.add_parser("compare", help="effective versus exact engine"))
    sw = sub.add_parser("sweep", help="one summary row per parameter value")
    common(sw)
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True,
                    help="comma-separated values; expressions in N such as N/4 are allowed")
    return p


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except GuardError as exc:
        print(f"effdyn: guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericalAbort as exc:
        print(f"effdyn: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"effdyn: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
