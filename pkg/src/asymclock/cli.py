"""Command-line entry point: ``asymclock <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every command writes a JSON manifest to the output directory, also on
failure.  Errors are reported on stderr as one ``error: <kind>: <message>``
line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
import typing
from pathlib import Path

import yaml

from . import asymmodel, czdetect
from .experiments.output import Row, write_manifest, write_rows
from .experiments.pools import DataPool
from .experiments.presets import (DESK_PLACEMENTS, JITTER_SIZES, PRESETS, R_STAR_MS, TIGHTEN_SIZES, Context,
                                  pool_rows, run_preset)
from .experiments.scenario import ScenarioConfig, run_scenario

RUN_KEYS = {"out_dir": str, "workers": int, "full": bool}


class ConfigError(ValueError):
    """Invalid configuration or usage (exit code 2)."""


def _scenario_types() -> dict:
    hints = typing.get_type_hints(ScenarioConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(ScenarioConfig)}


def _coerce(key: str, value, typ):
    try:
        if typ is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if typ is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if typ is str:
            if not isinstance(value, str):
                raise TypeError
            return value
        if typ is tuple:
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    raise ConfigError(f"unsupported type for {key!r}")


def load_config(path) -> dict:
    """Flat YAML mapping of scenario and run keys; unknown keys are rejected."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a key-value mapping")
    types = {**_scenario_types(), **RUN_KEYS}
    out = {}
    for key, value in doc.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"config key {key!r} must not be nested")
        out[key] = _coerce(key, value, types[key])
    return out


def _split(conf: dict):
    scen = {k: v for k, v in conf.items() if k not in RUN_KEYS}
    run = {k: v for k, v in conf.items() if k in RUN_KEYS}
    return scen, run


def _scenario(conf: dict, args) -> ScenarioConfig:
    scen, _ = _split(conf)
    if getattr(args, "seed", None) is not None:
        scen["seed"] = args.seed
    try:
        return ScenarioConfig(**scen)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat YAML file of scenario keys")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out-dir", help="output directory (default: results)")
    p.add_argument("--workers", type=int, help="parallel worker processes (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asymclock", description="Path-asymmetry clock-offset simulations.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its metrics")
    _common(p)

    p = sub.add_parser("preset", help="run a named figure/table sweep")
    p.add_argument("name", help=f"one of: {', '.join(PRESETS)}")
    _common(p)
    p.add_argument("--full", action="store_true", help="large replication counts and full sweep grids")
    p.add_argument("--placements", type=int, help=f"independent placements (default {DESK_PLACEMENTS})")

    p = sub.add_parser("czdetect", help="harvest clear zones from a timestamp trace CSV")
    p.add_argument("trace", help="CSV with t_a,t_si,t_so,t_f,stratum,valid_flag[,server]")
    p.add_argument("--out", help="catalog CSV (default: <out-dir>/clear_zones.csv)")
    _common(p)

    p = sub.add_parser("fitmodel", help="fit the relative-asymmetry model to T values")
    p.add_argument("t_values", nargs="?", help="one-column CSV of T values (or a clear-zone catalog)")
    p.add_argument("--paper-defaults", action="store_true", help="print the default fitted parameters")
    p.add_argument("--out-dir", help="manifest directory (default: results)")

    for name, helptext in (("jitter", "asymmetry-jitter error range"), ("tighten", "bound-tightening ratio")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--catalog", help="clear-zone catalog CSV (data mode); default is model mode")
        p.add_argument("--r-star-ms", type=float, nargs="+", help="annulus centres in ms")
        p.add_argument("--n-s", type=int, nargs="+", help="server-set sizes")
        p.add_argument("--replications", type=int, help="draws per point (default 10^4, 10^5 with --full)")
        p.add_argument("--full", action="store_true", help="large replication counts and full sweep grids")
        _common(p)
    return ap


def _out_dir(args, conf) -> Path:
    _, run = _split(conf)
    return Path(args.out_dir or run.get("out_dir") or "results")


def _workers(args, conf) -> int:
    _, run = _split(conf)
    w = args.workers or run.get("workers") or os.cpu_count() or 1
    if w < 1:
        raise ConfigError("workers must be >= 1")
    return w


def _full(args, conf) -> bool:
    _, run = _split(conf)
    return bool(getattr(args, "full", False) or run.get("full", False))


def cmd_simulate(args, conf, state) -> int:
    cfg = _scenario(conf, args)
    state["seed"], state["config"] = cfg.seed, cfg.to_dict()
    agg = run_scenario(cfg, workers=_workers(args, conf))
    rows = [Row("n_servers", cfg.n_servers_used, "simulate", cfg.method, k, agg.mean[k], agg.stderr[k])
            for k in agg.mean]
    state["outputs"].append(write_rows(_out_dir(args, conf) / "metrics.csv", rows))
    return 0


def cmd_preset(args, conf, state) -> int:
    if args.name not in PRESETS:
        raise ConfigError(f"unknown preset {args.name!r}; available: {', '.join(PRESETS)}")
    cfg = _scenario(conf, args)
    placements = args.placements or conf.get("placements") or DESK_PLACEMENTS
    ctx = Context(cfg, full=_full(args, conf), workers=_workers(args, conf), placements=placements)
    state["seed"], state["config"] = cfg.seed, {**cfg.to_dict(), "placements": placements, "full": ctx.full,
                                                "preset": args.name}
    rows = run_preset(args.name, ctx)
    state["outputs"].append(write_rows(_out_dir(args, conf) / f"{args.name}.csv", rows))
    return 0


def cmd_czdetect(args, conf, state) -> int:
    state["config"] = {"trace": args.trace}
    traces = czdetect.read_traces(args.trace)
    rows = czdetect.catalog(traces)
    out = Path(args.out) if args.out else _out_dir(args, conf) / "clear_zones.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    czdetect.write_catalog(out, rows)
    state["outputs"].append(out)
    state["extra"] = {"zones": len(rows), "servers": len(traces)}
    return 0


def cmd_fitmodel(args, conf, state) -> int:
    if args.paper_defaults:
        model = asymmodel.MixtureModel()
    else:
        if not args.t_values:
            raise ConfigError("give a T-values CSV or --paper-defaults")
        state["config"] = {"t_values": args.t_values}
        model = asymmodel.fit(asymmodel.read_t_values(args.t_values))
    print(json.dumps(model.as_dict()))
    state["extra"] = {"model": model.as_dict()}
    return 0


def _cmd_pool(kind: str, args, conf, state) -> int:
    cfg = _scenario(conf, args)
    full = _full(args, conf)
    reps = args.replications or (100_000 if full else 10_000)
    r_stars = args.r_star_ms or list(R_STAR_MS)
    sizes = args.n_s or list(JITTER_SIZES if kind == "jitter" else TIGHTEN_SIZES)
    if reps < 1 or min(sizes) < 1 or min(r_stars) <= 0:
        raise ConfigError("replications, n_s and r_star_ms must be positive")
    if args.catalog:
        pool = DataPool.from_catalog(czdetect.read_catalog(args.catalog))
    else:
        pool = asymmodel.MixtureModel(cfg.model_w, cfg.model_b, cfg.model_p)
    state["seed"] = cfg.seed
    state["config"] = {"model": None if args.catalog else pool.as_dict(), "catalog": args.catalog,
                       "r_star_ms": r_stars, "n_s": sizes, "replications": reps}
    rows = pool_rows(kind, pool, r_stars, sizes, reps, cfg.seed)
    state["outputs"].append(write_rows(_out_dir(args, conf) / f"{kind}.csv", rows))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "preset": cmd_preset,
    "czdetect": cmd_czdetect,
    "fitmodel": cmd_fitmodel,
    "jitter": lambda a, c, s: _cmd_pool("jitter", a, c, s),
    "tighten": lambda a, c, s: _cmd_pool("tighten", a, c, s),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    state = {"seed": getattr(args, "seed", None), "config": {}, "outputs": [], "extra": {}}
    t0 = time.perf_counter()
    conf: dict = {}
    code, error = 0, None
    try:
        if getattr(args, "config", None):
            conf = load_config(args.config)
        code = COMMANDS[args.command](args, conf, state)
    except ConfigError as exc:
        code, error = 2, f"config: {exc}"
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        code, error = 1, f"runtime: {exc}"
    if error:
        print(f"error: {error}", file=sys.stderr)
    try:
        write_manifest(_out_dir(args, conf) / f"{args.command}.manifest.json", command=args.command,
                       seed=state["seed"], config=state["config"], wall_time=time.perf_counter() - t0,
                       outputs=state["outputs"], error=error, extra=state["extra"])
    except OSError as exc:
        print(f"error: runtime: cannot write manifest: {exc}", file=sys.stderr)
        code = code or 1
    return code


if __name__ == "__main__":
    sys.exit(main())
