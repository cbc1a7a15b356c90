"""Named sweeps for the evaluation figures and tables.

Every scenario preset is a list of :class:`Job` s.  A job fixes the structural
world (placement-level config) and lists cheap evaluations on it (method,
congestion, M, K, server counts).  All jobs of a placement share its seed, so
curves within a preset use common random numbers.  Placements are mapped in
order across workers and averaged; each row carries the standard error across
placements.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..asymmodel import MixtureModel
from .output import Row
from .pools import jitter_experiment, tighten_experiment
from .scenario import (ScenarioConfig, build_maps, build_world, evaluate, map_placements, placement_seeds,
                       with_config)

DESK_PLACEMENTS = 20
METRICS = ("rmse", "mean_bound_width", "inconsistent_fraction", "mean_inconsistent_edge_distance",
           "mean_abs_error")
MU_GRID_MS = (0.0, 0.5, 1.0, 5.0, 10.0, 50.0)
M_GRID = (1, 2, 4, 8, 16, 32, 64)
Z_LEVELS = {"level1": (0.6, 0.7), "level2": (0.7, 0.8), "level3": (0.8, 0.9), "level4": (0.9, 1.0),
            "level5": (0.99, 1.0)}
GEO_ERRORS_KM = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0)
F_GRID = (1.2, 1.4, 1.6, 1.8, 2.0)
Z_CURVES = (0.0, 0.6, 0.9)
R_STAR_MS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 400.0)
JITTER_SIZES = (2, 4, 8, 16)
TIGHTEN_SIZES = (2, 4, 8, 32, 128, 512)


@dataclass(frozen=True)
class Eval:
    series: str
    x_name: str
    x: float | str | None  # None: use the server count
    changes: dict = field(default_factory=dict)
    counts: tuple | None = None


@dataclass(frozen=True)
class Job:
    world: dict
    evals: tuple
    label: str = ""  # set to record placement statistics under this series


@dataclass(frozen=True)
class Context:
    base: ScenarioConfig
    full: bool = False
    workers: int = 1
    placements: int = DESK_PLACEMENTS

    @property
    def replications(self) -> int:
        return 100 if self.full else 1

    @property
    def pool_replications(self) -> int:
        return 100_000 if self.full else 10_000


def _run_jobs(args):
    base, seed_seq, jobs = args
    out = {}
    for job in jobs:
        cfg = replace(base, **job.world)
        world = build_world(cfg, seed_seq)
        if not world.maps_in and any(e.changes.get("method", cfg.method) == "lbbe" for e in job.evals):
            build_maps(world)
        if job.label:
            out[(job.label, "-", "placement", job.label, "median_closest_rtt")] = float(
                np.median(world.cs.r_min.min(axis=1)))
        cache: dict = {}
        for ev in job.evals:
            w = with_config(world, **ev.changes)
            use_cache = cache if w.cfg.method == "ksbbe" else None
            for n, m in evaluate(w, counts=ev.counts, route_cache=use_cache).items():
                x = n if ev.x is None else ev.x
                for metric in METRICS:
                    out[(ev.series, w.cfg.method, ev.x_name, x, metric)] = getattr(m, metric)
    return out


def run_jobs(ctx: Context, jobs: list[Job], derive: Callable | None = None) -> list[Row]:
    """Evaluate ``jobs`` over ``ctx.placements`` placements and aggregate into rows."""
    base = replace(ctx.base, replications=ctx.replications)
    seeds = placement_seeds(base.seed, ctx.placements)
    per = map_placements(_run_jobs, [(base, s, tuple(jobs)) for s in seeds], ctx.workers)
    if derive is not None:
        per = [{**p, **derive(p)} for p in per]
    rows = []
    for key in per[0]:
        v = np.array([p[key] for p in per], dtype=float)
        v = v[np.isfinite(v)]
        mean = float(v.mean()) if v.size else float("nan")
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        series, method, x_name, x, metric = key
        rows.append(Row(x_name, x, series, method, metric, mean, se))
    return rows


def _methods(series, x_name, x, changes=None, methods=("sbbe", "lbbe"), counts=None):
    return tuple(Eval(series, x_name, x, {**(changes or {}), "method": m}, counts) for m in methods)


# --- scenario presets ------------------------------------------------------

def table1(ctx: Context) -> list[Row]:
    evals = ()
    for mu in MU_GRID_MS:
        evals += _methods("table1", "mu_ms", mu, {"congestion_mean": mu * 1e-3})
    return run_jobs(ctx, [Job({"method": "lbbe"}, evals)])


def table2(ctx: Context) -> list[Row]:
    jobs = [Job({"method": "lbbe", "congestion_mean": 0.0}, _methods("table2", "level", "model"))]
    for name, z in Z_LEVELS.items():
        jobs.append(Job({"method": "lbbe", "congestion_mean": 0.0, "asym_mode": "z_interval", "z_interval": z},
                        _methods("table2", "level", name)))
    return run_jobs(ctx, jobs)


def density(ctx: Context) -> list[Row]:
    jobs = [Job({"method": "lbbe", "distance_scale": s}, _methods("density", "distance_scale", s), label=f"scale={s}")
            for s in (1.0, 0.1)]
    return run_jobs(ctx, jobs)


def fig7(ctx: Context) -> list[Row]:
    evals = ()
    for m in M_GRID:
        evals += _methods("fig7", "M", m, {"n_exchanges": m})
    return run_jobs(ctx, [Job({"method": "lbbe"}, evals)])


def fig8(ctx: Context) -> list[Row]:
    n = ctx.base.n_servers
    evals = ()
    for sel in ("random", "ordered"):
        evals += _methods(sel, "n_servers", None, {"server_selection": sel, "n_servers_used": n},
                          counts=tuple(range(1, n + 1)))
    return run_jobs(ctx, [Job({"method": "lbbe", "n_servers_used": n}, evals)])


def fig10(ctx: Context) -> list[Row]:
    evals = ()
    for m in M_GRID:
        evals += _methods("fig10", "M", m, {"n_exchanges": m})
    return run_jobs(ctx, [Job({"method": "lbbe"}, evals)])


def _geo_deltas(p: dict) -> dict:
    out = {}
    for (series, method, x_name, x, metric), v in p.items():
        if metric == "mean_abs_error" and x_name == "geo_error_km":
            out[(series, method, x_name, x, "delta_mean_abs_error")] = v - p[(series, method, x_name, 0.0, metric)]
    return out


def geoerr(ctx: Context) -> list[Row]:
    jobs = [Job({"method": "lbbe", "geo_error_km": g}, _methods("geoerr", "geo_error_km", g)) for g in GEO_ERRORS_KM]
    return run_jobs(ctx, jobs, derive=_geo_deltas)


def _k_grid(ctx: Context, n_nodes: int) -> tuple:
    if ctx.full:
        return tuple(range(n_nodes + 1))
    return tuple(sorted({0, 1, 2, 3, 4, 5, n_nodes // 2, n_nodes} | set(range(0, n_nodes + 1, 2))))


def _ksbbe_evals(series, ks):
    return tuple(Eval(series, "K", k, {"method": "ksbbe", "k_known": k}) for k in ks)


def fig12_left(ctx: Context) -> list[Row]:
    ks = _k_grid(ctx, ctx.base.n_route_nodes)
    zero = {"congestion_mean": 0.0, "method": "ksbbe"}
    jobs = [Job({**zero, "f_range": (f, f), "asym_mode": "z_interval", "z_interval": (z, z)},
                _ksbbe_evals(f"F={f},Z={z}", ks)) for f in F_GRID for z in Z_CURVES]
    jobs.append(Job({**zero, "asym_mode": "model"}, _ksbbe_evals("model", ks)))
    return run_jobs(ctx, jobs)


def fig12_right(ctx: Context) -> list[Row]:
    n = ctx.base.n_route_nodes
    ks = sorted({0, n // 4, n // 2, 3 * n // 4, n})
    zs = np.round(np.linspace(0, 1, 51 if ctx.full else 11), 4)
    zero = {"congestion_mean": 0.0, "method": "ksbbe", "f_range": (1.4, 1.4), "asym_mode": "z_interval"}
    jobs = [Job({**zero, "z_interval": (float(z), float(z))},
                tuple(Eval(f"K={k}", "Z", float(z), {"method": "ksbbe", "k_known": k}) for k in ks)) for z in zs]
    return run_jobs(ctx, jobs)


# --- pool presets ------------------------------------------------------------

def _model_of(cfg: ScenarioConfig) -> MixtureModel:
    return MixtureModel(cfg.model_w, cfg.model_b, cfg.model_p)


def pool_rows(kind: str, pool, r_stars_ms, sizes, replications, seed, series_prefix="") -> list[Row]:
    """Jitter (``kind='jitter'``) or tightening rows over an r* grid; one rng stream per r*."""
    fn = jitter_experiment if kind == "jitter" else tighten_experiment
    metric = "mean_error_range" if kind == "jitter" else "mean_rho"
    method = "model" if isinstance(pool, MixtureModel) else "data"
    rows = []
    streams = np.random.SeedSequence(seed).spawn(len(r_stars_ms))
    for r_ms, ss in zip(r_stars_ms, streams):
        for res in fn(pool, r_ms * 1e-3, list(sizes), replications, np.random.default_rng(ss)):
            value = res.mean_error_range if kind == "jitter" else res.mean_rho
            rows.append(Row("r_star_ms", r_ms, f"{series_prefix}n_s={res.n_s}", method,
                            metric if not res.flagged else f"{metric}_flagged", value, res.stderr))
    return rows


def fig5(ctx: Context) -> list[Row]:
    return pool_rows("jitter", _model_of(ctx.base), R_STAR_MS, JITTER_SIZES, ctx.pool_replications, ctx.base.seed)


def fig6(ctx: Context) -> list[Row]:
    return pool_rows("tighten", _model_of(ctx.base), R_STAR_MS, TIGHTEN_SIZES, ctx.pool_replications,
                     ctx.base.seed)


PRESETS: dict[str, Callable[[Context], list[Row]]] = {
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig8": fig8,
    "fig10": fig10,
    "table1": table1,
    "table2": table2,
    "density": density,
    "geoerr": geoerr,
    "fig12-left": fig12_left,
    "fig12-right": fig12_right,
}


def run_preset(name: str, ctx: Context) -> list[Row]:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    return fn(ctx)
