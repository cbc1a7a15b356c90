"""Scenario worlds and per-method offset-bound evaluation.

A :class:`World` is one frozen placement: server and client positions, client
offsets, the client-server and server-server minimum-delay paths, and the
landmark maps built from the server mesh.  :func:`evaluate` runs one
estimation method on a world for every server count up to ``n_servers_used``
and returns per-count :class:`Metrics`.  :func:`run_scenario` repeats this over
independent placements and averages.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import geo
from ..asymmodel import MixtureModel
from ..boundest.landmarks import build_landmark_map, lbbe_reconcile_arr, query_map
from ..boundest.routes import gen_routes, ksbbe_bounds
from ..boundest.sbbe import exchange_bounds, nested_combine_arr
from ..pathsim import ModelAsym, PathParams, ZAsym, draw_inflation, draw_offsets, exchange, gen_paths

METHODS = ("sbbe", "lbbe", "ksbbe")
SELECTIONS = ("random", "ordered")
# containment slack for floating-point rounding in deterministic bounds
CONTAIN_TOL = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_servers: int = 50
    n_clients: int = 1000
    region: tuple = geo.MAINLAND_US
    f_range: tuple = (1.2, 1.8)
    offset_bound: float = 10e-3
    congestion_mean: float = 1e-3
    asym_mode: str = "model"
    z_interval: tuple = (0.0, 1.0)
    renorm: str = "truncate"
    model_w: float = 0.00136
    model_b: float = 0.0450
    model_p: float = 0.274
    distance_scale: float = 1.0
    method: str = "sbbe"
    server_selection: str = "ordered"
    n_servers_used: int = 20
    n_exchanges: int = 16
    k_known: int = 0
    n_route_nodes: int = 20
    replications: int = 1
    placements: int = 1
    geo_error_km: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.server_selection not in SELECTIONS:
            raise ValueError(f"server_selection must be one of {SELECTIONS}")
        if self.asym_mode not in ("model", "z_interval"):
            raise ValueError("asym_mode must be 'model' or 'z_interval'")
        if not 1 <= self.n_servers_used <= self.n_servers:
            raise ValueError("n_servers_used must be in [1, n_servers]")
        if self.n_servers < 3 and self.method == "lbbe":
            raise ValueError("lbbe needs at least 3 landmark servers")
        for name in ("n_clients", "n_exchanges", "replications", "placements", "n_route_nodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.k_known <= self.n_route_nodes:
            raise ValueError("k_known must be in [0, n_route_nodes]")
        if self.congestion_mean < 0 or self.distance_scale <= 0 or self.geo_error_km < 0:
            raise ValueError("congestion_mean, geo_error_km must be >= 0 and distance_scale > 0")
        geo.Region(*self.region)
        ZAsym(*self.z_interval)

    @property
    def asym_source(self):
        if self.asym_mode == "model":
            return ModelAsym(MixtureModel(self.model_w, self.model_b, self.model_p), self.renorm)
        return ZAsym(*self.z_interval)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["region"] = list(self.region)
        d["f_range"] = list(self.f_range)
        d["z_interval"] = list(self.z_interval)
        return d


@dataclass
class Metrics:
    rmse: float
    mean_bound_width: float
    inconsistent_fraction: float
    mean_inconsistent_edge_distance: float
    mean_abs_error: float
    n: int
    records: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_bounds(cls, lo, hi, truth, keep_records=False) -> "Metrics":
        lo, hi = np.asarray(lo), np.asarray(hi)
        truth = np.broadcast_to(truth, lo.shape)
        err = 0.5 * (lo + hi) - truth
        outside = (truth < lo - CONTAIN_TOL) | (truth > hi + CONTAIN_TOL)
        edge = np.minimum(np.abs(truth - lo), np.abs(truth - hi))
        recs = {}
        if keep_records:
            recs = {"lo": lo, "hi": hi, "truth": truth, "error": err}
        return cls(
            rmse=float(np.sqrt(np.mean(err ** 2))),
            mean_bound_width=float(np.mean(hi - lo)),
            inconsistent_fraction=float(np.mean(outside)),
            mean_inconsistent_edge_distance=float(np.mean(edge[outside])) if outside.any() else float("nan"),
            mean_abs_error=float(np.mean(np.abs(err))),
            n=int(lo.size),
            records=recs,
        )


@dataclass
class World:
    cfg: ScenarioConfig
    s_lat: np.ndarray
    s_lon: np.ndarray
    c_lat: np.ndarray
    c_lon: np.ndarray
    rep_lat: np.ndarray  # client-reported positions (geolocation error)
    rep_lon: np.ndarray
    offsets: np.ndarray  # (C,)
    cs_dist_km: np.ndarray  # (C, S) true, at simulated scale
    cs_rep_dist_km: np.ndarray  # (C, S) as reported by clients
    cs: PathParams  # (C, S)
    ss_dist_km: np.ndarray  # (S, S)
    ss_owd: np.ndarray  # (S, S) minimum OWD i -> j, nan on diagonal
    maps_in: list = field(default_factory=list)  # per server, OWDs arriving at it
    maps_out: list = field(default_factory=list)
    rng_seed: np.random.SeedSequence | None = None


STREAM_NAMES = ("place", "offset", "infl_cs", "asym_cs", "infl_ss", "asym_ss", "geoerr", "select", "route",
                "congest")


def _child(seed_seq: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    # SeedSequence.spawn advances a counter; fixed keys make every call reproducible
    return np.random.SeedSequence(entropy=seed_seq.entropy, spawn_key=tuple(seed_seq.spawn_key) + tuple(key))


def _streams(seed_seq: np.random.SeedSequence):
    """Named child streams; fixed keys keep each stream stable across configs and calls."""
    return {name: _child(seed_seq, i) for i, name in enumerate(STREAM_NAMES)}


def build_world(cfg: ScenarioConfig, seed_seq: np.random.SeedSequence) -> World:
    st = _streams(seed_seq)
    region = geo.Region(*cfg.region)
    rp = np.random.default_rng(st["place"])
    s_lat, s_lon = geo.sample_region(region, rp, cfg.n_servers)
    c_lat, c_lon = geo.sample_region(region, rp, cfg.n_clients)
    offsets = draw_offsets(np.random.default_rng(st["offset"]), cfg.n_clients, cfg.offset_bound)

    scale = cfg.distance_scale
    cs_dist = geo.haversine_km(c_lat[:, None], c_lon[:, None], s_lat[None, :], s_lon[None, :]) * scale
    cs_dsol = geo.km_to_delay(cs_dist)
    infl = draw_inflation(np.random.default_rng(st["infl_cs"]), cs_dsol.shape, cfg.f_range)
    cs = gen_paths(cs_dsol, cfg.asym_source, np.random.default_rng(st["asym_cs"]), cfg.f_range, infl)

    if cfg.geo_error_km > 0:
        rg = np.random.default_rng(st["geoerr"])
        rep_lat, rep_lon = geo.destination_arr(c_lat, c_lon, rg.uniform(0, 360, cfg.n_clients), cfg.geo_error_km)
    else:
        rep_lat, rep_lon = c_lat, c_lon
    cs_rep = geo.haversine_km(rep_lat[:, None], rep_lon[:, None], s_lat[None, :], s_lon[None, :]) * scale

    ss_dist = geo.haversine_km(s_lat[:, None], s_lon[:, None], s_lat[None, :], s_lon[None, :]) * scale
    iu = np.triu_indices(cfg.n_servers, 1)
    ss_dsol = geo.km_to_delay(ss_dist[iu])
    ss_infl = draw_inflation(np.random.default_rng(st["infl_ss"]), ss_dsol.shape, cfg.f_range)
    ss = gen_paths(ss_dsol, cfg.asym_source, np.random.default_rng(st["asym_ss"]), cfg.f_range, ss_infl)
    owd = np.full((cfg.n_servers, cfg.n_servers), np.nan)
    owd[iu] = ss.d_up_min
    owd[(iu[1], iu[0])] = ss.d_down_min

    world = World(cfg, s_lat, s_lon, c_lat, c_lon, rep_lat, rep_lon, offsets, cs_dist, cs_rep, cs,
                  ss_dist, owd, rng_seed=seed_seq)
    if cfg.method == "lbbe":
        build_maps(world)
    return world


def build_maps(world: World) -> None:
    """Landmark maps: every server maps both directions from the mesh."""
    n = world.cfg.n_servers
    world.maps_in, world.maps_out = [], []
    for s in range(n):
        others = np.arange(n) != s
        x = world.ss_dist_km[s, others]
        world.maps_in.append(build_landmark_map(np.column_stack([x, world.ss_owd[others, s]])))
        world.maps_out.append(build_landmark_map(np.column_stack([x, world.ss_owd[s, others]])))


def with_config(world: World, **changes) -> World:
    """Same frozen world evaluated under a different (non-structural) config."""
    return replace(world, cfg=replace(world.cfg, **changes))


def server_order(world: World, selection: str, rng: np.random.Generator | None = None):
    """(C, S) server indices per client in inclusion order."""
    if selection == "ordered":
        return np.argsort(world.cs.r_min, axis=1, kind="stable")
    rng = rng or np.random.default_rng(_streams(world.rng_seed)["select"])
    return np.argsort(rng.random(world.cs.r_min.shape), axis=1)


def _lower_bounds(world: World, order, route_cache: dict | None = None, k: int | None = None):
    """(dl_up, dl_down, sol) for the selected (client, server) pairs."""
    cfg = world.cfg
    rep = np.take_along_axis(world.cs_rep_dist_km, order, 1)
    sol = geo.km_to_delay(rep)
    if cfg.method == "sbbe":
        return sol, sol, sol
    if cfg.method == "lbbe":
        dl_up = np.empty_like(sol)
        dl_down = np.empty_like(sol)
        for s in range(cfg.n_servers):
            m = order == s
            if m.any():
                dl_up[m] = query_map(world.maps_in[s], rep[m], sol[m])
                dl_down[m] = query_map(world.maps_out[s], rep[m], sol[m])
        return dl_up, dl_down, sol
    routes = route_cache.get("routes") if route_cache is not None else None
    if routes is None:
        routes = make_routes(world, order)
        if route_cache is not None:
            route_cache["routes"] = routes
    dl_up, dl_down = ksbbe_bounds(routes, cfg.k_known if k is None else k)
    return dl_up, dl_down, sol


def make_routes(world: World, order):
    cfg = world.cfg
    s_idx = order
    c_lat = np.broadcast_to(world.c_lat[:, None], order.shape)
    c_lon = np.broadcast_to(world.c_lon[:, None], order.shape)
    path = world.cs.take((np.arange(order.shape[0])[:, None], s_idx))
    rng = np.random.default_rng(_streams(world.rng_seed)["route"])
    return gen_routes(path, c_lat, c_lon, world.s_lat[s_idx], world.s_lon[s_idx], cfg.n_route_nodes, rng,
                      cfg.distance_scale)


def _server_intervals(world: World, order, dl_up, dl_down, rng):
    """Refined per-server (lo, hi) after M exchanges, shape (C, n)."""
    cfg = world.cfg
    path = world.cs.take((np.arange(order.shape[0])[:, None], order))
    m = cfg.n_exchanges if cfg.congestion_mean > 0 else 1
    ex = exchange(world.offsets[:, None], path, cfg.congestion_mean, rng, size=m)
    lo, hi = exchange_bounds(ex, dl_up[..., None], dl_down[..., None])
    return lo.max(-1), hi.min(-1), ex


def evaluate(world: World, counts=None, keep_records=False, route_cache: dict | None = None,
             order=None) -> dict[int, Metrics]:
    """Metrics for each server count in ``counts`` (default: just n_servers_used).

    Congestion replications are pooled into each metric.
    """
    cfg = world.cfg
    counts = sorted(set(counts or [cfg.n_servers_used]))
    n_used = max(counts)
    if order is None:
        order = server_order(world, cfg.server_selection)
    order = order[:, :n_used]
    dl_up, dl_down, sol = _lower_bounds(world, order, route_cache)
    crng = np.random.default_rng(_congest_seed(world))
    per_n: dict[int, list] = {n: [] for n in counts}
    for _ in range(cfg.replications):
        lo, hi, ex = _server_intervals(world, order, dl_up, dl_down, crng)
        if cfg.method == "lbbe":
            slo, shi = exchange_bounds(ex, sol[..., None], sol[..., None])
            slo, shi = slo.max(-1), shi.min(-1)
            for n in counts:
                flo, fhi, _ = lbbe_reconcile_arr(lo[:, :n], hi[:, :n], slo[:, :n], shi[:, :n])
                per_n[n].append((flo, fhi))
        else:
            clo, chi = nested_combine_arr(lo, hi)
            for n in counts:
                per_n[n].append((clo[:, n - 1], chi[:, n - 1]))
    out = {}
    for n in counts:
        flo = np.concatenate([p[0] for p in per_n[n]])
        fhi = np.concatenate([p[1] for p in per_n[n]])
        truth = np.tile(world.offsets, cfg.replications)
        out[n] = Metrics.from_bounds(flo, fhi, truth, keep_records)
    return out


def _congest_seed(world: World):
    """Congestion stream keyed by (world seed, congestion-relevant config)."""
    cfg = world.cfg
    key = (int(round(cfg.congestion_mean * 1e9)), cfg.n_exchanges, cfg.replications)
    return _child(world.rng_seed, STREAM_NAMES.index("congest"), *key)


def placement_seeds(seed: int, placements: int):
    return np.random.SeedSequence(seed).spawn(placements)


@dataclass
class Aggregate:
    """Mean and standard error across placements for each metric."""

    mean: dict
    stderr: dict
    per_placement: list

    @classmethod
    def of(cls, metrics: list[Metrics]) -> "Aggregate":
        names = ("rmse", "mean_bound_width", "inconsistent_fraction", "mean_inconsistent_edge_distance",
                 "mean_abs_error")
        mean, se = {}, {}
        for name in names:
            v = np.array([getattr(m, name) for m in metrics], dtype=float)
            v = v[np.isfinite(v)]
            mean[name] = float(v.mean()) if v.size else float("nan")
            se[name] = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
        return cls(mean, se, metrics)


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> Aggregate:
    """Run ``cfg`` over ``cfg.placements`` independent placements."""
    seeds = placement_seeds(cfg.seed, cfg.placements)
    results = map_placements(_one_placement, [(cfg, s) for s in seeds], workers)
    return Aggregate.of(results)


def _one_placement(args):
    cfg, seed_seq = args
    world = build_world(cfg, seed_seq)
    return evaluate(world)[cfg.n_servers_used]


def map_placements(fn, items, workers: int = 1):
    """Ordered map; results never depend on the worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
