"""Route model with partially known intermediate nodes.

Each direction of a (client, server) path is a chain of N nodes: placed
equidistantly on the great circle, then pushed sideways by
``P * dist * d_i`` (d_i random, summing to 1; side o_i random).  The amplitude
P* is solved per direction so the hop-sum SoL delay matches that direction's
minimum OWD.  Both directions share N, d_i, o_i and the node indices; only the
amplitude differs.

Arrays carry any leading "pair" shape, so thousands of routes are generated
and solved together.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import geo
from ..pathsim import PathParams

SOLVER_TOL = 1e-12  # seconds of delay
MAX_BISECT = 200


@dataclass
class Route:
    c_lat: np.ndarray
    c_lon: np.ndarray
    s_lat: np.ndarray
    s_lon: np.ndarray
    base_lat: np.ndarray  # (..., N) undisplaced nodes
    base_lon: np.ndarray
    side_bearing: np.ndarray  # (..., N) perpendicular bearing incl. orientation
    rel_disp: np.ndarray  # (..., N) d_i, sums to 1
    dist_km: np.ndarray  # great-circle distance at the simulated scale
    km_scale: np.ndarray  # simulated km per geographic km
    amp_up: np.ndarray  # P* forward
    amp_down: np.ndarray  # P* backward
    d_up_min: np.ndarray
    d_down_min: np.ndarray
    d_sol: np.ndarray
    known_order: np.ndarray  # (..., N) node indices; the first k are known
    _frame_cache: dict | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.base_lat.shape[-1]

    def nodes(self, direction: str = "up"):
        amp = self.amp_up if direction == "up" else self.amp_down
        return _displaced(self, amp)

    def hop_delay(self, direction: str = "up", idx=None):
        amp = self.amp_up if direction == "up" else self.amp_down
        return _hop_sum(self, amp, idx)


def _displaced(route: Route, amp):
    # displacement measured in geographic km (the simulated scale is applied to hop sums)
    dist = np.asarray(amp)[..., None] * (route.dist_km / route.km_scale)[..., None] * route.rel_disp
    return geo.destination_arr(route.base_lat, route.base_lon, route.side_bearing, dist)


def _unit(lat, lon):
    la, lo = np.radians(lat), np.radians(lon)
    return np.stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)])


def _frame(route: Route):
    """Flattened unit vectors (component-first): endpoints, base nodes, sideways tangents."""
    if route._frame_cache is None:
        route._frame_cache = _build_frame(route)
    return route._frame_cache


def _build_frame(route: Route):
    n = route.n_nodes
    lat, lon = np.radians(route.base_lat.reshape(-1, n)), np.radians(route.base_lon.reshape(-1, n))
    brg = np.radians(route.side_bearing.reshape(-1, n))
    north = np.stack([-np.sin(lat) * np.cos(lon), -np.sin(lat) * np.sin(lon), np.cos(lat)])
    east = np.stack([-np.sin(lon), np.cos(lon), np.zeros_like(lon)])
    return {
        "c": _unit(route.c_lat.reshape(-1), route.c_lon.reshape(-1)),
        "s": _unit(route.s_lat.reshape(-1), route.s_lon.reshape(-1)),
        "u": _unit(route.base_lat.reshape(-1, n), route.base_lon.reshape(-1, n)),
        "v": np.cos(brg) * north + np.sin(brg) * east,
        "rad": ((route.dist_km / route.km_scale).reshape(-1)[:, None] * route.rel_disp.reshape(-1, n)
                / geo.EARTH_RADIUS_KM),
        "scale": route.km_scale.reshape(-1),
    }


def _hop_sum_flat(frame: dict, amp, sel, idx=None):
    """Hop-sum SoL delay for flattened pairs ``sel`` through (a subset ``idx`` of) the nodes."""
    ang = np.asarray(amp)[:, None] * frame["rad"][sel]
    u, v = frame["u"][:, sel], frame["v"][:, sel]
    if idx is not None:
        ang = np.take_along_axis(ang, idx, -1)
        u = np.take_along_axis(u, np.broadcast_to(idx, (3,) + idx.shape), -1)
        v = np.take_along_axis(v, np.broadcast_to(idx, (3,) + idx.shape), -1)
    nodes = np.cos(ang) * u + np.sin(ang) * v
    x, y, z = np.concatenate([frame["c"][:, sel, None], nodes, frame["s"][:, sel, None]], -1)
    ax, ay, az, bx, by, bz = x[:, :-1], y[:, :-1], z[:, :-1], x[:, 1:], y[:, 1:], z[:, 1:]
    cross = np.sqrt((ay * bz - az * by) ** 2 + (az * bx - ax * bz) ** 2 + (ax * by - ay * bx) ** 2)
    hop = np.arctan2(cross, ax * bx + ay * by + az * bz)
    return geo.km_to_delay(hop.sum(-1) * geo.EARTH_RADIUS_KM * frame["scale"][sel])


def _hop_sum(route: Route, amp, idx=None):
    frame = _frame(route)
    shape = route.c_lat.shape
    amp = np.broadcast_to(np.asarray(amp, dtype=float), shape).reshape(-1)
    if idx is not None:
        idx = np.asarray(idx).reshape(-1, idx.shape[-1])
    return _hop_sum_flat(frame, amp, np.arange(amp.size), idx).reshape(shape)


def _solve_amplitude(route: Route, target):
    """Largest amplitude with hop-sum <= target, to within SOLVER_TOL.

    Bracketed false position (Illinois variant) on the still-active pairs.
    Returning the lower end of the bracket keeps the route's delay a valid
    lower bound on the path's minimum OWD.
    """
    shape = np.shape(target)
    frame = _frame(route)
    t = np.asarray(target, dtype=float).reshape(-1)
    all_idx = np.arange(t.size)
    lo = np.zeros_like(t)
    f_lo = _hop_sum_flat(frame, lo, all_idx) - t
    hi = np.ones_like(t)
    f_hi = np.full_like(t, np.inf)
    act = np.flatnonzero(f_lo < -SOLVER_TOL)  # others sit on the great circle
    probe = act
    for _ in range(60):
        if probe.size == 0:
            break
        f = _hop_sum_flat(frame, hi[probe], probe) - t[probe]
        short = f <= 0
        f_hi[probe] = f
        lo[probe[short]], f_lo[probe[short]] = hi[probe[short]], f[short]
        hi[probe[short]] *= 2
        probe = probe[short]
    else:
        raise RuntimeError("could not bracket the route amplitude")
    act = act[(-f_lo[act] > SOLVER_TOL) & np.isfinite(f_hi[act])]
    g_lo = f_lo.copy()  # undamped residual at lo
    side = np.zeros(t.size, dtype=np.int8)  # which end moved last: -1 lo, +1 hi
    for _ in range(MAX_BISECT):
        if act.size == 0:
            break
        a, b, fa, fb = lo[act], hi[act], f_lo[act], f_hi[act]
        x = b - fb * (b - a) / (fb - fa)
        bad = ~((x > a) & (x < b))
        x[bad] = 0.5 * (a[bad] + b[bad])
        fx = _hop_sum_flat(frame, x, act) - t[act]
        below = fx <= 0
        ib, ia = act[below], act[~below]
        lo[ib], f_lo[ib], g_lo[ib] = x[below], fx[below], fx[below]
        f_hi[ib[side[ib] == -1]] *= 0.5  # lo moved twice: damp the stale end
        side[ib] = -1
        hi[ia], f_hi[ia] = x[~below], fx[~below]
        f_lo[ia[side[ia] == 1]] *= 0.5
        side[ia] = 1
        done = (-g_lo[act] <= SOLVER_TOL) | (hi[act] - lo[act] <= 1e-15 * hi[act])
        act = act[~done]
    return lo.reshape(shape)


def gen_routes(path: PathParams, c_lat, c_lon, s_lat, s_lon, n_nodes: int, rng: np.random.Generator,
               distance_scale: float = 1.0) -> Route:
    """Bulk route generation for arrays of (client, server) pairs."""
    c_lat, c_lon, s_lat, s_lon = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(c_lat, c_lon, s_lat, s_lon))
    shape = c_lat.shape
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    frac = np.arange(1, n_nodes + 1) / (n_nodes + 1)
    b_lat, b_lon = geo.interpolate_arr(c_lat[..., None], c_lon[..., None], s_lat[..., None], s_lon[..., None], frac)
    along = geo.bearing_deg(b_lat, b_lon, s_lat[..., None], s_lon[..., None])
    side = np.where(rng.random(shape + (n_nodes,)) < 0.5, -90.0, 90.0)
    rel = rng.random(shape + (n_nodes,))
    rel /= rel.sum(-1, keepdims=True)
    order = np.argsort(rng.random(shape + (n_nodes,)), axis=-1)
    dist_km = geo.haversine_km(c_lat, c_lon, s_lat, s_lon) * distance_scale
    route = Route(c_lat, c_lon, s_lat, s_lon, b_lat, b_lon, (along + side) % 360.0, rel,
                  dist_km, np.full(shape, float(distance_scale)),
                  np.zeros(shape), np.zeros(shape),
                  np.broadcast_to(path.d_up_min, shape).astype(float),
                  np.broadcast_to(path.d_down_min, shape).astype(float),
                  np.broadcast_to(path.d_sol, shape).astype(float), order)
    route.amp_up = _solve_amplitude(route, route.d_up_min)
    route.amp_down = _solve_amplitude(route, route.d_down_min)
    return route


def gen_route(path: PathParams, client: geo.GeoPoint, server: geo.GeoPoint, n_nodes: int,
              rng: np.random.Generator, distance_scale: float = 1.0) -> Route:
    return gen_routes(path, client.lat, client.lon, server.lat, server.lon, n_nodes, rng, distance_scale)


def ksbbe_bounds(route: Route, k: int):
    """SoL lower bounds per direction from the first ``k`` known nodes.

    Hop distances through the known nodes (in route order), clamped into
    [D_SoL, minimum OWD] to absorb floating-point rounding.
    """
    if not 0 <= k <= route.n_nodes:
        raise ValueError(f"k must be in [0, {route.n_nodes}], got {k}")
    if k == 0:
        d = np.asarray(route.d_sol, dtype=float)
        out = (d.copy(), d.copy())
    else:
        idx = np.sort(route.known_order[..., :k], axis=-1)
        up = _hop_sum(route, route.amp_up, idx)
        down = _hop_sum(route, route.amp_down, idx)
        out = (np.clip(up, route.d_sol, route.d_up_min), np.clip(down, route.d_sol, route.d_down_min))
    if np.ndim(out[0]) == 0:
        return float(out[0]), float(out[1])
    return out
