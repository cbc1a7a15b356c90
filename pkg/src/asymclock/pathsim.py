"""Ground-truth paths, client clocks, and timestamp exchanges.

Path quantities are arrays so one call covers every (client, server) pair of
a scenario; the scalar :func:`gen_path` wraps the bulk generator.  All times
are seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geo
from .asymmodel import MixtureModel, sample_asym

F_RANGE = (1.2, 1.8)
OFFSET_BOUND = 10e-3


@dataclass(frozen=True)
class ModelAsym:
    """Asymmetry drawn from the relative-asymmetry mixture."""

    model: MixtureModel = field(default_factory=MixtureModel)
    renorm: str = "truncate"


@dataclass(frozen=True)
class ZAsym:
    """T = sign * Z * T_L with Z ~ U[lo, hi] and a fair random sign."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi <= 1:
            raise ValueError(f"need 0 <= lo <= hi <= 1, got [{self.lo}, {self.hi}]")


@dataclass
class PathParams:
    """Minimum-delay parameters of one or many paths (fields broadcast together).

    Invariants: r_min = d_up_min + d_down_min, asym = d_up_min - d_down_min,
    both one-way minima >= d_sol, |t_rel| <= t_limit = 1 - 1/inflation.
    """

    r_min: np.ndarray
    asym: np.ndarray
    d_up_min: np.ndarray
    d_down_min: np.ndarray
    d_sol: np.ndarray
    inflation: np.ndarray

    @property
    def t_rel(self):
        return self.asym / self.r_min

    @property
    def t_limit(self):
        return 1.0 - 2.0 * self.d_sol / self.r_min

    @property
    def z(self):
        tl = self.t_limit
        return np.where(tl > 0, np.abs(self.t_rel) / np.where(tl > 0, tl, 1.0), 0.0)

    def reversed(self) -> "PathParams":
        """The same path probed from the other end."""
        return PathParams(self.r_min, -self.asym, self.d_down_min, self.d_up_min, self.d_sol, self.inflation)

    def take(self, idx) -> "PathParams":
        return PathParams(*(np.asarray(getattr(self, f))[idx] for f in
                            ("r_min", "asym", "d_up_min", "d_down_min", "d_sol", "inflation")))


@dataclass(frozen=True)
class ClockModel:
    """Client clock that is perfect up to a constant offset ``true_offset``."""

    true_offset: float
    bound: float = OFFSET_BOUND

    def __post_init__(self):
        if abs(self.true_offset) > self.bound:
            raise ValueError(f"|offset| {self.true_offset} exceeds bound {self.bound}")


@dataclass(frozen=True)
class ServerModel:
    location: geo.GeoPoint
    internal_delay: float = 0.0

    def __post_init__(self):
        if self.internal_delay < 0:
            raise ValueError("internal_delay must be >= 0")


@dataclass
class TimestampExchange:
    """Client send / server receive / client receive timestamps (arrays allowed).

    ``t_so_server`` is the server send stamp; it equals ``t_s_server`` when the
    server turnaround is zero.
    """

    t_a_client: np.ndarray
    t_s_server: np.ndarray
    t_f_client: np.ndarray
    t_so_server: np.ndarray | None = None

    def __post_init__(self):
        if self.t_so_server is None:
            self.t_so_server = self.t_s_server

    @property
    def measured_forward(self):
        return self.t_s_server - self.t_a_client

    @property
    def measured_backward(self):
        return self.t_f_client - self.t_so_server

    @property
    def rtt(self):
        return (self.t_f_client - self.t_a_client) - (self.t_so_server - self.t_s_server)


def _draw_t_rel(asym_source, t_limit, rng, shape):
    if isinstance(asym_source, ModelAsym):
        t = sample_asym(asym_source.model, np.ones(shape), np.broadcast_to(t_limit, shape), rng,
                        size=shape, renorm=asym_source.renorm)
        return np.asarray(t)
    if isinstance(asym_source, ZAsym):
        z = rng.uniform(asym_source.lo, asym_source.hi, shape)
        sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
        return sign * z * t_limit
    raise TypeError(f"unsupported asymmetry source {asym_source!r}")


def draw_inflation(rng: np.random.Generator, shape, f_range=F_RANGE):
    lo, hi = f_range
    if not 1.0 <= lo <= hi:
        raise ValueError(f"inflation range must satisfy 1 <= lo <= hi, got {f_range}")
    return np.full(shape, float(lo)) if lo == hi else rng.uniform(lo, hi, shape)


def gen_paths(d_sol, asym_source, rng: np.random.Generator, f_range=F_RANGE, inflation=None) -> PathParams:
    """Bulk path generation from speed-of-light delays.

    r_min = F * 2 * d_sol with F ~ U[f_range] (a fixed F if the range is
    degenerate, or pre-drawn ``inflation``), and asymmetry from
    ``asym_source`` respecting the SoL bounds.
    """
    d_sol = np.asarray(d_sol, dtype=float)
    if np.any(d_sol <= 0):
        raise ValueError("coincident endpoints: d_sol must be > 0")
    shape = d_sol.shape
    if inflation is None:
        inflation = draw_inflation(rng, shape, f_range)
    inflation = np.broadcast_to(np.asarray(inflation, dtype=float), shape)
    r_min = inflation * 2.0 * d_sol
    t_limit = 1.0 - 1.0 / inflation
    t = _draw_t_rel(asym_source, t_limit, rng, shape)
    asym = r_min * t
    d_up = np.maximum(0.5 * (r_min + asym), d_sol)
    d_down = np.maximum(0.5 * (r_min - asym), d_sol)
    return PathParams(d_up + d_down, d_up - d_down, d_up, d_down, d_sol, inflation)


def gen_path(client: geo.GeoPoint, server: geo.GeoPoint, asym_source, rng, f_range=F_RANGE,
             distance_scale: float = 1.0) -> PathParams:
    d_sol = geo.sol_delay(client, server) * distance_scale
    if d_sol <= 0:
        raise ValueError("client and server coincide")
    p = gen_paths(np.array(d_sol), asym_source, rng, f_range)
    return PathParams(*(float(getattr(p, f)) for f in
                        ("r_min", "asym", "d_up_min", "d_down_min", "d_sol", "inflation")))


def draw_offsets(rng: np.random.Generator, size, bound: float = OFFSET_BOUND):
    return rng.uniform(-bound, bound, size)


def exchange(clock, path: PathParams, congestion_mean: float, rng: np.random.Generator,
             size=None, internal_delay: float = 0.0) -> TimestampExchange:
    """Simulate exchanges at true send time 0.

    ``clock`` is a :class:`ClockModel` or an array of offsets broadcastable to
    the path arrays; ``size`` appends extra trailing draws (e.g. M exchanges).
    Congestion on each direction is iid Exponential(congestion_mean).
    """
    if congestion_mean < 0:
        raise ValueError("congestion_mean must be >= 0")
    offset = clock.true_offset if isinstance(clock, ClockModel) else np.asarray(clock, dtype=float)
    d_up = np.asarray(path.d_up_min, dtype=float)
    d_down = np.asarray(path.d_down_min, dtype=float)
    shape = np.broadcast_shapes(np.shape(d_up), np.shape(offset))
    if size is not None:
        d_up = np.expand_dims(d_up, tuple(range(d_up.ndim, d_up.ndim + len(np.atleast_1d(size)))))
        d_down = np.expand_dims(d_down, tuple(range(d_down.ndim, d_down.ndim + len(np.atleast_1d(size)))))
        offset = np.expand_dims(offset, tuple(range(np.ndim(offset), np.ndim(offset) + len(np.atleast_1d(size)))))
        shape = shape + tuple(np.atleast_1d(size))
    if congestion_mean > 0:
        q_up = rng.exponential(congestion_mean, shape)
        q_down = rng.exponential(congestion_mean, shape)
    else:
        q_up = q_down = np.zeros(shape)
    t_si = d_up + q_up
    t_so = t_si + internal_delay
    t_a = np.broadcast_to(offset, shape) + 0.0
    t_f = t_so + d_down + q_down + offset
    return TimestampExchange(t_a, t_si, t_f, t_so)
