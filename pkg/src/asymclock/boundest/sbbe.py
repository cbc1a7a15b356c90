"""Per-exchange error intervals and their refinement across exchanges and servers."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..intervals import Interval, intersect_all
from ..pathsim import TimestampExchange


def exchange_bounds(ex: TimestampExchange, dl_up, dl_down):
    """Array form of :func:`sbbe_interval`: returns ``(lo, hi)`` arrays.

    lo = C(t_a) - t_s + dL_up, hi = C(t_f) - t_s - dL_down (server send stamp
    on the right edge when the server turnaround is non-zero).
    """
    lo = ex.t_a_client - ex.t_s_server + dl_up
    hi = ex.t_f_client - ex.t_so_server - dl_down
    return lo, hi


def sbbe_interval(ex: TimestampExchange, dL_up: float, dL_down: float) -> Interval:
    if dL_up < 0 or dL_down < 0:
        raise ValueError("delay lower bounds must be non-negative")
    lo, hi = exchange_bounds(ex, dL_up, dL_down)
    lo, hi = float(lo), float(hi)
    if lo > hi:
        raise ValueError(f"negative interval width {hi - lo:.3e}: lower bounds exceed the measured RTT")
    return Interval(lo, hi)


def refine(ivs: Sequence[Interval]) -> Interval:
    """Intersection of the per-exchange intervals of one server."""
    return intersect_all(ivs)


def combine_servers(per_server: Sequence[Interval]) -> tuple[Interval, float]:
    """Final bound over servers and its central value as the offset estimate."""
    final = intersect_all(per_server)
    if final.empty:
        raise ValueError("inconsistent server intervals; use lbbe_reconcile for statistical bounds")
    return final, final.mid


def refine_arr(lo, hi, axis=-1):
    return np.max(lo, axis=axis), np.min(hi, axis=axis)


def nested_combine_arr(lo, hi):
    """Running intersection over servers (last axis) in inclusion order.

    Element ``[..., n]`` is the final bound using the first n+1 servers.
    """
    return np.maximum.accumulate(lo, axis=-1), np.minimum.accumulate(hi, axis=-1)
