"""Offset-bound estimation: SoL-based (SBBE), landmark-based (LBBE) and
route-knowledge-augmented (K-SBBE)."""

from .landmarks import (
    LandmarkMap,
    build_landmark_map,
    lbbe_reconcile,
    lbbe_reconcile_arr,
    lower_hull,
    query_map,
    rebuild,
)
from .routes import Route, gen_route, gen_routes, ksbbe_bounds
from .sbbe import combine_servers, exchange_bounds, nested_combine_arr, refine, refine_arr, sbbe_interval

__all__ = [
    "LandmarkMap",
    "Route",
    "build_landmark_map",
    "combine_servers",
    "exchange_bounds",
    "gen_route",
    "gen_routes",
    "ksbbe_bounds",
    "lbbe_reconcile",
    "lbbe_reconcile_arr",
    "lower_hull",
    "nested_combine_arr",
    "query_map",
    "rebuild",
    "refine",
    "refine_arr",
    "sbbe_interval",
]
