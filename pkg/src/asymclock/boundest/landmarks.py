"""Landmark distance-to-delay maps and the inconsistent-bound relaxation.

Each landmark keeps one map per direction: the lower convex hull of its
(distance, minimum OWD) scatter to the other landmarks.  Queries inside the
[q0.2, q0.8] range of observed distances return max(M(x), SoL bound), and
the SoL bound elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..intervals import Interval

GATE_QUANTILES = (0.2, 0.8)


@dataclass(frozen=True)
class LandmarkMap:
    xs: np.ndarray  # hull vertices, increasing distance (km)
    ys: np.ndarray  # delay at each vertex (s)
    gate_lo: float
    gate_hi: float

    def __call__(self, x):
        """Evaluate M; NaN outside the observed distance range."""
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.xs, self.ys)
        return np.where((x < self.xs[0]) | (x > self.xs[-1]), np.nan, out)


def lower_hull(xs, ys):
    """Lower convex hull (Andrew's monotone chain), vertices sorted by x."""
    pts = sorted(zip(map(float, xs), map(float, ys)))
    hull: list[tuple[float, float]] = []
    for p in pts:
        if hull and p[0] == hull[-1][0]:
            continue  # same x: the first (lowest y) is kept
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (x1 - x0) * (p[1] - y0) - (p[0] - x0) * (y1 - y0) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array([h[0] for h in hull]), np.array([h[1] for h in hull])


def build_landmark_map(samples) -> LandmarkMap:
    """``samples``: iterable of (distance_km, owd_seconds)."""
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(arr) < 2 or np.ptp(arr[:, 0]) == 0:
        raise ValueError("need samples at two or more distinct distances")
    hx, hy = lower_hull(arr[:, 0], arr[:, 1])
    q_lo, q_hi = np.quantile(arr[:, 0], GATE_QUANTILES)
    return LandmarkMap(hx, hy, float(q_lo), float(q_hi))


def rebuild(lmap: LandmarkMap, samples) -> LandmarkMap:
    """Periodic re-calibration entry point; a static scenario never changes it."""
    return build_landmark_map(samples)


def query_map(lmap: LandmarkMap, x, sol_bound):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("distance must be non-negative")
    inside = (x >= lmap.gate_lo) & (x <= lmap.gate_hi)
    m = np.interp(x, lmap.xs, lmap.ys)
    out = np.where(inside, np.maximum(m, sol_bound), sol_bound)
    return float(out) if out.ndim == 0 else out


def lbbe_reconcile_arr(lm_lo, lm_hi, sol_lo, sol_hi):
    """Vectorized relaxation over the last (server) axis.

    While the intersection is empty, the tighter of the two binding landmark
    intervals (the unrelaxed server with the largest lower edge, and the one
    with the smallest upper edge) is replaced by that server's SoL interval.
    Ties go to the lower server index.  An empty per-server landmark interval
    (lo > hi) is relaxed first.  Returns ``(lo, hi, relaxed_mask)``.
    """
    lm_lo, lm_hi = np.broadcast_arrays(np.asarray(lm_lo, float), np.asarray(lm_hi, float))
    sol_lo, sol_hi = np.broadcast_arrays(np.asarray(sol_lo, float), np.asarray(sol_hi, float))
    relaxed = lm_lo > lm_hi
    n = lm_lo.shape[-1]
    for _ in range(n + 1):
        lo = np.where(relaxed, sol_lo, lm_lo)
        hi = np.where(relaxed, sol_hi, lm_hi)
        glo, ghi = lo.max(-1), hi.min(-1)
        bad = glo > ghi
        if not bad.any():
            break
        masked_lo = np.where(relaxed, -np.inf, lo)
        masked_hi = np.where(relaxed, np.inf, hi)
        i_lo = np.argmax(masked_lo, -1)
        i_hi = np.argmin(masked_hi, -1)
        width = hi - lo
        w_lo = np.take_along_axis(width, i_lo[..., None], -1)[..., 0]
        w_hi = np.take_along_axis(width, i_hi[..., None], -1)[..., 0]
        pick = np.where((w_hi < w_lo) | ((w_hi == w_lo) & (i_hi < i_lo)), i_hi, i_lo)
        has_cand = ~relaxed.all(-1)
        upd = bad & has_cand
        if not upd.any():
            break
        np.put_along_axis(relaxed, pick[..., None], np.take_along_axis(relaxed, pick[..., None], -1) | upd[..., None], -1)
    lo = np.where(relaxed, sol_lo, lm_lo).max(-1)
    hi = np.where(relaxed, sol_hi, lm_hi).min(-1)
    return lo, hi, relaxed


def lbbe_reconcile(per_server: Sequence[tuple[Interval, Interval]]) -> Interval:
    """Combine (landmark interval, SoL fallback interval) pairs into a non-empty bound."""
    if not per_server:
        raise ValueError("need at least one server")
    lm = [p[0] for p in per_server]
    sol = [p[1] for p in per_server]
    if any(s.empty for s in sol):
        raise ValueError("SoL fallback intervals must be non-empty")
    lm_lo = np.array([np.inf if iv.empty else iv.lo for iv in lm])
    lm_hi = np.array([-np.inf if iv.empty else iv.hi for iv in lm])
    lo, hi, _ = lbbe_reconcile_arr(lm_lo, lm_hi, [s.lo for s in sol], [s.hi for s in sol])
    if lo > hi:
        raise ValueError("SoL fallback intervals are mutually inconsistent")
    return Interval(float(lo), float(hi))
