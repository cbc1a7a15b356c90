"""Asymmetry jitter and bound tightening over server pools.

A pool is either the relative-asymmetry model (r drawn uniformly in the
annulus [0.8 r*, 1.2 r*], a = r*T) or measured (r_hat, a_hat) pairs from a
clear-zone catalog filtered to the annulus.  Server sets of several sizes
share one draw per replication (sets are nested prefixes), so results are
comparable across sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..asymmodel import MixtureModel, sample_T

ANNULUS = (0.8, 1.2)
CHUNK = 4096  # replications per vectorized batch


@dataclass(frozen=True)
class DataPool:
    """Measured (r, a) pairs, e.g. one row per clear zone."""

    r: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        r, a = np.asarray(self.r, float), np.asarray(self.a, float)
        if r.shape != a.shape or r.ndim != 1:
            raise ValueError("r and a must be 1-d arrays of equal length")
        if np.any(r <= 0):
            raise ValueError("r must be > 0")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_catalog(cls, rows) -> "DataPool":
        return cls(np.array([row["r_hat"] for row in rows], float), np.array([row["a_hat"] for row in rows], float))

    def annulus(self, r_star: float):
        lo, hi = ANNULUS[0] * r_star, ANNULUS[1] * r_star
        m = (self.r >= lo) & (self.r <= hi)
        return self.r[m], self.a[m]


@dataclass
class JitterResult:
    r_star: float
    n_s: int
    mean_error_range: float  # mean of (max a - min a) / 2
    stderr: float
    flagged: bool = False  # pool smaller than the server set


@dataclass
class TightenResult:
    r_star: float
    n_s: int
    mean_rho: float
    stderr: float
    flagged: bool = False


def _draw_sets(pool, r_star, n_max, reps, rng):
    """(reps, n_max) arrays of (r, a); None if a data pool is too small."""
    if isinstance(pool, MixtureModel):
        r = rng.uniform(ANNULUS[0] * r_star, ANNULUS[1] * r_star, (reps, n_max))
        return r, r * sample_T(pool, rng, size=(reps, n_max))
    if isinstance(pool, DataPool):
        r_pool, a_pool = pool.annulus(r_star)
        if len(r_pool) < n_max:
            return None
        # without replacement within a set
        idx = np.argsort(rng.random((reps, len(r_pool))), axis=1)[:, :n_max]
        return r_pool[idx], a_pool[idx]
    raise TypeError(f"unsupported pool {pool!r}")


def _chunked(pool, r_star, sizes, reps, rng, stat):
    sizes = sorted(set(int(n) for n in sizes))
    if sizes[0] < 1:
        raise ValueError("server-set sizes must be >= 1")
    if reps < 1:
        raise ValueError("replications must be >= 1")
    n_max = sizes[-1]
    acc = {n: [] for n in sizes}
    done = 0
    while done < reps:
        m = min(CHUNK, reps - done)
        sets = _draw_sets(pool, r_star, n_max, m, rng)
        if sets is None:
            return None
        r, a = sets
        for n in sizes:
            acc[n].append(stat(r[:, :n], a[:, :n]))
        done += m
    out = {}
    for n in sizes:
        v = np.concatenate(acc[n])
        out[n] = (float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0)
    return out


def _jitter_stat(r, a):
    return 0.5 * (a.max(1) - a.min(1))


def _rho_stat(r, a):
    # clock intervals [a/2 - r/2, a/2 + r/2] all contain the true time
    lo = (0.5 * (a - r)).max(1)
    hi = (0.5 * (a + r)).min(1)
    return np.maximum(hi - lo, 0.0) / r.max(1)


def jitter_experiment(pool, r_star: float, n_s: int | Sequence[int], replications: int,
                      rng: np.random.Generator) -> JitterResult | list[JitterResult]:
    """Mean asymmetry-jitter error range for server sets of size ``n_s``."""
    sizes = [n_s] if np.isscalar(n_s) else list(n_s)
    res = _chunked(pool, r_star, sizes, replications, rng, _jitter_stat)
    out = [JitterResult(r_star, n, float("nan"), float("nan"), True) if res is None
           else JitterResult(r_star, n, *res[n]) for n in sorted(set(sizes))]
    return out[0] if np.isscalar(n_s) else out


def tighten_experiment(pool, r_star: float, n_s: int | Sequence[int], replications: int,
                       rng: np.random.Generator) -> TightenResult | list[TightenResult]:
    """Mean ratio of reconciled width to the loosest initial width (rho)."""
    sizes = [n_s] if np.isscalar(n_s) else list(n_s)
    res = _chunked(pool, r_star, sizes, replications, rng, _rho_stat)
    out = [TightenResult(r_star, n, float("nan"), float("nan"), True) if res is None
           else TightenResult(r_star, n, *res[n]) for n in sorted(set(sizes))]
    return out[0] if np.isscalar(n_s) else out
