"""Relative-asymmetry distribution: a narrow uniform peak mixed with a
Laplace variate renormalized to [-1, 1].

T = a / r takes values in [-1, 1].  With probability ``p`` it is drawn from
U(-w/2, w/2), otherwise from a Laplace(0, b) conditioned on |T| <= 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

DEFAULT_W = 0.00136
DEFAULT_B = 0.0450
DEFAULT_P = 0.274
MIN_FIT_SAMPLES = 100


@dataclass(frozen=True)
class MixtureModel:
    w: float = DEFAULT_W
    b: float = DEFAULT_B
    p: float = DEFAULT_P

    def __post_init__(self):
        if not 0 < self.w < 1:
            raise ValueError(f"w must be in (0, 1), got {self.w}")
        if not self.b > 0:
            raise ValueError(f"b must be > 0, got {self.b}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must be in [0, 1], got {self.p}")

    def as_dict(self) -> dict:
        return {"w": self.w, "b": self.b, "p": self.p}


def _laplace_mass(c, b):
    """P(|L| <= c) for L ~ Laplace(0, b)."""
    return -np.expm1(-np.asarray(c, dtype=float) / b)


def _laplace_trunc_abs(u, c, b):
    """Inverse CDF of |L| conditioned on |L| <= c."""
    return -b * np.log1p(-u * _laplace_mass(c, b))


def sample_T(model: MixtureModel, rng: np.random.Generator, size=None, limit=1.0):
    """Draw relative asymmetries, optionally conditioned on |T| <= ``limit``.

    ``limit`` may be an array broadcastable to ``size``; with the default of 1
    this is the base model.  Conditioning is exact: both mixture weights are
    renormalized by the component mass inside [-limit, limit].
    """
    limit = np.asarray(limit, dtype=float)
    if np.any(limit <= 0) or np.any(limit > 1):
        raise ValueError("limit must lie in (0, 1]")
    shape = np.broadcast_shapes(np.shape(limit), () if size is None else tuple(np.atleast_1d(size)))
    half = 0.5 * model.w
    u_mass = np.minimum(1.0, limit / half)
    l_mass = _laplace_mass(limit, model.b) / _laplace_mass(1.0, model.b)
    pu = model.p * u_mass / (model.p * u_mass + (1 - model.p) * l_mass)
    pick_u = rng.random(shape) < pu
    peak = rng.uniform(-1.0, 1.0, shape) * np.minimum(half, limit)
    mag = _laplace_trunc_abs(rng.random(shape), limit, model.b)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    out = np.where(pick_u, peak, sign * mag)
    return float(out) if size is None and out.ndim == 0 else out


def cdf(model: MixtureModel, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1) or np.any(t_arr > 1):
        raise ValueError("cdf is defined on [-1, 1]")
    half = 0.5 * model.w
    cu = np.clip((t_arr + half) / model.w, 0.0, 1.0)
    # symmetric truncated Laplace: 0.5 + sign(t) * P(|L| <= |t|) / (2 P(|L| <= 1))
    cl = 0.5 + 0.5 * np.sign(t_arr) * _laplace_mass(np.abs(t_arr), model.b) / _laplace_mass(1.0, model.b)
    out = model.p * cu + (1 - model.p) * cl
    return float(out) if out.ndim == 0 else out


def fit(samples, w: float = DEFAULT_W, tol: float = 1e-4) -> MixtureModel:
    """Fit (b, p) to measured relative asymmetries with the peak width fixed.

    The data are symmetrized ({y} U {-y}).  ``b`` is the maximum-likelihood
    Laplace scale of the samples lying outside the uniform peak, corrected for
    the peak cut-off (|L| - w/2 given |L| > w/2 is again exponential with mean
    b).  ``p`` minimizes the L1 distance between model and empirical CDFs over
    the [q0.2, q0.8] range of the symmetrized data.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples, got {y.size}")
    if np.any(np.abs(y) > 1):
        raise ValueError("relative asymmetries must lie in [-1, 1]")
    sym = np.sort(np.concatenate([y, -y]))
    tail = np.abs(y)[np.abs(y) > 0.5 * w]
    if tail.size == 0:
        raise ValueError("degenerate sample: no values outside the peak, Laplace scale would be 0")
    b_hat = float(np.mean(tail) - 0.5 * w)
    if b_hat <= 0:
        raise ValueError("degenerate sample: non-positive Laplace scale")

    q_lo, q_hi = np.quantile(sym, [0.2, 0.8])
    if q_hi <= q_lo:
        q_lo, q_hi = -0.5 * w, 0.5 * w
    grid = np.linspace(q_lo, q_hi, 2001)
    emp = np.searchsorted(sym, grid, side="right") / sym.size
    half = 0.5 * w
    cu = np.clip((grid + half) / w, 0.0, 1.0)
    cl = cdf(MixtureModel(w, b_hat, 0.0), grid)
    dx = grid[1] - grid[0]

    def l1(p):
        return np.sum(np.abs(p * cu + (1 - p) * cl - emp)) * dx

    res = minimize_scalar(l1, bounds=(0.0, 1.0), method="bounded", options={"xatol": tol})
    p_hat = float(np.clip(res.x, 0.0, 1.0))
    # the bounded search never lands exactly on an endpoint
    for edge in (0.0, 1.0):
        if l1(edge) <= l1(p_hat):
            p_hat = edge
    return MixtureModel(w, b_hat, p_hat)


def sample_asym(model: MixtureModel, r_min, T_limit, rng: np.random.Generator, size=None, renorm: str = "truncate"):
    """Draw path asymmetries a = r * T with |T| <= T_limit.

    ``renorm="truncate"`` conditions the model on |T| <= T_limit;
    ``renorm="scale"`` maps the base model onto [-T_limit, T_limit] by
    multiplying by T_limit.
    """
    r_min = np.asarray(r_min, dtype=float)
    if np.any(r_min <= 0):
        raise ValueError("r_min must be positive")
    if renorm == "truncate":
        t = sample_T(model, rng, size, limit=T_limit)
    elif renorm == "scale":
        shape = size if size is not None else (np.shape(T_limit) or None)
        t = np.asarray(T_limit) * sample_T(model, rng, shape)
    else:
        raise ValueError(f"unknown renorm mode {renorm!r}")
    out = r_min * t
    return float(out) if np.ndim(out) == 0 else out


def read_t_values(path) -> np.ndarray:
    """Read a one-column CSV of T values; a non-numeric header row is skipped.

    Multi-column files (the clear-zone catalog) are accepted if they carry a
    ``T_hat`` column.
    """
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        return np.empty(0)
    col, first = 0, 1
    try:
        float(rows[0][0])
    except ValueError:
        header = [c.strip() for c in rows[0]]
        col = header.index("T_hat") if "T_hat" in header else 0
        rows, first = rows[1:], 2
    vals = []
    for i, r in enumerate(rows, start=first):
        try:
            vals.append(float(r[col]))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"row {i}: not a number: {r!r}") from exc
    return np.asarray(vals)
