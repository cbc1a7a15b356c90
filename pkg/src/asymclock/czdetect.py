"""Level-shift detection and clear-zone harvesting over timestamp traces.

Each delay series follows x(i) = b(i) + q(i): a piecewise-constant baseline
plus non-negative congestion.  The detector compares the minimum of the W
samples before a position with the minimum of the W samples from it on; with
iid congestion and P(q < lambda) = p, a window whose minimum sits lambda above
the baseline has probability (1-p)^W, which W = ceil(ln alpha / ln(1-p))
keeps below alpha.

Clear zones are half-open index ranges ``[start, end)`` into the trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import minimum_filter1d

CZD_PROBS = (0.02, 0.05, 0.2)
N_BLOCKS = 200
HARVEST_ALPHA = 1e-6
SPLIT_LAMBDA = 1e-4
MIN_ZONE_SAMPLES = 100
LAMBDA_FLOOR = 1e-9  # a noise-free series would otherwise give lambda = 0
# baseline span for calibration, in windows; a W-sample minimum sits ~mean/W
# above the true baseline, biasing lambda low
BASELINE_SPAN = 4


@dataclass
class DelayTrace:
    """Per-exchange delay series derived from timestamp 4-tuples (seconds).

    ``d_up`` and ``d_down`` carry the client clock error (d_up - E, d_down + E);
    ``rtt`` includes the server-internal delay.  ``valid`` combines the
    stratum-1 flag with any external exclusion flag.
    """

    d_up: np.ndarray
    d_down: np.ndarray
    rtt: np.ndarray
    d_internal: np.ndarray
    t: np.ndarray
    stratum_ok: np.ndarray
    flag_ok: np.ndarray
    truth: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        names = ("d_up", "d_down", "rtt", "d_internal", "t", "stratum_ok", "flag_ok")
        n = len(self.d_up)
        for name in names:
            v = np.asarray(getattr(self, name))
            if v.shape != (n,):
                raise ValueError(f"{name} has shape {v.shape}, expected ({n},)")
            setattr(self, name, v)

    @classmethod
    def from_timestamps(cls, t_a, t_si, t_so, t_f, stratum=None, valid=None) -> "DelayTrace":
        t_a, t_si, t_so, t_f = (np.asarray(v, dtype=float) for v in (t_a, t_si, t_so, t_f))
        n = len(t_a)
        stratum_ok = np.ones(n, bool) if stratum is None else np.asarray(stratum) == 1
        flag_ok = np.ones(n, bool) if valid is None else np.asarray(valid, dtype=bool)
        return cls(t_si - t_a, t_f - t_so, t_f - t_a, t_so - t_si, t_a, stratum_ok, flag_ok)

    def __len__(self):
        return len(self.d_up)

    @property
    def valid(self):
        return self.stratum_ok & self.flag_ok


@dataclass(frozen=True)
class ClearZone:
    start: int
    end: int  # exclusive
    count: int  # valid samples inside

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad zone [{self.start}, {self.end})")


@dataclass(frozen=True)
class LsdConfig:
    alpha: float
    lam: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")


@dataclass
class LsdResult:
    shifts: list  # shift position per detection (first sample of the new level)
    runs: list  # (first, last) flagged positions per detection, inclusive
    window: int
    short: bool = False


def window_size(alpha: float, p: float) -> int:
    if p >= 1:
        return 1
    if p <= 0:
        raise ValueError("threshold probability must be > 0")
    return max(1, math.ceil(math.log(alpha) / math.log1p(-p)))


def _forward_min(x, w):
    """out[i] = min(x[i:i+w]) (tail entries use fewer samples)."""
    return minimum_filter1d(x, w, mode="nearest", origin=-(w // 2))


def _baseline_min(x, w):
    """Running-minimum baseline used to calibrate thresholds."""
    return minimum_filter1d(x, min(BASELINE_SPAN * w, len(x)), mode="nearest")


def threshold_prob(x, lam: float, alpha: float, iters: int = 20) -> tuple[float, int]:
    """Calibrate p(lambda) against a running windowed minimum of size W(p).

    Fixed-point iteration: W depends on p and the baseline estimate depends on W.
    """
    x = np.asarray(x, dtype=float)
    p = max(np.mean(x - x.min() < lam), 1.0 / len(x))
    w = window_size(alpha, p)
    for _ in range(iters):
        base = _baseline_min(x, w)
        p_new = max(float(np.mean(x - base < lam)), 1.0 / len(x))
        w_new = window_size(alpha, p_new)
        if w_new == w:
            return p_new, w
        p, w = p_new, w_new
    return p, w


def lambda_for_prob(x, p: float, alpha: float) -> tuple[float, int]:
    """Threshold whose empirical probability is ``p`` above the running minimum."""
    x = np.asarray(x, dtype=float)
    w = window_size(alpha, p)
    base = _baseline_min(x, w)
    lam = float(np.quantile(x - base, p))
    return max(lam, LAMBDA_FLOOR), w


def _detect(x, w: int, lam: float, lo: int, hi: int):
    """Runs of flagged positions i in [max(lo, w), min(hi, n-w)]."""
    n = len(x)
    fwd = _forward_min(x, w)
    first, last = max(lo, w), min(hi, n - w)
    if first > last:
        return [], []
    pos = np.arange(first, last + 1)
    diff = fwd[pos] - fwd[pos - w]
    flag = np.abs(diff) > lam
    if not flag.any():
        return [], []
    idx = pos[flag]
    d = diff[flag]
    # merge flagged positions closer than a window into one detection
    breaks = np.flatnonzero(np.diff(idx) >= w) + 1
    shifts, runs = [], []
    for seg_i in np.split(idx, breaks):
        a, b = int(seg_i[0]), int(seg_i[-1])
        # a clean up-shift flags [s, s+W-1], a down-shift [s-W+1, s]; noise can extend a run either way
        shifts.append(_locate(x, max(0, a - w), min(n, b + w)))
        runs.append((a, b))
    return shifts, runs


def _locate(x, lo: int, hi: int) -> int:
    """Most likely single baseline step in x[lo:hi] under x = b(i) + q, q >= 0 exponential.

    The profile log-likelihood of a step at c is, up to constants,
    (c - lo) * min(x[lo:c]) + (hi - c) * min(x[c:hi]).
    """
    seg = x[lo:hi]
    m = len(seg)
    if m < 2:
        return lo
    pre = np.minimum.accumulate(seg)[:-1]  # min(seg[:k]) for k = 1..m-1
    suf = np.minimum.accumulate(seg[::-1])[::-1][1:]  # min(seg[k:]) for k = 1..m-1
    k = np.arange(1, m)
    return lo + int(k[np.argmax(k * pre + (m - k) * suf)])


def lsd(series, cfg: LsdConfig, p: float | None = None) -> LsdResult:
    """Level shifts larger than ``cfg.lam`` in ``series``.

    ``p`` fixes the threshold probability; by default it is calibrated from
    the series.  Series shorter than two windows return no shifts and
    ``short=True``.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return LsdResult([], [], 1, short=True)
    if p is None:
        p, w = threshold_prob(x, cfg.lam, cfg.alpha)
    else:
        w = window_size(cfg.alpha, p)
    if len(x) < 2 * w:
        return LsdResult([], [], w, short=True)
    shifts, runs = _detect(x, w, cfg.lam, 0, len(x))
    return LsdResult(shifts, runs, w)


def _czd_series(x, alpha, core: slice, probs) -> tuple[bool, bool]:
    """(clean, all_short) for one series; ``x`` may include padding around ``core``."""
    inner = x[core]
    all_short = True
    for p in probs:
        lam, w = lambda_for_prob(inner, p, alpha) if len(inner) else (LAMBDA_FLOOR, 1)
        if len(inner) < 2 * w:
            continue
        all_short = False
        shifts, _ = _detect(x, w, lam, core.start + 1, core.stop - 1)
        if shifts:
            return False, False
    return True, all_short


def czd(block: DelayTrace, alpha: float, probs: Sequence[float] = CZD_PROBS, core: slice | None = None) -> bool:
    """True iff no level shift is found in d_up nor d_down for any of ``probs``.

    ``core`` marks the block inside a padded slice: thresholds are calibrated
    on the core and only shift positions inside it are considered.  A block too
    short for every window is not a clear zone.
    """
    n = len(block)
    if n == 0:
        raise ValueError("empty block")
    core = core or slice(0, n)
    verdicts = [_czd_series(s, alpha, core, probs) for s in (block.d_up, block.d_down)]
    if any(not clean for clean, _ in verdicts):
        return False
    return not all(short for _, short in verdicts)


def _slice(trace: DelayTrace, lo: int, hi: int) -> DelayTrace:
    return DelayTrace(trace.d_up[lo:hi], trace.d_down[lo:hi], trace.rtt[lo:hi], trace.d_internal[lo:hi],
                      trace.t[lo:hi], trace.stratum_ok[lo:hi], trace.flag_ok[lo:hi])


def _padded_czd(trace: DelayTrace, lo: int, hi: int, pad: int, alpha: float) -> bool:
    plo, phi = max(0, lo - pad), min(len(trace), hi + pad)
    return czd(_slice(trace, plo, phi), alpha, core=slice(lo - plo, hi - plo))


def _split_block(trace: DelayTrace, lo: int, hi: int, pad: int, alpha: float, lam: float):
    """Cut a failed block at the detection runs of either direction.

    Detection runs over the block plus ``pad`` neighbours on each side.  Returns
    ``(ctx_lo, ctx_hi, core_lo, core_hi)`` per surviving piece: the piece with
    its usable context, and its part inside the block.
    """
    plo, phi = max(0, lo - pad), min(len(trace), hi + pad)
    cfg = LsdConfig(alpha, lam)
    cuts = []
    for x in (trace.d_up[plo:phi], trace.d_down[plo:phi]):
        res = lsd(x, cfg)
        # the ambiguous stretch around each run is dropped entirely
        cuts += [(plo + a - res.window, plo + b + res.window) for a, b in res.runs]
    if not cuts:
        return []
    pieces, cur = [], plo
    for a, b in sorted(cuts):
        if a > cur:
            pieces.append((cur, a))
        cur = max(cur, b)
    if cur < phi:
        pieces.append((cur, phi))
    out = []
    for a, b in pieces:
        ca, cb = max(a, lo), min(b, hi)
        if cb > ca:
            out.append((a, b, ca, cb))
    return out


@dataclass(frozen=True)
class HarvestConfig:
    n_blocks: int = N_BLOCKS
    alpha: float = HARVEST_ALPHA
    split_lambda: float = SPLIT_LAMBDA
    min_samples: int = MIN_ZONE_SAMPLES


def harvest(trace: DelayTrace, cfg: HarvestConfig = HarvestConfig()) -> list[ClearZone]:
    """Clear zones of ``trace``: block screening, then splitting of failed blocks.

    Phase-1 blocks are tested with neighbouring samples as context so shifts
    close to a block edge are still seen.  Zones keep only valid samples in
    their count and need ``cfg.min_samples`` of them.
    """
    n = len(trace)
    if n < cfg.min_samples:
        return []
    edges = np.linspace(0, n, min(cfg.n_blocks, n) + 1).round().astype(int)
    pad = window_size(cfg.alpha, min(CZD_PROBS))
    candidates = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        if _padded_czd(trace, lo, hi, pad, cfg.alpha):
            candidates.append((lo, hi))
            continue
        for a, b, ca, cb in _split_block(trace, lo, hi, pad, cfg.alpha, cfg.split_lambda):
            if cb - ca >= cfg.min_samples and czd(_slice(trace, a, b), cfg.alpha, core=slice(ca - a, cb - a)):
                candidates.append((ca, cb))
    valid = trace.valid
    zones = []
    for lo, hi in candidates:
        count = int(valid[lo:hi].sum())
        if count >= cfg.min_samples:
            zones.append(ClearZone(int(lo), int(hi), count))
    return zones


def estimate_cz(trace: DelayTrace, zone: ClearZone) -> tuple[float, float, float]:
    """(r_hat, a_hat, T_hat) from the valid samples of ``zone``.

    a_hat carries the client clock error as -2E; it is exact only for an
    accurate client clock.
    """
    sel = slice(zone.start, zone.end)
    ok = trace.valid[sel]
    if not ok.any():
        raise ValueError(f"zone [{zone.start}, {zone.end}) has no valid samples")
    up, down = trace.d_up[sel][ok].min(), trace.d_down[sel][ok].min()
    r_hat = min(up + trace.d_internal[sel][ok].min() + down, trace.rtt[sel][ok].min())
    if r_hat <= 0:
        raise ValueError("non-positive minimum RTT estimate")
    a_hat = up - down
    return float(r_hat), float(a_hat), float(a_hat / r_hat)


@dataclass(frozen=True)
class TraceSpec:
    """Ground truth for :func:`synth_trace`. Shifts are (index, seconds) pairs."""

    n: int
    d_up_min: float = 5e-3
    d_down_min: float = 5e-3
    internal_delay: float = 0.0
    congestion_mean: float = 1e-3
    clock_error: float = 0.0
    shifts_up: tuple = ()
    shifts_down: tuple = ()
    period: float = 1.0


def _baseline(n, base, shifts):
    b = np.full(n, float(base))
    for idx, mag in shifts:
        if not 0 < idx < n:
            raise ValueError(f"shift index {idx} outside (0, {n})")
        b[idx:] += mag
    return b


def synth_trace(spec: TraceSpec, rng: np.random.Generator) -> DelayTrace:
    """Timestamp trace with level-shift schedules and iid exponential congestion."""
    n = spec.n
    b_up = _baseline(n, spec.d_up_min, spec.shifts_up)
    b_down = _baseline(n, spec.d_down_min, spec.shifts_down)
    if np.any(b_up <= 0) or np.any(b_down <= 0):
        raise ValueError("baselines must stay positive")
    if spec.congestion_mean > 0:
        q_up = rng.exponential(spec.congestion_mean, n)
        q_down = rng.exponential(spec.congestion_mean, n)
    else:
        q_up = q_down = np.zeros(n)
    t_true = np.arange(n) * spec.period
    t_a = t_true + spec.clock_error
    t_si = t_true + b_up + q_up
    t_so = t_si + spec.internal_delay
    t_f = t_so + b_down + q_down + spec.clock_error
    trace = DelayTrace.from_timestamps(t_a, t_si, t_so, t_f)
    trace.truth = {
        "baseline_up": b_up,
        "baseline_down": b_down,
        "shift_points": sorted({i for i, _ in spec.shifts_up} | {i for i, _ in spec.shifts_down}),
    }
    return trace


# --- CSV I/O ---------------------------------------------------------------

TRACE_COLUMNS = ("t_a", "t_si", "t_so", "t_f", "stratum", "valid_flag")
ZONE_COLUMNS = ("server", "start", "end", "count", "r_hat", "a_hat", "T_hat")


def read_traces(path) -> dict[str, DelayTrace]:
    """Traces per server from a CSV with columns ``TRACE_COLUMNS`` (+ optional ``server``).

    Malformed rows raise ``ValueError`` naming the 1-based file line.
    """
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        missing = [c for c in TRACE_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for line, row in enumerate(reader, start=2):
            try:
                vals = [float(row[c]) for c in TRACE_COLUMNS]
            except (TypeError, ValueError):
                raise ValueError(f"{path}: malformed row at line {line}") from None
            if not all(map(math.isfinite, vals)):
                raise ValueError(f"{path}: non-finite value at line {line}")
            rows.setdefault(row.get("server") or "0", []).append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    out = {}
    for server, vals in rows.items():
        a = np.array(vals)
        out[server] = DelayTrace.from_timestamps(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4], a[:, 5] != 0)
    return out


def write_trace(path, trace_by_server: dict[str, DelayTrace]) -> None:
    """Inverse of :func:`read_traces` (timestamps rebuilt relative to ``t``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("server",) + TRACE_COLUMNS)
        for server, tr in trace_by_server.items():
            t_si = tr.t + tr.d_up
            t_so = t_si + tr.d_internal
            t_f = t_so + tr.d_down
            for i in range(len(tr)):
                w.writerow((server, repr(float(tr.t[i])), repr(float(t_si[i])), repr(float(t_so[i])), repr(float(t_f[i])),
                            1 if tr.stratum_ok[i] else 2, int(tr.flag_ok[i])))


def catalog(traces: dict[str, DelayTrace], cfg: HarvestConfig = HarvestConfig()) -> list[dict]:
    out = []
    for server, tr in traces.items():
        for z in harvest(tr, cfg):
            r, a, t = estimate_cz(tr, z)
            out.append({"server": server, "start": z.start, "end": z.end, "count": z.count,
                        "r_hat": r, "a_hat": a, "T_hat": t})
    return out


def write_catalog(path, rows: list[dict]) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ZONE_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def read_catalog(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("r_hat", "a_hat") if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append({**row, "r_hat": float(row["r_hat"]), "a_hat": float(row["a_hat"])})
            except ValueError:
                raise ValueError(f"{path}: malformed row at line {line}") from None
    return out
