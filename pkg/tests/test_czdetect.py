import numpy as np
import pytest

from asymclock import czdetect as cz
from asymclock.czdetect import (ClearZone, DelayTrace, HarvestConfig, LsdConfig, TraceSpec, czd, estimate_cz,
                                harvest, lsd, synth_trace, window_size)

# frozen from tests/oracles/min_exp_oracle.py: mu=1 ms, n=1e4 -> |a_hat - a| two-sided 1e-6 bound
MIN_EXP_BOUND = 1.3815510557964272e-06


def test_window_size():
    assert window_size(1e-6, 0.02) == 684
    for alpha, p in ((1e-3, 0.05), (1e-4, 0.2), (1e-6, 0.5)):
        w = window_size(alpha, p)
        assert (1 - p) ** w <= alpha < (1 - p) ** (w - 1)
    assert window_size(0.1, 1.0) == 1
    with pytest.raises(ValueError):
        window_size(0.1, 0.0)


def test_lsd_constant_and_step():
    assert lsd(np.full(5000, 3e-3), LsdConfig(1e-4, 1e-4)).shifts == []
    rng = np.random.default_rng(0)
    lam = 1e-4
    x = 5e-3 + rng.exponential(1e-3, 4000)
    x[2000:] += 10 * lam
    res = lsd(x, LsdConfig(1e-4, lam))
    assert len(res.shifts) == 1
    assert abs(res.shifts[0] - 2000) <= res.window
    y = 5e-3 + rng.exponential(1e-3, 4000)
    y[2000:] -= 10 * lam
    res = lsd(y, LsdConfig(1e-4, lam))
    assert len(res.shifts) == 1 and abs(res.shifts[0] - 2000) <= res.window
    assert lsd(x[:10], LsdConfig(1e-4, lam)).short


def test_lsd_false_rate_small():
    rng = np.random.default_rng(1)
    alpha = 1e-4
    hits = sum(bool(lsd(5e-3 + rng.exponential(1e-3, 2000), LsdConfig(alpha, 1e-4)).shifts) for _ in range(500))
    assert hits / 500 <= 0.05


def _trace(n=4000, seed=0, **kw):
    return synth_trace(TraceSpec(n=n, **kw), np.random.default_rng(seed))


def test_czd_examples():
    assert czd(_trace(), 1e-6)
    assert not czd(_trace(shifts_up=((2000, 10e-3),)), 1e-6)
    assert czd(_trace(congestion_mean=0.0), 1e-6)
    assert not czd(_trace(n=50), 1e-6)  # too short for every window
    with pytest.raises(ValueError):
        czd(cz._slice(_trace(), 0, 0), 1e-6)


def test_synth_trace():
    t = _trace(n=1000, congestion_mean=0.0, clock_error=2e-3)
    # constant up to rounding of the absolute timestamps
    assert np.ptp(t.d_up) <= 1e-12 and np.ptp(t.d_down) <= 1e-12
    t = _trace(n=10_000, congestion_mean=0.0, shifts_up=((5000, 5e-3),))
    assert t.truth["baseline_up"][5000] - t.truth["baseline_up"][4999] == pytest.approx(5e-3, abs=1e-15)
    assert t.d_up[5000] - t.d_up[4999] == pytest.approx(5e-3, abs=1e-12)
    a, b = _trace(seed=9), _trace(seed=9)
    assert np.array_equal(a.d_up, b.d_up) and np.array_equal(a.rtt, b.rtt)
    with pytest.raises(ValueError):
        _trace(shifts_up=((0, 1e-3),))


def test_harvest_shift_free_coverage():
    t = _trace(n=200_000, seed=2)
    zones = harvest(t)
    covered = sum(z.end - z.start for z in zones)
    assert covered / len(t) >= 0.95
    assert harvest(_trace(n=99)) == []


def test_harvest_excludes_shift_points_and_is_clean():
    rng = np.random.default_rng(3)
    n = 60_000
    pts = np.sort(rng.choice(np.arange(1000, n - 1000), 10, replace=False))
    shifts = tuple((int(i), float(rng.choice([-1, 1]) * rng.uniform(2e-3, 10e-3))) for i in pts)
    t = synth_trace(TraceSpec(n=n, d_up_min=20e-3, d_down_min=20e-3, shifts_up=shifts[::2], shifts_down=shifts[1::2]),
                    rng)
    zones = harvest(t)
    assert zones
    for z in zones:
        assert not any(z.start < s < z.end for s in t.truth["shift_points"])
        assert czd(cz._slice(t, z.start, z.end), HarvestConfig().alpha)
    for a, b in zip(zones, zones[1:]):
        assert a.end <= b.start


def test_harvest_counts_only_valid():
    t = _trace(n=20_000, seed=4)
    t.flag_ok[:500] = False
    zones = harvest(t)
    assert sum(z.count for z in zones) <= int(t.valid.sum())
    assert sum(z.count for z in zones) == sum(int(t.valid[z.start:z.end].sum()) for z in zones)


def test_estimate_cz_exact_without_congestion():
    t = _trace(n=1000, d_up_min=7e-3, d_down_min=3e-3, congestion_mean=0.0, internal_delay=1e-4)
    r, a, T = estimate_cz(t, ClearZone(0, 1000, 1000))
    # exact up to rounding of the absolute timestamps (t up to 1e3 s)
    assert r == pytest.approx(10e-3 + 1e-4, abs=1e-12) and a == pytest.approx(4e-3, abs=1e-12)
    assert T == pytest.approx(a / r)
    # a client clock error E shifts a_hat by -2E
    t = _trace(n=1000, d_up_min=7e-3, d_down_min=3e-3, congestion_mean=0.0, clock_error=1e-3)
    r, a, _ = estimate_cz(t, ClearZone(0, 1000, 1000))
    assert r == pytest.approx(10e-3, abs=1e-12) and a == pytest.approx(4e-3 - 2e-3, abs=1e-12)


def test_estimate_cz_order_statistics_oracle():
    errs = []
    for seed in range(100):
        t = _trace(n=10_000, seed=seed, d_up_min=6e-3, d_down_min=4e-3)
        _, a, _ = estimate_cz(t, ClearZone(0, 10_000, 10_000))
        errs.append(a - 2e-3)
    errs = np.array(errs)
    assert np.all(np.abs(errs) <= MIN_EXP_BOUND)
    # symmetric error: Laplace with scale mu/n = 1e-7, sd of the mean ~ 1.4e-8
    assert abs(errs.mean()) < 5e-8


def test_trace_csv_round_trip(tmp_path):
    t = _trace(n=500, seed=5)
    t.flag_ok[10] = False
    p = tmp_path / "trace.csv"
    cz.write_trace(p, {"s1": t})
    back = cz.read_traces(p)["s1"]
    assert np.allclose(back.d_up, t.d_up, atol=1e-12) and not back.valid[10]
    bad = tmp_path / "bad.csv"
    bad.write_text("t_a,t_si,t_so,t_f,stratum,valid_flag\n0,1,1,2,1,1\n0,x,1,2,1,1\n")
    with pytest.raises(ValueError, match="line 3"):
        cz.read_traces(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError):
        cz.read_traces(empty)


def test_stratum_filter():
    t = DelayTrace.from_timestamps([0, 1], [0.1, 1.1], [0.1, 1.1], [0.2, 1.2], stratum=[1, 2], valid=[1, 1])
    assert list(t.valid) == [True, False]
