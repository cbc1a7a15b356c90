import numpy as np
import pytest

from asymclock import geo
from asymclock.boundest.sbbe import exchange_bounds
from asymclock.pathsim import ClockModel, ModelAsym, ServerModel, ZAsym, exchange, gen_path, gen_paths


def test_z_corner_cases():
    rng = np.random.default_rng(0)
    d_sol = np.full(1000, 2e-3)
    p = gen_paths(d_sol, ZAsym(1, 1), rng, f_range=(1.2, 1.2))
    assert np.allclose(np.abs(p.asym), p.r_min / 6, rtol=1e-12)
    p0 = gen_paths(d_sol, ZAsym(0, 0), rng)
    assert np.all(p0.asym == 0) and np.allclose(p0.d_up_min, p0.r_min / 2)


def test_invariants_any_draw():
    rng = np.random.default_rng(1)
    d_sol = rng.uniform(1e-5, 2e-2, 100_000)
    for src in (ModelAsym(), ZAsym(0, 1)):
        p = gen_paths(d_sol, src, rng)
        assert np.all(p.d_up_min >= d_sol) and np.all(p.d_down_min >= d_sol)
        assert np.allclose(p.r_min, p.d_up_min + p.d_down_min, rtol=1e-14)
        assert np.all((p.inflation >= 1.2) & (p.inflation <= 1.8))
        assert np.all(np.abs(p.t_rel) <= 1 - 1 / p.inflation + 1e-12)


def test_gen_path_scalar():
    c, s = geo.GeoPoint(40, -100), geo.GeoPoint(35, -90)
    p = gen_path(c, s, ModelAsym(), np.random.default_rng(2))
    assert p.d_sol == pytest.approx(geo.sol_delay(c, s))
    with pytest.raises(ValueError):
        gen_path(c, c, ModelAsym(), np.random.default_rng(2))


def test_exchange_examples():
    rng = np.random.default_rng(3)
    p = gen_paths(np.array([3e-3]), ZAsym(0.5, 0.5), rng)
    ex = exchange(ClockModel(0.0), p, 0.0, rng)
    assert ex.measured_forward == pytest.approx(p.d_up_min, abs=0)
    ex = exchange(ClockModel(3e-3), p, 0.0, rng)
    assert float(ex.measured_forward[0]) == pytest.approx(float(p.d_up_min[0]) - 3e-3, abs=1e-15)
    many = exchange(ClockModel(0.0), p.take(0), 1e-3, rng, size=100_000)
    q_up = many.measured_forward - p.d_up_min[0]
    assert np.all(q_up >= 0)
    assert q_up.mean() == pytest.approx(1e-3, rel=0.01)
    with pytest.raises(ValueError):
        ClockModel(0.02)
    with pytest.raises(ValueError):
        ServerModel(geo.GeoPoint(0, 0), internal_delay=-1)


def test_internal_delay_excluded_from_rtt():
    rng = np.random.default_rng(4)
    p = gen_paths(np.array([3e-3]), ZAsym(0, 1), rng)
    ex = exchange(ClockModel(1e-3), p, 0.0, rng, internal_delay=2e-3)
    assert float(ex.rtt[0]) == pytest.approx(float(p.r_min[0]), abs=1e-15)


def test_per_exchange_interval_contains_offset():
    rng = np.random.default_rng(5)
    n = 100_000
    d_sol = rng.uniform(1e-5, 2e-2, n)
    p = gen_paths(d_sol, ModelAsym(), rng)
    off = rng.uniform(-0.01, 0.01, n)
    for mu in (0.0, 1e-3, 50e-3):
        ex = exchange(off, p, mu, rng)
        lo, hi = exchange_bounds(ex, d_sol, d_sol)
        assert np.all((lo <= off + 1e-15) & (off <= hi + 1e-15))
