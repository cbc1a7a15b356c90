import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymclock import geo

# frozen from tests/oracles/gc_oracle.py (vector-form great circle)
NYC_LA_KM = 3936.972473588116
ANTIPODE_KM = 20015.086796020572
DEG_LON_EQUATOR_KM = 111.19492664455873
DELAY_1000_KM = 0.005003461427972282

lats = st.floats(-89.9, 89.9)
lons = st.floats(-180.0, 180.0)


def test_distance_oracles():
    assert geo.great_circle_km(geo.GeoPoint(40.7, -74.0), geo.GeoPoint(34.05, -118.25)) == pytest.approx(NYC_LA_KM, abs=1e-6)
    assert geo.great_circle_km(geo.GeoPoint(0, 0), geo.GeoPoint(0, 180)) == pytest.approx(ANTIPODE_KM, abs=1e-6)
    p = geo.GeoPoint(12.5, 33.0)
    assert geo.great_circle_km(p, p) == 0.0


def test_sol_delay():
    p = geo.GeoPoint(0, 0)
    assert geo.sol_delay(p, p) == 0.0
    assert geo.sol_delay(p, geo.displace(p, 90, 1000.0)) == pytest.approx(DELAY_1000_KM, rel=1e-9)
    # 1 km at 2c/3 is 5.0 us
    assert geo.sol_delay(p, geo.displace(p, 0, 1.0)) * 1e6 == pytest.approx(5.0, abs=0.01)


def test_displace():
    p = geo.GeoPoint(0, 0)
    assert geo.displace(p, 123.0, 0) == p
    q = geo.displace(p, 90, DEG_LON_EQUATOR_KM)
    assert q.lat == pytest.approx(0, abs=1e-4) and q.lon == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        geo.displace(p, 0, -1)


@settings(max_examples=200, deadline=None)
@given(lats, lons, st.floats(0, 360), st.floats(0.001, 2000))
def test_displace_round_trip(lat, lon, brg, dist):
    p = geo.GeoPoint(lat, lon)
    q = geo.displace(p, brg, dist)
    assert geo.great_circle_km(p, q) == pytest.approx(dist, rel=1e-9, abs=1e-9)
    back = float(geo.bearing_deg(q.lat, q.lon, p.lat, p.lon))
    r = geo.displace(q, back, dist)
    assert geo.great_circle_km(p, r) < 1e-6


@settings(max_examples=200, deadline=None)
@given(lats, lons, lats, lons)
def test_haversine_symmetry_and_bounds(a, b, c, d):
    x = geo.haversine_km(a, b, c, d)
    assert x == pytest.approx(geo.haversine_km(c, d, a, b), abs=1e-9)
    assert 0 <= x <= math.pi * geo.EARTH_RADIUS_KM + 1e-9


def test_geopoint_validation():
    with pytest.raises(ValueError):
        geo.GeoPoint(91, 0)
    assert geo.GeoPoint(0, 190).lon == pytest.approx(-170)


def test_sample_region():
    region = geo.Region.mainland_us()
    lat, lon = geo.sample_region(region, np.random.default_rng(1), 100_000)
    assert np.all((lat >= 25) & (lat <= 49) & (lon >= -124) & (lon <= -67))
    for v, lo, hi in ((lat, 25, 49), (lon, -124, -67)):
        se = (hi - lo) / math.sqrt(12) / math.sqrt(v.size)
        assert abs(v.mean() - 0.5 * (lo + hi)) < 3 * se
    a = geo.sample_region(region, np.random.default_rng(7), 10)
    b = geo.sample_region(region, np.random.default_rng(7), 10)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    strip = geo.Region(10.0, 10.0 + 1e-9, 0, 1)
    p = geo.sample_region(strip, np.random.default_rng(0))
    assert strip.contains(p)
    with pytest.raises(ValueError):
        geo.Region(1, 1, 0, 1)


def test_interpolate_on_great_circle():
    lat, lon = geo.interpolate_arr(40.7, -74.0, 34.05, -118.25, np.array([0.0, 0.25, 1.0]))
    d = geo.haversine_km(40.7, -74.0, lat, lon)
    assert d == pytest.approx([0, 0.25 * NYC_LA_KM, NYC_LA_KM], abs=1e-6)
