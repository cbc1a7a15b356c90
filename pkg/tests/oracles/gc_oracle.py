"""Standalone great-circle oracle (vector form, independent of haversine).

Run directly to print the frozen reference values used in test_geo.py.
"""
import math

R = 6371.0


def unit(lat, lon):
    la, lo = math.radians(lat), math.radians(lon)
    return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))


def gc_km(p, q):
    u, v = unit(*p), unit(*q)
    cross = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
    dot = sum(a * b for a, b in zip(u, v))
    return R * math.atan2(math.sqrt(sum(c * c for c in cross)), dot)


if __name__ == "__main__":
    print("nyc-la km", repr(gc_km((40.7, -74.0), (34.05, -118.25))))
    print("antipode km", repr(gc_km((0, 0), (0, 180))))
    print("1 deg lon equator km", repr(2 * math.pi * R / 360))
    print("1000 km delay s", repr(1000 / (2 / 3 * 299792.458)))
