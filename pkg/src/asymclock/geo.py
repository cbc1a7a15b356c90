"""Spherical geometry and speed-of-light delay bounds.

The scalar API works on :class:`GeoPoint`; the ``*_arr`` functions are the
numpy kernels behind it and accept broadcastable arrays of degrees, which is
what the simulation uses for thousands of (client, server) pairs at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
C_KM_S = 299792.458
FIBRE_SPEED_KM_S = 2.0 / 3.0 * C_KM_S

# lat [25, 49], lon [-124, -67]
MAINLAND_US = (25.0, 49.0, -124.0, -67.0)


def _wrap_lon(lon):
    return (np.asarray(lon, dtype=float) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not np.isfinite(self.lon):
            raise ValueError(f"longitude not finite: {self.lon}")
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(_wrap_lon(self.lon)))


@dataclass(frozen=True)
class Region:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not self.lat_min < self.lat_max:
            raise ValueError("lat_min must be < lat_max")
        if not self.lon_min < self.lon_max:
            raise ValueError("lon_min must be < lon_max")
        if self.lat_min < -90 or self.lat_max > 90:
            raise ValueError("latitude bounds outside [-90, 90]")

    @classmethod
    def mainland_us(cls) -> "Region":
        return cls(*MAINLAND_US)

    def contains(self, p: GeoPoint) -> bool:
        return self.lat_min <= p.lat <= self.lat_max and self.lon_min <= p.lon <= self.lon_max


# -- array kernels -----------------------------------------------------------


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km between arrays of points (degrees)."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2, dtype=float) - lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def bearing_deg(lat1, lon1, lat2, lon2):
    """Initial bearing (degrees clockwise from north) from point 1 to point 2."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dlmb = np.radians(np.asarray(lon2, dtype=float) - lon1)
    y = np.sin(dlmb) * np.cos(phi2)
    x = np.cos(phi1) * np.sin(phi2) - np.sin(phi1) * np.cos(phi2) * np.cos(dlmb)
    return np.degrees(np.arctan2(y, x)) % 360.0


def destination_arr(lat, lon, bearing, distance_km):
    """Forward geodesic on the sphere: returns (lat, lon) arrays in degrees."""
    phi1 = np.radians(lat)
    lmb1 = np.radians(lon)
    theta = np.radians(bearing)
    delta = np.asarray(distance_km, dtype=float) / EARTH_RADIUS_KM
    sin_phi2 = np.sin(phi1) * np.cos(delta) + np.cos(phi1) * np.sin(delta) * np.cos(theta)
    phi2 = np.arcsin(np.clip(sin_phi2, -1.0, 1.0))
    lmb2 = lmb1 + np.arctan2(
        np.sin(theta) * np.sin(delta) * np.cos(phi1),
        np.cos(delta) - np.sin(phi1) * sin_phi2,
    )
    return np.degrees(phi2), _wrap_lon(np.degrees(lmb2))


def interpolate_arr(lat1, lon1, lat2, lon2, frac):
    """Points at fraction ``frac`` along the great circle from 1 to 2."""
    phi1, lmb1 = np.radians(lat1), np.radians(lon1)
    phi2, lmb2 = np.radians(lat2), np.radians(lon2)
    a = np.stack([np.cos(phi1) * np.cos(lmb1), np.cos(phi1) * np.sin(lmb1), np.sin(phi1)], -1)
    b = np.stack([np.cos(phi2) * np.cos(lmb2), np.cos(phi2) * np.sin(lmb2), np.sin(phi2)], -1)
    omega = np.arccos(np.clip(np.sum(a * b, -1), -1.0, 1.0))
    frac = np.asarray(frac, dtype=float)
    so = np.sin(omega)
    safe = so > 1e-15
    so = np.where(safe, so, 1.0)
    wa = np.where(safe, np.sin((1 - frac) * omega) / so, 1 - frac)
    wb = np.where(safe, np.sin(frac * omega) / so, frac)
    v = wa[..., None] * a + wb[..., None] * b
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return np.degrees(np.arcsin(np.clip(v[..., 2], -1, 1))), np.degrees(np.arctan2(v[..., 1], v[..., 0]))


def km_to_delay(km):
    return np.asarray(km, dtype=float) / FIBRE_SPEED_KM_S


def delay_to_km(seconds):
    return np.asarray(seconds, dtype=float) * FIBRE_SPEED_KM_S


# -- scalar API --------------------------------------------------------------


def great_circle_km(p1: GeoPoint, p2: GeoPoint) -> float:
    """Haversine distance on a sphere of radius 6371 km."""
    return float(haversine_km(p1.lat, p1.lon, p2.lat, p2.lon))


def sol_delay(p1: GeoPoint, p2: GeoPoint) -> float:
    """One-way speed-of-light-in-fibre delay bound (2c/3) in seconds."""
    return float(km_to_delay(great_circle_km(p1, p2)))


def displace(p: GeoPoint, bearing: float, distance: float) -> GeoPoint:
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance == 0:
        return p
    lat, lon = destination_arr(p.lat, p.lon, bearing, distance)
    return GeoPoint(float(lat), float(lon))


def sample_region(region: Region, rng: np.random.Generator, size: int | None = None):
    """Uniform in (lat, lon) coordinates, not area-uniform.

    Returns a GeoPoint when ``size`` is None, else ``(lat, lon)`` arrays.
    """
    lat = rng.uniform(region.lat_min, region.lat_max, size)
    lon = rng.uniform(region.lon_min, region.lon_max, size)
    if size is None:
        return GeoPoint(float(lat), float(lon))
    return lat, lon
