"""Small geodesy helpers shared by stay detection, the simulator and tests."""

from __future__ import annotations

import numpy as np

EARTH_RADIUS_M = 6_371_008.8


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters; accepts scalars or arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def to_local_xy(lat, lon, lat0: float, lon0: float):
    """Equirectangular projection to meters around (lat0, lon0)."""
    k = np.pi / 180 * EARTH_RADIUS_M
    x = (np.asarray(lon, dtype=float) - lon0) * k * np.cos(np.radians(lat0))
    y = (np.asarray(lat, dtype=float) - lat0) * k
    return x, y


def from_local_xy(x, y, lat0: float, lon0: float):
    k = np.pi / 180 * EARTH_RADIUS_M
    lat = lat0 + np.asarray(y, dtype=float) / k
    lon = lon0 + np.asarray(x, dtype=float) / (k * np.cos(np.radians(lat0)))
    return lat, lon
