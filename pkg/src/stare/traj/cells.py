"""Hierarchical quadtree cells over an equirectangular lat/lon grid.

A cell at zoom ``z`` splits longitude into ``2**z`` columns and latitude into
``2**z`` rows. The cell index interleaves the column and row bits (Morton
order) so the parent of any cell is ``index >> 2``. Intervals are half-open
except at the north pole and the antimeridian, which fold into the last
row/column so that every valid coordinate lands in exactly one cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geo import EARTH_RADIUS_M

MAX_ZOOM = 30


class CellDomainError(ValueError):
    """Raised for coordinates or zoom levels outside the cell grid."""


@dataclass(frozen=True, order=True)
class CellId:
    zoom: int
    index: int

    def parent(self, zoom: int | None = None) -> "CellId":
        zoom = self.zoom - 1 if zoom is None else zoom
        if not 0 <= zoom <= self.zoom:
            raise CellDomainError(f"cannot take zoom-{zoom} parent of zoom-{self.zoom} cell")
        return CellId(zoom, self.index >> (2 * (self.zoom - zoom)))

    def contains(self, other: "CellId") -> bool:
        return other.zoom >= self.zoom and other.parent(self.zoom) == self

    def bounds(self) -> tuple[float, float, float, float]:
        """(lat_min, lat_max, lon_min, lon_max) in degrees."""
        col, row = _deinterleave(self.index)
        n = 1 << self.zoom
        lon_min = col / n * 360.0 - 180.0
        lat_min = row / n * 180.0 - 90.0
        return lat_min, lat_min + 180.0 / n, lon_min, lon_min + 360.0 / n

    def center(self) -> tuple[float, float]:
        lat0, lat1, lon0, lon1 = self.bounds()
        return (lat0 + lat1) / 2, (lon0 + lon1) / 2


def _spread(v: int) -> int:
    out = 0
    bit = 0
    while v:
        out |= (v & 1) << (2 * bit)
        v >>= 1
        bit += 1
    return out


def _interleave(col: int, row: int) -> int:
    return _spread(col) | (_spread(row) << 1)


def _deinterleave(index: int) -> tuple[int, int]:
    col = row = 0
    bit = 0
    while index:
        col |= (index & 1) << bit
        row |= ((index >> 1) & 1) << bit
        index >>= 2
        bit += 1
    return col, row


def map_cell(lat: float, lon: float, zoom: int) -> CellId:
    """Return the zoom-``zoom`` cell containing (lat, lon)."""
    if not 0 <= zoom <= MAX_ZOOM:
        raise CellDomainError(f"zoom must be in [0, {MAX_ZOOM}], got {zoom}")
    lat = float(lat)
    lon = float(lon)
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise CellDomainError(f"coordinate out of range: lat={lat}, lon={lon}")
    n = 1 << zoom
    col = min(int((lon + 180.0) / 360.0 * n), n - 1)
    row = min(int((lat + 90.0) / 180.0 * n), n - 1)
    return CellId(zoom, _interleave(col, row))


def cell_edge_m(zoom: int, lat: float = 0.0) -> tuple[float, float]:
    """Approximate (east-west, north-south) cell edge lengths in meters at ``lat``."""
    n = 1 << zoom
    ns = math.pi * EARTH_RADIUS_M / n
    ew = 2 * math.pi * EARTH_RADIUS_M * math.cos(math.radians(lat)) / n
    return ew, ns
