"""Persistent-location (stay point) extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import CellId, map_cell
from .geo import from_local_xy, to_local_xy
from .trajectory import RawTrajectory

DEFAULT_STAY_RADIUS_M = 150.0
DEFAULT_MIN_STAY_S = 600
DEFAULT_ZOOM = 16


@dataclass(frozen=True)
class PersistentLocation:
    centroid_lat: float
    centroid_lon: float
    arrival_t: int
    departure_t: int
    cell_id: CellId
    n_points: int = 0

    @property
    def dwell(self) -> int:
        return self.departure_t - self.arrival_t


def _scan(x: np.ndarray, y: np.ndarray, t: np.ndarray, radius: float, min_dur: int):
    """Sliding-anchor scan; yields (start, stop) index ranges of accepted stays."""
    n = x.size
    xs = x.tolist()
    ys = y.tolist()
    ts = t.tolist()
    r2 = radius * radius
    i = 0
    while i < n - 1:
        sx, sy = xs[i], ys[i]
        k = 1
        j = i + 1
        while j < n:
            cx, cy = sx / k, sy / k
            dx, dy = xs[j] - cx, ys[j] - cy
            if dx * dx + dy * dy > r2:
                break
            sx += xs[j]
            sy += ys[j]
            k += 1
            j += 1
        # the centroid drifted while growing; trim until every member fits it
        while j - i > 1:
            seg_x = x[i:j]
            seg_y = y[i:j]
            cx, cy = seg_x.mean(), seg_y.mean()
            if np.max((seg_x - cx) ** 2 + (seg_y - cy) ** 2) <= r2:
                break
            j -= 1
        if j - i > 1 and ts[j - 1] - ts[i] >= min_dur:
            yield i, j
            i = j
        else:
            i += 1


def detect_stays(
    traj: RawTrajectory,
    stay_radius_m: float = DEFAULT_STAY_RADIUS_M,
    min_stay_duration: int = DEFAULT_MIN_STAY_S,
    zoom: int = DEFAULT_ZOOM,
) -> list[PersistentLocation]:
    """Extract persistent locations from a time-sorted trajectory.

    Consecutive stays that fall in the same cell and are separated by less
    than ``min_stay_duration`` are merged into one.
    """
    if len(traj) < 2:
        return []
    if np.any(np.diff(traj.t) <= 0):
        raise ValueError(f"trajectory of agent {traj.agent_id!r} is not strictly time-sorted")
    lat0 = float(traj.lat[0])
    lon0 = float(traj.lon[0])
    x, y = to_local_xy(traj.lat, traj.lon, lat0, lon0)

    groups: list[list[int]] = []  # [start, stop) per stay, merged in place
    cells: list[CellId] = []
    for s, e in _scan(x, y, traj.t, stay_radius_m, min_stay_duration):
        cx, cy = x[s:e].mean(), y[s:e].mean()
        clat, clon = from_local_xy(cx, cy, lat0, lon0)
        cell = map_cell(float(clat), float(clon), zoom)
        if groups and cells[-1] == cell and traj.t[s] - traj.t[groups[-1][-1] - 1] < min_stay_duration:
            groups[-1].extend((s, e))
            continue
        groups.append([s, e])
        cells.append(cell)

    out = []
    for spans, cell in zip(groups, cells):
        idx = np.concatenate([np.arange(a, b) for a, b in zip(spans[::2], spans[1::2])])
        clat, clon = from_local_xy(x[idx].mean(), y[idx].mean(), lat0, lon0)
        out.append(
            PersistentLocation(
                centroid_lat=float(clat),
                centroid_lon=float(clon),
                arrival_t=int(traj.t[spans[0]]),
                departure_t=int(traj.t[spans[-1] - 1]),
                cell_id=cell,
                n_points=int(idx.size),
            )
        )
    return out
