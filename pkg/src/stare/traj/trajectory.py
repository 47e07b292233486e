from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

DAY_SECONDS = 86_400


class RawPoint(NamedTuple):
    lat: float
    lon: float
    t: int


@dataclass
class RawTrajectory:
    """Time-ordered GPS fixes of one agent, stored column-wise.

    ``window`` is the index of the time window the trajectory was cut from,
    or ``None`` for an unpartitioned trajectory.
    """

    agent_id: str
    lat: np.ndarray
    lon: np.ndarray
    t: np.ndarray
    window: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.int64)
        if not (self.lat.shape == self.lon.shape == self.t.shape) or self.t.ndim != 1:
            raise ValueError(
                f"lat/lon/t must be equal-length 1-D arrays, got "
                f"{self.lat.shape}, {self.lon.shape}, {self.t.shape}"
            )

    @classmethod
    def from_points(cls, agent_id: str, points, **kw) -> "RawTrajectory":
        pts = list(points)
        if not pts:
            return cls(agent_id, np.empty(0), np.empty(0), np.empty(0, dtype=np.int64), **kw)
        lat, lon, t = zip(*pts)
        return cls(agent_id, np.array(lat), np.array(lon), np.array(t), **kw)

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def points(self) -> Iterator[RawPoint]:
        for la, lo, tt in zip(self.lat.tolist(), self.lon.tolist(), self.t.tolist()):
            yield RawPoint(la, lo, tt)

    def sorted(self) -> "RawTrajectory":
        """Return a copy sorted by time with duplicate timestamps dropped (first kept)."""
        order = np.argsort(self.t, kind="stable")
        t = self.t[order]
        keep = np.ones(t.size, dtype=bool)
        keep[1:] = t[1:] != t[:-1]
        order = order[keep]
        return RawTrajectory(self.agent_id, self.lat[order], self.lon[order], self.t[order],
                             self.window, dict(self.meta))

    def is_valid(self) -> bool:
        return bool(
            np.all(np.abs(self.lat) <= 90)
            and np.all(np.abs(self.lon) <= 180)
            and np.all(np.diff(self.t) > 0)
        )


def partition_windows(
    traj: RawTrajectory, window: int = DAY_SECONDS, timezone_offset: int = 0
) -> list[RawTrajectory]:
    """Split a trajectory into fixed wall-clock windows.

    Window ``k`` holds the points with ``k*window <= t + timezone_offset < (k+1)*window``.
    Empty windows are omitted; the returned pieces carry their window index.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if len(traj) == 0:
        return []
    keys = (traj.t + int(timezone_offset)) // int(window)
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    starts = np.flatnonzero(np.r_[True, keys_sorted[1:] != keys_sorted[:-1]])
    ends = np.r_[starts[1:], keys_sorted.size]
    out = []
    for s, e in zip(starts, ends):
        idx = order[s:e]
        out.append(
            RawTrajectory(traj.agent_id, traj.lat[idx], traj.lon[idx], traj.t[idx],
                          window=int(keys_sorted[s]), meta=dict(traj.meta))
        )
    return out
