"""Synthetic city: a jittered road grid plus home/work/food/gym locations."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from ..traj.geo import from_local_xy

CATEGORIES = ("home", "work", "food", "gym")
MAX_SNAP_M = 500.0


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Independent generator for (seed, keys); stable across runs and processes."""
    spawn_key = tuple(zlib.crc32(str(k).encode()) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key))


@dataclass(frozen=True)
class Location:
    index: int
    category: str
    x: float
    y: float
    lat: float
    lon: float
    node: int
    snap_m: float
    cluster: int = -1


@dataclass
class SimWorld:
    origin: tuple[float, float]
    locations: list[Location]
    graph: nx.Graph
    home_clusters: list[list[int]]
    _paths: dict = field(default_factory=dict, repr=False)

    def by_category(self, category: str) -> list[int]:
        return [loc.index for loc in self.locations if loc.category == category]

    def node_xy(self, node: int) -> tuple[float, float]:
        d = self.graph.nodes[node]
        return d["x"], d["y"]

    def route(self, a: int, b: int) -> np.ndarray:
        """Shortest road polyline (k x 2, meters) from location ``a`` to location ``b``."""
        key = (a, b)
        if key not in self._paths:
            if (b, a) in self._paths:
                self._paths[key] = self._paths[(b, a)][::-1].copy()
            else:
                nodes = nx.shortest_path(self.graph, self.locations[a].node, self.locations[b].node,
                                         weight="weight")
                self._paths[key] = np.array([self.node_xy(n) for n in nodes], dtype=float)
        return self._paths[key]

    def route_length(self, a: int, b: int) -> float:
        p = self.route(a, b)
        return float(np.hypot(*np.diff(p, axis=0).T).sum())

    def to_latlon(self, x, y):
        return from_local_xy(x, y, *self.origin)


def _counts(n_locations) -> dict[str, int]:
    if isinstance(n_locations, int):
        return {c: n_locations for c in CATEGORIES}
    counts = {c: int(n_locations.get(c, 0)) for c in CATEGORIES}
    return counts


def build_world(
    n_locations=1,
    extent_km: float = 10.0,
    seed: int = 0,
    *,
    n_home_clusters: int = 1,
    home_cluster_radius_m: float = 300.0,
    grid_spacing_m: float = 500.0,
    jitter_frac: float = 0.15,
    origin: tuple[float, float] = (38.9, -77.1),
) -> SimWorld:
    """Build a connected road grid and place locations on it.

    ``n_locations`` is either one count for every category or a mapping from
    category to count. Work, food and gym places cluster around the center;
    homes are spread over ``n_home_clusters`` neighbourhoods away from it.
    """
    counts = _counts(n_locations)
    if min(counts.values()) <= 0:
        raise ValueError(f"every category needs at least one location, got {counts}")
    if n_home_clusters < 1 or n_home_clusters > counts["home"]:
        raise ValueError(f"n_home_clusters must be in [1, {counts['home']}]")
    rng = rng_for(seed, "world")
    extent = extent_km * 1000.0

    n_side = int(np.floor(extent / grid_spacing_m)) + 1
    coords = (np.arange(n_side) * grid_spacing_m) - (n_side - 1) * grid_spacing_m / 2
    gx, gy = np.meshgrid(coords, coords, indexing="ij")
    jit = rng.uniform(-jitter_frac, jitter_frac, size=(2, n_side, n_side)) * grid_spacing_m
    gx = gx + jit[0]
    gy = gy + jit[1]

    g = nx.Graph()
    node_id = np.arange(n_side * n_side).reshape(n_side, n_side)
    for i in range(n_side):
        for j in range(n_side):
            g.add_node(int(node_id[i, j]), x=float(gx[i, j]), y=float(gy[i, j]))
    for i in range(n_side):
        for j in range(n_side):
            for di, dj in ((1, 0), (0, 1)):
                a, b = i + di, j + dj
                if a < n_side and b < n_side:
                    w = float(np.hypot(gx[i, j] - gx[a, b], gy[i, j] - gy[a, b]))
                    g.add_edge(int(node_id[i, j]), int(node_id[a, b]), weight=w)
    grid_xy = np.column_stack([gx.ravel(), gy.ravel()])
    lim = coords[-1]  # keep every location inside the grid footprint

    # place locations (meters relative to the center)
    placed: list[tuple[str, float, float, int]] = []
    spread = extent / 8
    for cat in ("work", "food", "gym"):
        pts = np.clip(rng.normal(0.0, spread, size=(counts[cat], 2)), -lim, lim)
        placed.extend((cat, float(px), float(py), -1) for px, py in pts)
    angles = (np.arange(n_home_clusters) + rng.uniform(0, 1, n_home_clusters)) * 2 * np.pi / n_home_clusters
    radii = rng.uniform(0.18, 0.42, n_home_clusters) * extent
    centers = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    cluster_of = np.arange(counts["home"]) % n_home_clusters
    for c in cluster_of:
        px, py = np.clip(centers[c] + rng.normal(0.0, home_cluster_radius_m, 2), -lim, lim)
        placed.append(("home", float(px), float(py), int(c)))

    locations = []
    home_clusters: list[list[int]] = [[] for _ in range(n_home_clusters)]
    base = n_side * n_side
    lat0, lon0 = origin
    for idx, (cat, px, py, cl) in enumerate(placed):
        d = np.hypot(grid_xy[:, 0] - px, grid_xy[:, 1] - py)
        nearest = int(np.argmin(d))
        node = base + idx
        g.add_node(node, x=px, y=py, location=idx)
        g.add_edge(node, nearest, weight=float(d[nearest]))
        lat, lon = from_local_xy(px, py, lat0, lon0)
        locations.append(Location(idx, cat, px, py, float(lat), float(lon), node, float(d[nearest]), cl))
        if cat == "home":
            home_clusters[cl].append(idx)
    return SimWorld(origin=origin, locations=locations, graph=g, home_clusters=home_clusters)
