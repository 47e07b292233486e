from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace

# Mean dwell per category (seconds); the home value is the overnight stay before leaving.
DEFAULT_DWELL_MEANS = {"home": 8 * 3600.0, "work": 7 * 3600.0, "food": 3600.0, "gym": 1.5 * 3600.0}


@dataclass(frozen=True)
class SimConfig:
    n_subpops: int = 10
    n_agents: int = 37
    n_days: int = 28
    sample_interval: int = 60
    gps_noise_m: float = 10.0
    speed_mps: float = 11.0
    seed: int = 0
    extent_km: float = 12.0
    home_cluster_radius_m: float = 300.0
    homes_per_subpop: int | None = None
    works_per_subpop: int = 2
    n_food: int | None = None
    n_gym: int | None = None
    food_pool: int = 3
    gym_pool: int = 2
    foods_per_agent: int = 2
    gyms_per_agent: int = 1
    grouping: float = 0.5
    home_return_alpha: float = 3.0
    dwell_log_sd: float = 0.25
    agent_dwell_sd: float = 0.15
    start_epoch: int = 1_704_067_200  # 2024-01-01T00:00:00Z

    def __post_init__(self) -> None:
        for name in ("n_subpops", "n_agents", "n_days", "sample_interval", "speed_mps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.gps_noise_m < 0:
            raise ValueError("gps_noise_m must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.n_agents < self.n_subpops:
            raise ValueError("need at least one agent per subpopulation")
        if not 0.0 <= self.grouping <= 1.0:
            raise ValueError("grouping must lie in [0, 1]")

    # derived location counts
    @property
    def max_subpop_size(self) -> int:
        return math.ceil(self.n_agents / self.n_subpops)

    def location_counts(self) -> dict[str, int]:
        homes = self.homes_per_subpop or 2 * self.max_subpop_size
        return {
            "home": homes * self.n_subpops,
            "work": self.works_per_subpop * self.n_subpops,
            "food": self.n_food or max(8, 2 * self.n_subpops),
            "gym": self.n_gym or max(4, self.n_subpops),
        }

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown simulation config field(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


# Dataset sizes of the four simulated benchmarks (subpopulations, agents).
PRESETS = {
    "S": SimConfig(n_subpops=10, n_agents=37),
    "M": SimConfig(n_subpops=20, n_agents=348),
    "L": SimConfig(n_subpops=30, n_agents=1288, extent_km=20.0),
    # long-running: ~11k agents x 28 days of minute-level fixes
    "XL": SimConfig(n_subpops=50, n_agents=10909, extent_km=30.0),
}
