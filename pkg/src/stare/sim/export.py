from __future__ import annotations

from pathlib import Path

from ..traj.io import write_csv, write_json
from .simulate import Simulation

TRAJECTORY_FILE = "trajectories.csv"
LABELS_FILE = "labels.json"
TRUTH_FILE = "truth.json"


def export_dataset(sim: Simulation, out_dir) -> dict[str, Path]:
    """Write the ingestion CSV, the agent->subpopulation labels and the ground truth."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / TRAJECTORY_FILE, "labels": out / LABELS_FILE, "truth": out / TRUTH_FILE}
    write_csv(sim.trajectories, paths["csv"])
    write_json(sim.labels, paths["labels"])
    write_json(
        {
            "config": sim.config.to_dict(),
            "origin": list(sim.world.origin),
            "locations": [
                {"index": loc.index, "category": loc.category, "lat": loc.lat, "lon": loc.lon,
                 "cluster": loc.cluster}
                for loc in sim.world.locations
            ],
            "agents": [a.profile.to_dict() for a in sim.agents],
        },
        paths["truth"],
    )
    return paths
