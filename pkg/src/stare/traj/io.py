"""CSV ingestion and JSON-lines token dataset files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .trajectory import RawTrajectory
from .vocab import TokenSequence

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("agent_id", "lat", "lon", "timestamp")


class SchemaError(ValueError):
    pass


@dataclass
class IngestReport:
    n_rows: int
    n_skipped: int
    n_duplicates: int
    n_agents: int


def _parse_timestamps(raw: pd.Series) -> pd.Series:
    """Epoch seconds or ISO-8601 strings to int64 epoch seconds; NaN where unparseable."""
    numeric = pd.to_numeric(raw, errors="coerce")
    todo = numeric.isna() & raw.notna()
    if todo.any():
        iso = pd.to_datetime(raw[todo], errors="coerce", utc=True, format="ISO8601")
        secs = (iso - pd.Timestamp("1970-01-01", tz="UTC")) // pd.Timedelta(seconds=1)
        numeric = numeric.astype("float64")
        numeric.loc[todo] = secs.astype("float64")
    return numeric


def ingest_csv_with_report(path) -> tuple[list[RawTrajectory], IngestReport]:
    df = pd.read_csv(path, dtype={"agent_id": str, "timestamp": str}, keep_default_na=False,
                     na_values=[""])
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing required column(s) {missing}; got {list(df.columns)}")
    n_rows = len(df)
    lat = pd.to_numeric(df["lat"], errors="coerce")
    lon = pd.to_numeric(df["lon"], errors="coerce")
    ts = _parse_timestamps(df["timestamp"])
    ok = (
        df["agent_id"].notna()
        & lat.between(-90, 90)
        & lon.between(-180, 180)
        & ts.notna()
    )
    n_bad = int((~ok).sum())
    if n_bad:
        log.warning("%s: skipped %d malformed row(s) of %d", path, n_bad, n_rows)
    clean = pd.DataFrame(
        {"agent_id": df["agent_id"][ok], "lat": lat[ok], "lon": lon[ok], "t": ts[ok].astype(np.int64)}
    )
    clean = clean.sort_values(["agent_id", "t"], kind="stable")
    dup = clean.duplicated(["agent_id", "t"], keep="first")
    n_dup = int(dup.sum())
    if n_dup:
        log.warning("%s: dropped %d duplicate timestamp(s)", path, n_dup)
        clean = clean[~dup]

    trajectories = [
        RawTrajectory(str(agent), g["lat"].to_numpy(), g["lon"].to_numpy(), g["t"].to_numpy())
        for agent, g in clean.groupby("agent_id", sort=True)
    ]
    return trajectories, IngestReport(n_rows, n_bad, n_dup, len(trajectories))


def ingest_csv(path) -> list[RawTrajectory]:
    """Read ``agent_id,lat,lon,timestamp`` rows into one sorted trajectory per agent."""
    return ingest_csv_with_report(path)[0]


def write_csv(trajectories, path, float_fmt: str = "%.7f") -> None:
    frames = [
        pd.DataFrame({"agent_id": tr.agent_id, "lat": tr.lat, "lon": tr.lon, "timestamp": tr.t})
        for tr in trajectories
    ]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(REQUIRED_COLUMNS))
    df.to_csv(path, index=False, float_format=float_fmt, lineterminator="\n")


def write_token_file(sequences: list[TokenSequence], path) -> None:
    with open(path, "w") as fh:
        for seq in sequences:
            fh.write(json.dumps(seq.to_record(), separators=(",", ":")) + "\n")


def read_token_file(path) -> list[TokenSequence]:
    out = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            r = json.loads(line)
            out.append(TokenSequence(agent_id=r["agent_id"], window=int(r["m"]),
                                     tokens=[int(x) for x in r["tokens"]], label=r.get("label")))
    return out


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
