from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class AccuracyRow:
    model: str
    task: str
    accuracy: float
    n: int


def accuracy(pred, true) -> float:
    pred, true = np.asarray(pred), np.asarray(true)
    if pred.shape != true.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match targets {true.shape}")
    return float(np.mean(pred == true)) if true.size else float("nan")


def write_report(rows: list[AccuracyRow], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "task", "accuracy", "n"])
        for r in rows:
            w.writerow([r.model, r.task, repr(float(r.accuracy)), r.n])


def read_report(path) -> list[AccuracyRow]:
    with open(Path(path), newline="") as fh:
        return [AccuracyRow(r["model"], r["task"], float(r["accuracy"]), int(r["n"])) for r in csv.DictReader(fh)]
