"""Average post-softmax prediction matrices and the blocks they reveal."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

KINDS = ("agent", "subpop", "location")


@dataclass
class PredictionMatrix:
    """Row i is the mean predicted distribution over sequences whose true label is ``labels[i]``."""

    labels: list
    values: np.ndarray
    counts: np.ndarray | None = None  # sequences (or masked positions) behind each row

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} does not match {n} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.values < 0) or np.any(np.abs(self.values.sum(axis=1) - 1) > tol):
            raise ValueError("prediction matrix rows must be non-negative and sum to 1")

    def permuted(self, order) -> "PredictionMatrix":
        """Rows and columns reordered by ``order`` (positions into ``labels``)."""
        order = np.asarray(order, dtype=np.int64)
        counts = None if self.counts is None else self.counts[order]
        return PredictionMatrix([self.labels[i] for i in order], self.values[np.ix_(order, order)], counts)

    def transposed(self) -> "PredictionMatrix":
        return PredictionMatrix(list(self.labels), self.values.T.copy(), self.counts)

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label", *self.labels])
            for lab, row in zip(self.labels, self.values):
                w.writerow([lab, *(repr(float(v)) for v in row)])

    @classmethod
    def read_csv(cls, path) -> "PredictionMatrix":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        labels = rows[0][1:]
        return cls(labels, np.array([[float(v) for v in r[1:]] for r in rows[1:]]))


def average_predictions(probs: np.ndarray, true_idx: np.ndarray, labels: list,
                        min_count: int = 1) -> PredictionMatrix:
    """Group ``probs`` rows by true class and average them.

    Classes with fewer than ``min_count`` rows are dropped (with a warning)
    from both axes; the remaining columns are renormalized so each row is
    again a distribution.
    """
    probs = np.asarray(probs, dtype=np.float64)
    true_idx = np.asarray(true_idx, dtype=np.int64)
    n = len(labels)
    if probs.ndim != 2 or probs.shape[1] != n or len(true_idx) != len(probs):
        raise ValueError(f"probabilities {probs.shape} do not match {len(true_idx)} targets and {n} labels")
    counts = np.bincount(true_idx, minlength=n)
    keep = np.flatnonzero(counts >= max(min_count, 1))
    if len(keep) < n:
        log.warning("dropping %d label(s) with fewer than %d test item(s)", n - len(keep), max(min_count, 1))
    sums = np.zeros((n, n))
    np.add.at(sums, true_idx, probs)
    vals = sums[np.ix_(keep, keep)] / counts[keep, None]
    vals /= vals.sum(axis=1, keepdims=True)
    return PredictionMatrix([labels[i] for i in keep], vals, counts[keep])


def _softmax(z: np.ndarray) -> np.ndarray:
    z = np.exp(z - z.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def location_matrix(logits: np.ndarray, targets: np.ndarray, cell_tokens: np.ndarray,
                    min_count: int = 20) -> PredictionMatrix:
    """Prediction matrix over cell tokens from masked-position decoder logits.

    Rows are true cells masked at least ``min_count`` times (0 keeps every
    cell that was masked at all); the softmax is taken over the kept cells
    only, so each row is a distribution over the same labels as the rows.
    """
    cell_tokens = np.asarray(cell_tokens, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    counts = np.array([(targets == c).sum() for c in cell_tokens])
    keep = cell_tokens[counts >= max(min_count, 1)]
    if not len(keep):
        raise ValueError(f"no cell was masked at least {max(min_count, 1)} times; lower min_count")
    if len(keep) < len(cell_tokens):
        log.info("location matrix keeps %d of %d cells (min_count=%d)", len(keep), len(cell_tokens), min_count)
    sel = np.isin(targets, keep)
    col = {int(c): i for i, c in enumerate(keep)}
    probs = _softmax(np.asarray(logits)[sel][:, keep])
    true_idx = np.array([col[int(t)] for t in targets[sel]], dtype=np.int64)
    return average_predictions(probs, true_idx, [int(c) for c in keep])


def misclassification_blocks(P: PredictionMatrix, threshold: float = 0.05) -> list[list]:
    """Groups of labels linked by off-diagonal mass ``max(P_ij, P_ji) >= threshold``.

    Connected components of that graph with two or more members, each sorted
    by label position, ordered by their first member.
    """
    V = P.values
    link = np.maximum(V, V.T) >= threshold
    np.fill_diagonal(link, False)
    n_comp, comp = connected_components(link, directed=False)
    groups = []
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        if len(members) > 1:
            groups.append(members)
    groups.sort(key=lambda g: g[0])
    return [[P.labels[i] for i in g] for g in groups]


def grouped_pairs(groups: list[list]) -> list[tuple]:
    return [(g[i], g[j]) for g in groups for i in range(len(g)) for j in range(i + 1, len(g))]
