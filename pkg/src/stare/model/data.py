"""Token datasets, label encodings and the shared train/test split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..traj.vocab import TokenSequence

TASKS = ("subpop", "agent", "mlm")


class LabelError(ValueError):
    """Labels are missing or unusable for the requested task."""


@dataclass
class SequenceDataset:
    tokens: np.ndarray  # (N, L) int64
    agent_ids: list[str]
    windows: list[int]
    targets: np.ndarray | None = None  # (N,) class index, None for masked modeling
    classes: list | None = None  # class index -> original label

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_classes(self) -> int:
        return len(self.classes) if self.classes is not None else 0

    def subset(self, idx: np.ndarray) -> "SequenceDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return SequenceDataset(
            tokens=self.tokens[idx],
            agent_ids=[self.agent_ids[i] for i in idx],
            windows=[self.windows[i] for i in idx],
            targets=None if self.targets is None else self.targets[idx],
            classes=self.classes,
        )


def build_dataset(seqs: list[TokenSequence], task: str) -> SequenceDataset:
    """Stack token sequences and encode labels for ``task``.

    ``agent`` uses the agent id as the class, ``subpop`` the stored label;
    classes are indexed in sorted order.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    if not seqs:
        raise LabelError("empty dataset")
    lengths = {len(s.tokens) for s in seqs}
    if len(lengths) != 1:
        raise ValueError(f"sequences have differing lengths {sorted(lengths)}")
    tokens = np.array([s.tokens for s in seqs], dtype=np.int64)
    agents = [s.agent_id for s in seqs]
    windows = [s.window for s in seqs]
    if task == "mlm":
        return SequenceDataset(tokens, agents, windows)
    if task == "agent":
        raw = agents
    else:
        raw = [s.label for s in seqs]
        if any(r is None for r in raw):
            raise LabelError("subpopulation task needs a label on every sequence")
    classes = sorted(set(raw))
    if len(classes) < 2:
        raise LabelError(f"classification needs at least two classes, found {len(classes)}")
    index = {c: i for i, c in enumerate(classes)}
    targets = np.array([index[r] for r in raw], dtype=np.int64)
    return SequenceDataset(tokens, agents, windows, targets, classes)


def split_indices(n: int, seed: int, train_frac: float = 0.85,
                  strata: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/test split, stratified by ``strata`` when given.

    Within each stratum ``round((1 - train_frac) * size)`` items go to test,
    at least one whenever the stratum has two or more items. Both index
    arrays are sorted.
    """
    if n < 2:
        raise ValueError("need at least two sequences to split")
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    groups = [np.arange(n)] if strata is None else [np.flatnonzero(strata == s) for s in np.unique(strata)]
    test = []
    for g in groups:
        g = rng.permutation(g)
        k = int(round((1.0 - train_frac) * len(g)))
        if len(g) >= 2:
            k = min(max(k, 1), len(g) - 1)
        test.extend(g[:k].tolist())
    test = np.sort(np.array(test, dtype=np.int64))
    train = np.setdiff1d(np.arange(n), test)
    return train, test
