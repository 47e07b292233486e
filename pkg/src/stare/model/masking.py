from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..traj.vocab import Vocabulary

log = logging.getLogger(__name__)

IGNORE = -100


@dataclass
class MaskedBatch:
    inputs: np.ndarray  # (B, L) with MASK substituted
    originals: np.ndarray  # (B, L)
    positions: np.ndarray  # (M, 2) rows of (sequence, position), sorted
    rows: np.ndarray  # indices into the source batch of the sequences kept

    @property
    def targets(self) -> np.ndarray:
        return self.originals[self.positions[:, 0], self.positions[:, 1]]

    @property
    def n_masked(self) -> int:
        return len(self.positions)


def n_to_mask(n_cells: int, fraction: float) -> int:
    return max(1, math.ceil(fraction * n_cells))


def mask_batch(tokens: np.ndarray, vocab: Vocabulary, fraction: float,
               rng: np.random.Generator) -> MaskedBatch:
    """Replace ``ceil(fraction * #cells)`` (min 1) cell tokens per sequence with MASK.

    Positions are drawn uniformly without replacement among cell tokens only;
    sequences without cell tokens are dropped with a warning.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2:
        raise ValueError("tokens must be a (batch, length) array")
    is_cell = vocab.cell_mask(tokens)
    counts = is_cell.sum(axis=1)
    rows = np.flatnonzero(counts > 0)
    if len(rows) < len(tokens):
        log.warning("skipping %d sequence(s) without cell tokens", len(tokens) - len(rows))
    originals = tokens[rows]
    inputs = originals.copy()
    pos = []
    for b, r in enumerate(rows):
        cand = np.flatnonzero(is_cell[r])
        chosen = np.sort(rng.choice(cand, size=n_to_mask(len(cand), fraction), replace=False))
        pos.extend((b, p) for p in chosen)
    positions = np.array(pos, dtype=np.int64).reshape(-1, 2)
    inputs[positions[:, 0], positions[:, 1]] = vocab.mask
    return MaskedBatch(inputs, originals, positions, rows)


def mask_each_cell(tokens: np.ndarray, vocab: Vocabulary) -> MaskedBatch:
    """One copy of a sequence per cell token, with only that cell masked.

    ``rows`` maps each copy back to its source sequence, so every cell
    occurrence is predicted once from its full context.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2:
        raise ValueError("tokens must be a (batch, length) array")
    src, col = np.nonzero(vocab.cell_mask(tokens))
    originals = tokens[src]
    inputs = originals.copy()
    inputs[np.arange(len(src)), col] = vocab.mask
    positions = np.stack([np.arange(len(src)), col], axis=1).astype(np.int64).reshape(-1, 2)
    return MaskedBatch(inputs, originals, positions, src)
