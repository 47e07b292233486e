"""Token-id layout and sequence assembly.

Id layout for a vocabulary with ``n_cells`` cells and ``n_time_blocks``
duration blocks::

    0                                   PAD
    1 .. n_cells                        cell tokens
    n_cells+1 .. n_cells+n_time_blocks  duration tokens (block b -> n_cells + b)
    next four ids                       BOS, SEP, EOS, MASK

A sequence is ``[BOS, cells..., PAD..., SEP, times..., PAD..., EOS]`` with the
two sub-sequences padded to ``max_loc_len`` and ``max_time_len``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cells import CellId
from .stays import PersistentLocation

VOCAB_FORMAT_VERSION = 1

PAD = "pad"
CELL = "cell"
TIME = "time"
SPECIAL = "special"


class EmptyCorpusError(ValueError):
    pass


class SequenceOverflowError(ValueError):
    pass


def discretize_duration(dwell: float, block: float) -> int:
    """Round a dwell to the nearest whole block (ties to even), at least 1."""
    if block <= 0:
        raise ValueError(f"block must be positive, got {block}")
    if dwell < 0:
        raise ValueError(f"dwell must be non-negative, got {dwell}")
    return max(1, int(round(dwell / block)))


@dataclass
class Vocabulary:
    n_cells: int
    n_time_blocks: int
    zoom: int = 16
    block_seconds: int = 600
    cell_index_map: dict[int, int] = field(default_factory=dict)
    max_loc_len: int = 0
    max_time_len: int = 0

    def __post_init__(self) -> None:
        if self.n_cells < 0 or self.n_time_blocks < 1:
            raise ValueError("need n_cells >= 0 and n_time_blocks >= 1")

    # -- layout -----------------------------------------------------------
    @property
    def bos(self) -> int:
        return self.n_cells + self.n_time_blocks + 1

    @property
    def sep(self) -> int:
        return self.bos + 1

    @property
    def eos(self) -> int:
        return self.bos + 2

    @property
    def mask(self) -> int:
        return self.bos + 3

    @property
    def size(self) -> int:
        return self.mask + 1

    @property
    def seq_len(self) -> int:
        return self.max_loc_len + self.max_time_len + 3

    @property
    def special_ids(self) -> dict[str, int]:
        return {"PAD": 0, "BOS": self.bos, "SEP": self.sep, "EOS": self.eos, "MASK": self.mask}

    def kind(self, token_id: int) -> str:
        if token_id == 0:
            return PAD
        if 1 <= token_id <= self.n_cells:
            return CELL
        if self.n_cells < token_id <= self.n_cells + self.n_time_blocks:
            return TIME
        if self.bos <= token_id <= self.mask:
            return SPECIAL
        raise KeyError(f"token id {token_id} outside vocabulary of size {self.size}")

    def kinds(self, tokens: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`kind` returning an array of kind strings."""
        tokens = np.asarray(tokens)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.size):
            raise KeyError(f"token ids outside [0, {self.size})")
        out = np.full(tokens.shape, SPECIAL, dtype=object)
        out[tokens == 0] = PAD
        out[(tokens >= 1) & (tokens <= self.n_cells)] = CELL
        out[(tokens > self.n_cells) & (tokens <= self.n_cells + self.n_time_blocks)] = TIME
        return out

    def cell_mask(self, tokens: np.ndarray) -> np.ndarray:
        tokens = np.asarray(tokens)
        return (tokens >= 1) & (tokens <= self.n_cells)

    def cell_token(self, cell: CellId) -> int:
        if cell.zoom != self.zoom:
            raise KeyError(f"cell zoom {cell.zoom} does not match vocabulary zoom {self.zoom}")
        try:
            return self.cell_index_map[cell.index]
        except KeyError:
            raise KeyError(f"cell {cell.index} (zoom {cell.zoom}) not in vocabulary") from None

    def time_token(self, dwell: float) -> int:
        block = min(discretize_duration(dwell, self.block_seconds), self.n_time_blocks)
        return self.n_cells + block

    # -- persistence ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "version": VOCAB_FORMAT_VERSION,
            "zoom": self.zoom,
            "block_seconds": self.block_seconds,
            "n_cells": self.n_cells,
            "n_time_blocks": self.n_time_blocks,
            "cell_index_map": {str(k): v for k, v in sorted(self.cell_index_map.items())},
            "special_ids": self.special_ids,
            "max_loc_len": self.max_loc_len,
            "max_time_len": self.max_time_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        if d.get("version") != VOCAB_FORMAT_VERSION:
            raise ValueError(f"unsupported vocabulary version {d.get('version')!r}")
        vocab = cls(
            n_cells=int(d["n_cells"]),
            n_time_blocks=int(d["n_time_blocks"]),
            zoom=int(d["zoom"]),
            block_seconds=int(d["block_seconds"]),
            cell_index_map={int(k): int(v) for k, v in d["cell_index_map"].items()},
            max_loc_len=int(d["max_loc_len"]),
            max_time_len=int(d["max_time_len"]),
        )
        if d.get("special_ids") and d["special_ids"] != vocab.special_ids:
            raise ValueError("special ids in file disagree with the layout")
        return vocab

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_vocabulary(
    windows: Iterable[Sequence[PersistentLocation]],
    block: int = 600,
    max_dwell: int = 86_400,
    zoom: int | None = None,
) -> Vocabulary:
    """Collect the cell alphabet and length maxima over per-window PL lists."""
    cells: set[int] = set()
    zooms: set[int] = set()
    longest = 0
    for pls in windows:
        longest = max(longest, len(pls))
        for pl in pls:
            cells.add(pl.cell_id.index)
            zooms.add(pl.cell_id.zoom)
    if not cells:
        raise EmptyCorpusError("empty corpus: no persistent locations to build a vocabulary from")
    if len(zooms) > 1:
        raise ValueError(f"mixed cell zoom levels in corpus: {sorted(zooms)}")
    zoom = zooms.pop() if zoom is None else zoom
    return Vocabulary(
        n_cells=len(cells),
        n_time_blocks=math.ceil(max_dwell / block),
        zoom=zoom,
        block_seconds=block,
        cell_index_map={c: i + 1 for i, c in enumerate(sorted(cells))},
        max_loc_len=longest,
        max_time_len=longest,
    )


@dataclass
class TokenSequence:
    agent_id: str
    window: int
    tokens: list[int]
    label: int | None = None
    loc_span: tuple[int, int] = (0, 0)
    time_span: tuple[int, int] = (0, 0)

    def to_record(self) -> dict:
        return {"agent_id": self.agent_id, "m": self.window, "label": self.label, "tokens": self.tokens}


def assemble_ids(cell_ids: Sequence[int], time_ids: Sequence[int], vocab: Vocabulary) -> list[int]:
    """Lay out already-mapped cell and time ids into the padded frame."""
    if len(cell_ids) > vocab.max_loc_len or len(time_ids) > vocab.max_time_len:
        raise SequenceOverflowError(
            f"{len(cell_ids)} locations / {len(time_ids)} times exceed "
            f"max_loc_len={vocab.max_loc_len} / max_time_len={vocab.max_time_len}"
        )
    return (
        [vocab.bos, *cell_ids]
        + [0] * (vocab.max_loc_len - len(cell_ids))
        + [vocab.sep, *time_ids]
        + [0] * (vocab.max_time_len - len(time_ids))
        + [vocab.eos]
    )


def assemble_sequence(
    pls: Sequence[PersistentLocation],
    vocab: Vocabulary,
    agent_id: str = "",
    window: int = 0,
    label: int | None = None,
) -> TokenSequence:
    if len(pls) > vocab.max_loc_len:
        raise SequenceOverflowError(
            f"window {window} of agent {agent_id!r} has {len(pls)} locations, "
            f"more than max_loc_len={vocab.max_loc_len}"
        )
    cells = [vocab.cell_token(pl.cell_id) for pl in pls]
    times = [vocab.time_token(pl.dwell) for pl in pls]
    tokens = assemble_ids(cells, times, vocab)
    time_start = vocab.max_loc_len + 2
    return TokenSequence(
        agent_id=agent_id,
        window=window,
        tokens=tokens,
        label=label,
        loc_span=(1, 1 + len(cells)),
        time_span=(time_start, time_start + len(times)),
    )
