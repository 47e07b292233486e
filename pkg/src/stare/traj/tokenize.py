from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

from .stays import DEFAULT_MIN_STAY_S, DEFAULT_STAY_RADIUS_M, DEFAULT_ZOOM, PersistentLocation, detect_stays
from .trajectory import DAY_SECONDS, RawTrajectory, partition_windows
from .vocab import TokenSequence, Vocabulary, assemble_sequence, build_vocabulary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenizeConfig:
    window_seconds: int = DAY_SECONDS
    timezone_offset: int = 0
    stay_radius_m: float = DEFAULT_STAY_RADIUS_M
    min_stay_duration: int = DEFAULT_MIN_STAY_S
    zoom: int = DEFAULT_ZOOM
    block_seconds: int = 600
    max_dwell: int = DAY_SECONDS

    def to_dict(self) -> dict:
        return asdict(self)


def extract_windows(
    trajectories: list[RawTrajectory], cfg: TokenizeConfig
) -> list[tuple[str, int, list[PersistentLocation]]]:
    """(agent_id, window index, PLs) for every window that yields at least one PL."""
    out = []
    for traj in sorted(trajectories, key=lambda tr: tr.agent_id):
        for piece in partition_windows(traj, cfg.window_seconds, cfg.timezone_offset):
            pls = detect_stays(piece, cfg.stay_radius_m, cfg.min_stay_duration, cfg.zoom)
            if pls:
                out.append((traj.agent_id, piece.window, pls))
            else:
                log.debug("agent %s window %s has no persistent locations", traj.agent_id, piece.window)
    return out


def tokenize_corpus(
    trajectories: list[RawTrajectory],
    cfg: TokenizeConfig = TokenizeConfig(),
    labels: dict[str, int] | None = None,
    vocab: Vocabulary | None = None,
) -> tuple[Vocabulary, list[TokenSequence]]:
    """Discretize every agent-window into a token sequence.

    A vocabulary is built from the corpus unless one is supplied; sequences
    are ordered by (agent_id, window).
    """
    windows = extract_windows(trajectories, cfg)
    if vocab is None:
        vocab = build_vocabulary((pls for _, _, pls in windows), cfg.block_seconds, cfg.max_dwell, cfg.zoom)
    seqs = [
        assemble_sequence(pls, vocab, agent_id=a, window=m,
                          label=None if labels is None else labels.get(a))
        for a, m, pls in windows
    ]
    return vocab, seqs
