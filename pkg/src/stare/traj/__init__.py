"""Raw trajectories to discrete persistent-location/duration token sequences."""

from .cells import CellDomainError, CellId, cell_edge_m, map_cell
from .io import SchemaError, ingest_csv, ingest_csv_with_report, read_token_file, write_csv, write_token_file
from .stays import PersistentLocation, detect_stays
from .tokenize import TokenizeConfig, extract_windows, tokenize_corpus
from .trajectory import DAY_SECONDS, RawPoint, RawTrajectory, partition_windows
from .vocab import (
    EmptyCorpusError,
    SequenceOverflowError,
    TokenSequence,
    Vocabulary,
    assemble_ids,
    assemble_sequence,
    build_vocabulary,
    discretize_duration,
)

__all__ = [
    "CellDomainError", "CellId", "cell_edge_m", "map_cell",
    "SchemaError", "ingest_csv", "ingest_csv_with_report", "read_token_file", "write_csv", "write_token_file",
    "PersistentLocation", "detect_stays",
    "TokenizeConfig", "extract_windows", "tokenize_corpus",
    "DAY_SECONDS", "RawPoint", "RawTrajectory", "partition_windows",
    "EmptyCorpusError", "SequenceOverflowError", "TokenSequence", "Vocabulary",
    "assemble_ids", "assemble_sequence", "build_vocabulary", "discretize_duration",
]
