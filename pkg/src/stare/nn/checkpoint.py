"""Named float64 parameter tensors stored in an ``.npz`` archive.

The archive holds one array per parameter plus a ``__meta__`` entry with a
JSON document (format version and caller metadata). Arrays are stored raw, so
a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_META = "__meta__"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if _META in tensors:
        raise CheckpointError(f"parameter name {_META!r} is reserved")
    doc = {"format_version": FORMAT_VERSION, "meta": meta or {},
           "shapes": {k: list(np.shape(v)) for k, v in tensors.items()}}
    arrays = {k: np.array(v, dtype=np.float64, order="C") for k, v in tensors.items()}
    arrays[_META] = np.array(json.dumps(doc, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(Path(path), allow_pickle=False) as z:
        if _META not in z.files:
            raise CheckpointError(f"{path}: not a checkpoint (no metadata entry)")
        doc = json.loads(str(z[_META]))
        if doc.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('format_version')}")
        tensors = {k: z[k] for k in z.files if k != _META}
    for k, shape in doc["shapes"].items():
        if k not in tensors or list(tensors[k].shape) != shape:
            raise CheckpointError(f"{path}: tensor {k!r} missing or misshapen")
    return tensors, doc["meta"]
