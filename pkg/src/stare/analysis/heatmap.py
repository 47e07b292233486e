from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

# linear ramp from white (low) to dark blue (high)
LOW = np.array([255.0, 255.0, 255.0])
HIGH = np.array([8.0, 48.0, 107.0])


def to_pixels(matrix: np.ndarray, vmin: float | None = None, vmax: float | None = None,
              cell_px: int = 1) -> np.ndarray:
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise ValueError("heatmap needs a finite 2-D matrix")
    lo = M.min() if vmin is None else vmin
    hi = M.max() if vmax is None else vmax
    t = np.clip((M - lo) / (hi - lo), 0.0, 1.0) if hi > lo else np.zeros_like(M)
    rgb = np.rint(LOW + t[..., None] * (HIGH - LOW)).astype(np.uint8)
    return np.repeat(np.repeat(rgb, cell_px, axis=0), cell_px, axis=1)


def heatmap_render(matrix: np.ndarray, path, vmin: float | None = None, vmax: float | None = None,
                   cell_px: int = 8) -> Path:
    """Write ``matrix`` as a PNG, one ``cell_px`` square per entry, rows top to bottom."""
    path = Path(path)
    Image.fromarray(to_pixels(matrix, vmin, vmax, cell_px), mode="RGB").save(path, format="PNG")
    return path
