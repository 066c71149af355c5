"""ASCII (P2) PGM heatmaps of saliency magnitudes."""

from __future__ import annotations

import numpy as np

from .errors import FileFormatError

PGM_MAX = 255


def saliency_to_pixels(values: np.ndarray) -> np.ndarray:
    """Min-max normalize |values| to 0..255 ints, half rounds away from zero.

    A constant map normalizes to all zeros.
    """
    mag = np.abs(np.asarray(values, dtype=np.float64)).reshape(-1)
    lo, hi = mag.min(), mag.max()
    if hi == lo:
        return np.zeros(mag.size, dtype=np.int64)
    scaled = PGM_MAX * (mag - lo) / (hi - lo)
    return np.floor(scaled + 0.5).astype(np.int64)  # values are >= 0


def write_pgm(pixels: np.ndarray, path) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"pixels must be a 2-D grid, got shape {pixels.shape}")
    if pixels.min() < 0 or pixels.max() > PGM_MAX:
        raise ValueError(f"pixel values must lie in 0..{PGM_MAX}")
    lines = ["P2", f"{pixels.shape[1]} {pixels.shape[0]}", str(PGM_MAX)]
    for row in pixels:
        lines.append(" ".join(str(int(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    with open(path) as fh:
        text = fh.read()
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise FileFormatError(f"{path}: expected ASCII PGM magic 'P2'")
    if len(tokens) < 4:
        raise FileFormatError(f"{path}: incomplete PGM header")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval != PGM_MAX:
        raise FileFormatError(f"{path}: expected maxval {PGM_MAX}, got {maxval}")
    data = tokens[4:]
    if len(data) != width * height:
        raise FileFormatError(
            f"{path}: expected {width * height} pixels, found {len(data)}"
        )
    return np.array([int(t) for t in data], dtype=np.int64).reshape(height, width)
