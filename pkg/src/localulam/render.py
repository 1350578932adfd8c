"""Greyscale PGM rendering of bin-supported vectors and masks."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import Grid

__all__ = ["to_gray", "render_vector", "render_mask", "write_pgm", "read_pgm"]


def to_gray(raster: np.ndarray) -> np.ndarray:
    """Affine map of ``[min, max]`` onto ``0..255``; constant input maps to 0."""
    a = np.asarray(raster, dtype=float)
    lo, hi = float(a.min()), float(a.max())
    if not hi > lo:
        return np.zeros(a.shape, dtype=np.uint8)
    return np.rint((a - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def write_pgm(img: np.ndarray, path) -> Path:
    """Binary (P5) PGM; ``img`` rows are written top to bottom."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("PGM images are two-dimensional")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w).copy()


def render_vector(vec, bins, grid: Grid, path) -> Path:
    """Render a vector over ``bins`` as one pixel per bin.

    Bins off the support take the value 0 before scaling.  The top image
    row is the largest ``y``.
    """
    bins = np.asarray(bins, dtype=np.int64)
    vec = np.asarray(vec, dtype=float)
    if vec.shape != bins.shape:
        raise ValueError("vector and bin list differ in length")
    full = np.zeros(grid.n_bins)
    full[bins] = vec
    return write_pgm(to_gray(full.reshape(grid.ny, grid.nx))[::-1], path)


def render_mask(mask, path) -> Path:
    """Boolean raster (rows = increasing y) as a black and white image."""
    m = np.asarray(mask, dtype=bool)
    return write_pgm(np.where(m, 255, 0).astype(np.uint8)[::-1], path)
