"""Uniform rectangular partitions of a 2-D configuration space.

Bins are numbered row-major with ``x`` varying fastest, so bin ``(i, j)``
has id ``j * nx + i``.  Cells are half-open ``[lo, hi)`` along each axis,
except that the upper domain edge belongs to the last cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Domain",
    "Grid",
    "Patch",
    "build_grid",
    "bin_of",
    "bins_of_points",
    "bins_in_patch",
    "seed_points",
    "lattice_offsets",
]


@dataclass(frozen=True)
class Domain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    periodic_x: bool = False
    periodic_y: bool = False

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"domain bounds must be finite, got {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate domain {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Grid:
    """Equal-area partition of ``domain`` into ``nx * ny == 2**depth`` bins."""

    domain: Domain
    depth: int
    nx: int
    ny: int
    bin_width: float = field(init=False)
    bin_height: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bin_width", self.domain.width / self.nx)
        object.__setattr__(self, "bin_height", self.domain.height / self.ny)

    @property
    def n_bins(self) -> int:
        return self.nx * self.ny

    @property
    def bin_area(self) -> float:
        return self.bin_width * self.bin_height

    def ij(self, bin_id):
        """Column/row indices of ``bin_id`` (scalar or array)."""
        bin_id = np.asarray(bin_id)
        return bin_id % self.nx, bin_id // self.nx

    def centres(self, bin_ids=None) -> np.ndarray:
        """Bin centres as an ``(k, 2)`` array; all bins when ``bin_ids`` is None."""
        if bin_ids is None:
            bin_ids = np.arange(self.n_bins)
        i, j = self.ij(bin_ids)
        d = self.domain
        cx = d.x_min + (i + 0.5) * self.bin_width
        cy = d.y_min + (j + 0.5) * self.bin_height
        return np.column_stack([cx, cy]).astype(float)

    def corners(self, bin_id) -> tuple[float, float, float, float]:
        """``(x0, y0, x1, y1)`` of one bin."""
        i, j = divmod(int(bin_id), self.nx)[::-1]
        d = self.domain
        x0 = d.x_min + i * self.bin_width
        y0 = d.y_min + j * self.bin_height
        return x0, y0, x0 + self.bin_width, y0 + self.bin_height


@dataclass(frozen=True)
class Patch:
    """Circular or elliptical seeding region (axis-aligned)."""

    centre: tuple[float, float]
    semi_axes: tuple[float, float]

    def __post_init__(self):
        a, b = self.semi_axes
        if not (a > 0 and b > 0):
            raise ValueError(f"patch semi-axes must be positive, got {self.semi_axes}")
        object.__setattr__(self, "centre", (float(self.centre[0]), float(self.centre[1])))
        object.__setattr__(self, "semi_axes", (float(a), float(b)))

    @classmethod
    def circle(cls, centre, radius: float) -> "Patch":
        return cls(tuple(centre), (radius, radius))

    @property
    def shape(self) -> str:
        a, b = self.semi_axes
        return "circle" if a == b else "ellipse"

    def contains(self, x, y):
        px, py = self.centre
        a, b = self.semi_axes
        return ((x - px) / a) ** 2 + ((y - py) / b) ** 2 <= 1.0


def build_grid(domain: Domain, depth: int) -> Grid:
    """Partition ``domain`` into ``2**depth`` bins.

    The x axis takes the extra factor of two for odd depths.
    """
    if isinstance(depth, bool) or int(depth) != depth:
        raise ValueError(f"depth must be an integer, got {depth!r}")
    depth = int(depth)
    if depth < 1:
        raise ValueError(f"depth must be positive, got {depth}")
    nx = 2 ** ((depth + 1) // 2)
    ny = 2 ** (depth // 2)
    return Grid(domain, depth, nx, ny)


def _axis_index(coord, lo, width, n, periodic):
    """Cell index along one axis; -1 marks points outside a closed axis."""
    span = n * width
    if periodic:
        coord = lo + np.mod(coord - lo, span)
    idx = np.floor((coord - lo) / width).astype(np.int64)
    # the division can round across a cell edge; agree with the edges lo + i*width
    idx = np.where(coord < lo + idx * width, idx - 1, idx)
    idx = np.where(coord >= lo + (idx + 1) * width, idx + 1, idx)
    if periodic:
        idx = np.where(idx < 0, idx + n, idx)
        # mod can round up to exactly `span`
        idx = np.where(idx >= n, idx - n, idx)
        return idx
    hi = lo + span
    idx = np.where(coord == hi, n - 1, idx)
    outside = (coord < lo) | (coord > hi) | ~np.isfinite(coord)
    idx = np.where(outside, -1, idx)
    return np.clip(idx, -1, n - 1)


def bins_of_points(grid: Grid, x, y) -> np.ndarray:
    """Vectorised :func:`bin_of`; points outside the domain map to ``-1``."""
    d = grid.domain
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = _axis_index(x, d.x_min, grid.bin_width, grid.nx, d.periodic_x)
    j = _axis_index(y, d.y_min, grid.bin_height, grid.ny, d.periodic_y)
    out = j * grid.nx + i
    return np.where((i < 0) | (j < 0), -1, out)


def bin_of(grid: Grid, point) -> int | None:
    b = int(bins_of_points(grid, point[0], point[1]))
    return None if b < 0 else b


def bins_in_patch(grid: Grid, patch: Patch) -> np.ndarray:
    """Ids of all bins whose centre lies in ``patch``, ascending."""
    c = grid.centres()
    inside = patch.contains(c[:, 0], c[:, 1])
    return np.flatnonzero(inside).astype(np.int64)


def lattice_offsets(Q: int) -> np.ndarray:
    """Fractional offsets of a centred ``sqrt(Q) x sqrt(Q)`` lattice in the unit cell."""
    if isinstance(Q, bool) or int(Q) != Q or Q < 1:
        raise ValueError(f"Q must be a positive integer, got {Q!r}")
    k = math.isqrt(int(Q))
    if k * k != Q:
        raise ValueError(f"Q must be a perfect square, got {Q}")
    f = (np.arange(k) + 0.5) / k
    fx, fy = np.meshgrid(f, f, indexing="xy")
    return np.column_stack([fx.ravel(), fy.ravel()])


def seed_points(grid: Grid, bin_id: int, Q: int) -> np.ndarray:
    """``Q`` lattice test points inside one bin, x varying fastest."""
    off = lattice_offsets(Q)
    x0, y0, _, _ = grid.corners(bin_id)
    return np.column_stack([x0 + off[:, 0] * grid.bin_width, y0 + off[:, 1] * grid.bin_height])
