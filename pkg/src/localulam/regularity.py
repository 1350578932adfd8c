"""Isoperimetric filter for lifespan steps.

A step of a lifespan is kept when its tracked right singular vector,
interpolated to bin corners and thresholded at multilevel Otsu contours,
contains a connected component whose isoperimetric quotient
``4 pi A / L**2`` exceeds a threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import Grid
from .lifespans import Lifespan

__all__ = [
    "ContourError",
    "CornerField",
    "StepRegularity",
    "RegularityReport",
    "embed",
    "interpolate_to_corners",
    "multilevel_contours",
    "select_cells",
    "trace_boundary",
    "isoperimetric_ratio",
    "isoperimetric_best",
    "step_regularity",
    "regularize_lifespans",
]

HIST_BINS = 64
DEFAULT_ISO_THRESH = 0.85

_EIGHT = np.ones((3, 3), dtype=bool)


class ContourError(ValueError):
    """Values are constant, so no contour levels exist."""


@dataclass(frozen=True, eq=False)
class CornerField:
    """Values on the bin-corner lattice, shape ``(rows, cols)`` = (y, x).

    Closed axes have one more corner than bins; periodic axes the same number.
    """

    grid: Grid
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def embed(vec, bins, grid: Grid) -> np.ndarray:
    """Place a bin-supported vector on the full ``(ny, nx)`` bin raster."""
    full = np.zeros(grid.n_bins)
    full[np.asarray(bins, dtype=np.int64)] = vec
    return full.reshape(grid.ny, grid.nx)


def _corner_axis(a, axis, periodic):
    """Sum of the two bins adjacent to each corner along ``axis`` and their count."""
    ones = np.ones_like(a)
    if periodic:
        return a + np.roll(a, 1, axis=axis), ones + np.roll(ones, 1, axis=axis)
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    ap = np.pad(a, pad)
    op = np.pad(ones, pad)
    lo = [slice(None), slice(None)]
    hi = [slice(None), slice(None)]
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return ap[tuple(lo)] + ap[tuple(hi)], op[tuple(lo)] + op[tuple(hi)]


def interpolate_to_corners(vec, bins, grid: Grid) -> CornerField:
    """Mean of the bin-centre values around each corner (zeros off support)."""
    raster = embed(vec, bins, grid)
    d = grid.domain
    sx, cx = _corner_axis(raster, 1, d.periodic_x)
    # corner count factors as (#x neighbours) * (#y neighbours)
    sxy, _ = _corner_axis(sx, 0, d.periodic_y)
    cxy, _ = _corner_axis(cx, 0, d.periodic_y)
    return CornerField(grid, sxy / cxy)


def _otsu_search(hist: np.ndarray, centres: np.ndarray):
    """Exhaustive 4-class Otsu over histogram cut indices ``0 < i < j < k < nbins``."""
    nb = hist.size
    w = np.concatenate([[0.0], np.cumsum(hist)])
    s = np.concatenate([[0.0], np.cumsum(hist * centres)])
    i, j, k = (np.array(c) for c in zip(*((i, j, k) for i in range(1, nb - 1)
                                          for j in range(i + 1, nb)
                                          for k in range(j + 1, nb))))
    cuts = [np.zeros_like(i), i, j, k, np.full_like(i, nb)]
    score = np.zeros(i.shape)
    for a, b in zip(cuts, cuts[1:]):
        wk = w[b] - w[a]
        sk = s[b] - s[a]
        with np.errstate(divide="ignore", invalid="ignore"):
            score += np.where(wk > 0, sk * sk / np.where(wk > 0, wk, 1.0), 0.0)
    best = int(np.argmax(score))
    return int(i[best]), int(j[best]), int(k[best])


def multilevel_contours(values, nbins: int = HIST_BINS):
    """Three ascending thresholds maximising between-class variance of 4 classes.

    Thresholds are histogram bin edges of a ``nbins`` histogram spanning
    the data range.
    """
    vals = np.asarray(values.values if isinstance(values, CornerField) else values, dtype=float).ravel()
    lo, hi = float(vals.min()), float(vals.max())
    if not hi > lo:
        raise ContourError("constant field has no contour levels")
    hist, edges = np.histogram(vals, bins=nbins, range=(lo, hi))
    centres = 0.5 * (edges[:-1] + edges[1:])
    i, j, k = _otsu_search(hist.astype(float), centres)
    return float(edges[i]), float(edges[j]), float(edges[k])


def select_cells(values, C) -> np.ndarray:
    """Boolean corner mask chosen from the signs of the outer contours."""
    v = np.asarray(values.values if isinstance(values, CornerField) else values, dtype=float)
    c1, c2, c3 = C
    if np.sign(c1) != np.sign(c3):
        return (v < c1) | (v > c3)
    if c3 > 0:
        return v > c2
    return v < c2


# clockwise neighbour offsets (drow, dcol), starting west; rows grow downward
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))


def trace_boundary(component: np.ndarray) -> np.ndarray:
    """Outer boundary of one 8-connected component by Moore-neighbour tracing.

    Returns the visited lattice positions ``(row, col)`` in order, without
    repeating the start.  Tracing stops when the start is re-entered from
    the same direction it was first left (Jacob's criterion).
    """
    comp = np.pad(np.asarray(component, dtype=bool), 1)
    rows, cols = np.nonzero(comp)
    if rows.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    start = (int(rows[0]), int(cols[0]))
    if rows.size == 1:
        return np.array([[start[0] - 1, start[1] - 1]])
    # raster order guarantees the west neighbour of the start is background
    cur = start
    back_dir = 0
    path = [start]
    first_move = None
    limit = 4 * comp.size + 8
    for _ in range(limit):
        for step in range(1, 9):
            d = (back_dir + step) % 8
            r, c = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if comp[r, c]:
                break
        else:  # isolated pixel; cannot happen for size > 1
            break
        nxt = (r, c)
        # new backtrack: the background cell examined just before `nxt`,
        # expressed as a direction from `nxt`
        pr, pc = cur[0] + _MOORE[(d - 1) % 8][0], cur[1] + _MOORE[(d - 1) % 8][1]
        back_dir = _MOORE.index((pr - r, pc - c))
        move = (cur, nxt)
        if first_move is None:
            first_move = move
        elif move == first_move:
            break
        cur = nxt
        path.append(cur)
    else:
        raise RuntimeError("boundary tracing did not terminate")
    # the final append re-entered the start
    path = path[:-1] if len(path) > 1 and path[-1] == start else path
    return np.array(path, dtype=np.int64) - 1


def _polygon_measures(path: np.ndarray, sx: float = 1.0, sy: float = 1.0):
    xy = np.column_stack([path[:, 1] * sx, path[:, 0] * sy]).astype(float)
    nxt = np.roll(xy, -1, axis=0)
    length = float(np.sum(np.hypot(*(nxt - xy).T)))
    area = 0.5 * abs(float(np.sum(xy[:, 0] * nxt[:, 1] - nxt[:, 0] * xy[:, 1])))
    return area, length


def isoperimetric_ratio(component: np.ndarray, sx: float = 1.0, sy: float = 1.0) -> float:
    """``4 pi A / L**2`` of one component's traced outer boundary, in [0, 1]."""
    if np.count_nonzero(component) == 1:
        return 1.0
    path = trace_boundary(component)
    area, length = _polygon_measures(path, sx, sy)
    if area <= 0 or length <= 0:
        return 0.0
    return float(min(max(4.0 * math.pi * area / length ** 2, 0.0), 1.0))


def isoperimetric_best(mask, grid: Grid | None = None):
    """Largest isoperimetric quotient over the 8-connected components of ``mask``.

    Returns ``(I_max, n_components)``; ``(0.0, 0)`` for an empty mask.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        return 0.0, 0
    sx, sy = (grid.bin_width, grid.bin_height) if grid is not None else (1.0, 1.0)
    best = 0.0
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        best = max(best, isoperimetric_ratio(labels[sl] == lab, sx, sy))
        if best >= 1.0:
            break
    return best, count


@dataclass(frozen=True)
class StepRegularity:
    mode: int
    t: float
    exists: bool
    i_max: float
    n_components: int


@dataclass(eq=False)
class RegularityReport:
    iso_thresh: float
    steps: list = field(default_factory=list)
    lifespans: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "iso_thresh": self.iso_thresh,
            "steps": [{"mode": s.mode + 1, "t": _num(s.t), "exists": s.exists,
                       "I_max": s.i_max, "components": s.n_components} for s in self.steps],
            "regularised_lifespans": [
                {"mode": z.mode + 1, "z_alpha": _num(z.birth), "z_omega": _num(z.death), "age": z.age}
                for z in self.lifespans],
        }


def step_regularity(vec, bins, grid: Grid, iso_thresh: float = DEFAULT_ISO_THRESH):
    """``(exists, I_max, n_components)`` for one singular vector."""
    corners = interpolate_to_corners(vec, bins, grid)
    try:
        C = multilevel_contours(corners)
    except ContourError:
        return False, 0.0, 0
    mask = select_cells(corners, C)
    i_max, count = isoperimetric_best(mask, grid)
    return bool(i_max > iso_thresh), i_max, count


def regularize_lifespans(lifespans, tracked, grid: Grid,
                         iso_thresh: float = DEFAULT_ISO_THRESH) -> RegularityReport:
    """Keep the lifespan steps whose tracked right vector has a regular component."""
    if not 0 <= iso_thresh <= 1:
        raise ValueError(f"iso_thresh must lie in [0, 1], got {iso_thresh}")
    index = {float(t): k for k, t in enumerate(tracked.times)}
    report = RegularityReport(float(iso_thresh))
    for span in sorted(lifespans, key=lambda s: (s.mode, s.birth)):
        run = []
        for t, sig, sv in zip(span.times, span.mismatch, span.singular_values):
            k = index[float(t)]
            ok, i_max, count = step_regularity(tracked.v(k, span.mode), tracked.v_bins(k), grid,
                                               iso_thresh)
            report.steps.append(StepRegularity(span.mode, float(t), ok, i_max, count))
            if ok:
                run.append((t, sig, sv))
            if run and (not ok or t == span.times[-1]):
                report.lifespans.append(_span(span.mode, run))
                run = []
    return report


def _span(mode, run) -> Lifespan:
    ts, sig, sv = zip(*run)
    return Lifespan(mode, float(ts[0]), float(ts[-1]), tuple(ts), tuple(sig), tuple(sv))


def _num(t):
    t = float(t)
    return int(t) if t.is_integer() else t
