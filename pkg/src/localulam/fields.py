"""Velocity fields: the forced double well and gridded datasets on disk.

A field exposes ``velocity(x, y, t) -> (u, v)`` on numpy arrays.  Gridded
datasets are read from a directory holding ``manifest.json`` plus one raw
little-endian float64 file per time slice (u block then v block, x fastest).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import Domain

__all__ = [
    "FieldError",
    "forcing_a",
    "dwp_velocity",
    "AnalyticDoubleWell",
    "FunctionField",
    "GriddedField",
    "load_gridded_field",
    "save_gridded_field",
    "sample_gridded",
    "dwp_gridded",
]

FORCING_PERIOD = 100.0

# relative slack on the time range so that accumulated RK stage times
# landing a few ulps past the last slice are still accepted
_TIME_SLACK = 1e-9


class FieldError(DataError):
    """Invalid or unreadable velocity data."""


def forcing_a(t):
    """Periodic forcing amplitude of the double well, values in [0, 1]."""
    t = np.asarray(t, dtype=float)
    s = np.mod(t, FORCING_PERIOD)
    out = np.select(
        [s <= 10.0, s <= 40.0, s <= 60.0, s <= 90.0],
        [
            np.ones_like(s),
            np.cos((s - 10.0) * np.pi / 60.0) ** 2,
            np.zeros_like(s),
            np.cos((s - 30.0) * np.pi / 60.0) ** 2,
        ],
        default=1.0,
    )
    return float(out) if out.ndim == 0 else out


def dwp_velocity(x, y, t):
    a = forcing_a(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return y * 1.0, x * (0.5 * x + a) * (a - 0.5 * x)


class AnalyticDoubleWell:
    """The periodically forced double-well flow (no parameters)."""

    kind = "dwp"

    def velocity(self, x, y, t):
        return dwp_velocity(x, y, t)

    def __repr__(self):
        return "AnalyticDoubleWell()"


class FunctionField:
    """Wrap ``f(x, y, t) -> (u, v)`` (vectorised over numpy arrays) as a field."""

    kind = "function"

    def __init__(self, f):
        self._f = f

    def velocity(self, x, y, t):
        u, v = self._f(np.asarray(x, dtype=float), np.asarray(y, dtype=float), t)
        return np.broadcast_to(u, np.shape(x)) * 1.0, np.broadcast_to(v, np.shape(x)) * 1.0


@dataclass(frozen=True, eq=False)
class GriddedField:
    """Node-sampled velocity on a uniform lattice, linear in time.

    ``u`` and ``v`` have shape ``(n_times, ny, nx)``.  Closed axes carry
    nodes on both domain edges; periodic axes omit the upper edge.
    """

    domain: Domain
    nx: int
    ny: int
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray

    kind = "gridded"

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        u = np.ascontiguousarray(self.u, dtype=float)
        v = np.ascontiguousarray(self.v, dtype=float)
        if self.nx < 2 or self.ny < 2:
            raise FieldError(f"need at least 2 nodes per axis, got {self.nx}x{self.ny}")
        if times.ndim != 1 or times.size == 0:
            raise FieldError("times must be a nonempty 1-D sequence")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise FieldError("times must be strictly increasing")
        shape = (times.size, self.ny, self.nx)
        if u.shape != shape or v.shape != shape:
            raise FieldError(f"velocity arrays must have shape {shape}, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(np.isfinite(times))):
            raise FieldError("non-finite values in gridded field")
        for arr in (times, u, v):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def dx(self) -> float:
        d = self.domain
        return d.width / (self.nx if d.periodic_x else self.nx - 1)

    @property
    def dy(self) -> float:
        d = self.domain
        return d.height / (self.ny if d.periodic_y else self.ny - 1)

    def node_coords(self):
        """1-D node coordinates along x and y."""
        d = self.domain
        return d.x_min + self.dx * np.arange(self.nx), d.y_min + self.dy * np.arange(self.ny)

    def check_time(self, t) -> None:
        """Raise :class:`FieldError` for times outside the sampled range.

        A single-slice field is steady and accepts every finite time.
        """
        t = np.asarray(t, dtype=float)
        if self.times.size == 1:
            if np.any(~np.isfinite(t)):
                raise FieldError(f"non-finite time {t}")
            return
        t0, t1 = float(self.times[0]), float(self.times[-1])
        slack = _TIME_SLACK * max(1.0, abs(t0), abs(t1))
        if np.any(t < t0 - slack) or np.any(t > t1 + slack) or np.any(~np.isfinite(t)):
            raise FieldError(f"time {t} outside sampled range [{t0}, {t1}]")

    def time_weights(self, t: float):
        """Bracketing slice indices ``(k0, k1)`` and weight of ``k1``."""
        self.check_time(t)
        times = self.times
        if times.size == 1:
            return 0, 0, 0.0
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), times.size - 2)
        w = (t - times[k]) / (times[k + 1] - times[k])
        return k, k + 1, float(min(max(w, 0.0), 1.0))

    def _axis(self, coord, lo, step, n, periodic):
        s = (coord - lo) / step
        # snap lattice coordinates that the division left a few ulps off a node
        r = np.rint(s)
        s = np.where(np.abs(s - r) <= 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(r)), r, s)
        if periodic:
            s = np.mod(s, n)
            i0 = np.floor(s).astype(np.int64)
            f = s - i0
            i0 = np.where(i0 >= n, 0, i0)
            i1 = np.where(i0 + 1 >= n, 0, i0 + 1)
            return i0, i1, f
        s = np.clip(s, 0.0, n - 1.0)
        i0 = np.minimum(np.floor(s).astype(np.int64), n - 2)
        return i0, i0 + 1, s - i0

    def _spatial(self, arr, x, y):
        d = self.domain
        i0, i1, fx = self._axis(x, d.x_min, self.dx, self.nx, d.periodic_x)
        j0, j1, fy = self._axis(y, d.y_min, self.dy, self.ny, d.periodic_y)
        return ((1 - fx) * (1 - fy) * arr[j0, i0] + fx * (1 - fy) * arr[j0, i1]
                + (1 - fx) * fy * arr[j1, i0] + fx * fy * arr[j1, i1])

    def velocity(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k0, k1, w = self.time_weights(float(t))
        u = self._spatial(self.u[k0], x, y)
        v = self._spatial(self.v[k0], x, y)
        if w > 0.0:
            u = (1 - w) * u + w * self._spatial(self.u[k1], x, y)
            v = (1 - w) * v + w * self._spatial(self.v[k1], x, y)
        return u, v

    def __repr__(self):
        return f"GriddedField({self.nx}x{self.ny}, {self.times.size} slices, t=[{self.times[0]}, {self.times[-1]}])"


def sample_gridded(field: GriddedField, point, t: float):
    u, v = field.velocity(point[0], point[1], t)
    return float(u), float(v)


_MANIFEST_KEYS = ("nx", "ny", "x_min", "x_max", "y_min", "y_max",
                  "periodic_x", "periodic_y", "times", "slice_files")


def load_gridded_field(path) -> GriddedField:
    """Read and validate a dataset directory."""
    path = os.fspath(path)
    mpath = os.path.join(path, "manifest.json")
    if not os.path.isfile(mpath):
        raise FieldError(f"missing manifest: {mpath}")
    try:
        with open(mpath, encoding="utf-8") as fh:
            man = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FieldError(f"unreadable manifest {mpath}: {exc}") from exc
    if not isinstance(man, dict):
        raise FieldError("manifest must be a JSON object")
    missing = [k for k in _MANIFEST_KEYS if k not in man]
    if missing:
        raise FieldError(f"manifest lacks keys {missing}")
    nx, ny = man["nx"], man["ny"]
    if not all(isinstance(n, int) and not isinstance(n, bool) for n in (nx, ny)):
        raise FieldError("nx and ny must be integers")
    if not all(isinstance(man[k], bool) for k in ("periodic_x", "periodic_y")):
        raise FieldError("periodic_x and periodic_y must be booleans")
    times = man["times"]
    files = man["slice_files"]
    if not isinstance(times, list) or not isinstance(files, list) or len(times) != len(files):
        raise FieldError("times and slice_files must be lists of equal length")
    try:
        domain = Domain(float(man["x_min"]), float(man["x_max"]), float(man["y_min"]),
                        float(man["y_max"]), man["periodic_x"], man["periodic_y"])
        times = np.array(times, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FieldError(f"bad manifest values: {exc}") from exc
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise FieldError("times must be strictly increasing")

    count = nx * ny
    u = np.empty((len(files), ny, nx))
    v = np.empty((len(files), ny, nx))
    for k, name in enumerate(files):
        fpath = os.path.join(path, name)
        try:
            raw = np.fromfile(fpath, dtype="<f8")
        except OSError as exc:
            raise FieldError(f"unreadable slice {fpath}: {exc}") from exc
        if raw.size != 2 * count or os.path.getsize(fpath) != 16 * count:
            raise FieldError(f"slice {name}: expected {2 * count} float64 values, found "
                             f"{os.path.getsize(fpath)} bytes")
        if not np.all(np.isfinite(raw)):
            raise FieldError(f"slice {name}: non-finite values")
        u[k] = raw[:count].reshape(ny, nx)
        v[k] = raw[count:].reshape(ny, nx)
    return GriddedField(domain, nx, ny, times, u, v)


def save_gridded_field(field: GriddedField, path, prefix: str = "slice") -> None:
    """Write ``field`` in the dataset directory layout read by :func:`load_gridded_field`."""
    path = os.fspath(path)
    os.makedirs(path, exist_ok=True)
    width = max(4, len(str(field.times.size - 1)))
    files = []
    for k in range(field.times.size):
        name = f"{prefix}_{k:0{width}d}.bin"
        block = np.concatenate([field.u[k].ravel(), field.v[k].ravel()]).astype("<f8")
        block.tofile(os.path.join(path, name))
        files.append(name)
    d = field.domain
    man = {
        "nx": field.nx, "ny": field.ny,
        "x_min": d.x_min, "x_max": d.x_max, "y_min": d.y_min, "y_max": d.y_max,
        "periodic_x": d.periodic_x, "periodic_y": d.periodic_y,
        "times": [float(t) for t in field.times],
        "slice_files": files,
    }
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(man, fh, indent=2)
        fh.write("\n")


def dwp_gridded(domain: Domain, nx: int, ny: int, times) -> GriddedField:
    """Sample the double well on the node lattice of a gridded field."""
    if nx < 2 or ny < 2:
        raise FieldError("nx and ny must be >= 2")
    times = np.asarray(times, dtype=float)
    dx = domain.width / (nx if domain.periodic_x else nx - 1)
    dy = domain.height / (ny if domain.periodic_y else ny - 1)
    X, Y = np.meshgrid(domain.x_min + dx * np.arange(nx), domain.y_min + dy * np.arange(ny))
    u = np.empty((times.size, ny, nx))
    v = np.empty_like(u)
    for k, t in enumerate(times):
        u[k], v[k] = dwp_velocity(X, Y, t)
    return GriddedField(domain, nx, ny, times, u, v)
