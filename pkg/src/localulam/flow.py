"""Fixed-step RK4 flow maps over one analysis time unit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .geometry import Domain
from .kernels import get_backend

__all__ = ["FlowSpec", "rk4_flow", "advect_points", "wrap_periodic"]


@dataclass(frozen=True)
class FlowSpec:
    """Duration ``tau`` of one step, integrated with ``substeps`` RK4 steps."""

    tau: float = 1.0
    substeps: int = 20

    def __post_init__(self):
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if isinstance(self.substeps, bool) or int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps}")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "substeps", int(self.substeps))


def wrap_periodic(pts: np.ndarray, domain: Domain | None) -> np.ndarray:
    if domain is None:
        return pts
    if domain.periodic_x:
        pts[:, 0] = domain.x_min + np.mod(pts[:, 0] - domain.x_min, domain.width)
    if domain.periodic_y:
        pts[:, 1] = domain.y_min + np.mod(pts[:, 1] - domain.y_min, domain.height)
    return pts


def _generic_rk4(field, pts, t0, spec):
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    h = spec.tau / spec.substeps
    for s in range(spec.substeps):
        t = t0 + s * h
        k1x, k1y = field.velocity(x, y, t)
        k2x, k2y = field.velocity(x + 0.5 * h * k1x, y + 0.5 * h * k1y, t + 0.5 * h)
        k3x, k3y = field.velocity(x + 0.5 * h * k2x, y + 0.5 * h * k2y, t + 0.5 * h)
        k4x, k4y = field.velocity(x + h * k3x, y + h * k3y, t + h)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return np.column_stack([x, y])


def advect_points(field, pts, t0: float, spec: FlowSpec, domain: Domain | None = None,
                  backend: str | None = None) -> np.ndarray:
    """Flow an ``(k, 2)`` batch of points from ``t0`` to ``t0 + tau``.

    Coordinates on periodic axes of ``domain`` are wrapped back into it;
    on closed axes the raw, possibly exterior, position is returned.
    """
    pts = np.ascontiguousarray(pts, dtype=float).reshape(-1, 2)
    kind = getattr(field, "kind", None)
    if kind == "dwp":
        out = get_backend(backend).advect_dwp(pts, float(t0), spec.tau, spec.substeps)
    elif kind == "gridded":
        field.check_time([t0, t0 + spec.tau])
        d = field.domain
        out = get_backend(backend).advect_gridded(
            pts, float(t0), spec.tau, spec.substeps, field.times, field.u, field.v,
            d.x_min, d.y_min, field.dx, field.dy, field.nx, field.ny,
            d.periodic_x, d.periodic_y)
    else:
        out = _generic_rk4(field, pts, float(t0), spec)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite state while advecting from t={t0}")
    return wrap_periodic(out, domain)


def rk4_flow(field, point, t0: float, spec: FlowSpec, domain: Domain | None = None):
    """Image of a single point under the one-step flow map."""
    out = advect_points(field, np.asarray(point, dtype=float).reshape(1, 2), t0, spec, domain)
    return float(out[0, 0]), float(out[0, 1])
