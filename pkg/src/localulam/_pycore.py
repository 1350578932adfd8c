"""Pure numpy advection kernels; same signatures as the compiled ``_core``."""
import numpy as np


def _forcing(t):
    s = t % 100.0
    if s <= 10.0:
        return 1.0
    if s <= 40.0:
        return np.cos((s - 10.0) * np.pi / 60.0) ** 2
    if s <= 60.0:
        return 0.0
    if s <= 90.0:
        return np.cos((s - 30.0) * np.pi / 60.0) ** 2
    return 1.0


def _dwp_rhs(x, y, a):
    return y, x * (0.5 * x + a) * (a - 0.5 * x)


def advect_dwp(pts, t0, tau, substeps):
    """RK4-advect ``(k, 2)`` points through the double well; returns a new array."""
    pts = np.asarray(pts, dtype=float)
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    h = tau / substeps
    for s in range(substeps):
        t = t0 + s * h
        a1 = _forcing(t)
        a2 = _forcing(t + 0.5 * h)
        a4 = _forcing(t + h)
        k1x, k1y = _dwp_rhs(x, y, a1)
        k2x, k2y = _dwp_rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y, a2)
        k3x, k3y = _dwp_rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y, a2)
        k4x, k4y = _dwp_rhs(x + h * k3x, y + h * k3y, a4)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return np.column_stack([x, y])


def _axis(c, lo, step, n, periodic):
    s = (c - lo) / step
    if periodic:
        s = s - n * np.floor(s / n)
        i0 = np.floor(s).astype(np.int64)
        f = s - i0
        i0 = np.where(i0 >= n, 0, i0)
        i1 = np.where(i0 + 1 >= n, 0, i0 + 1)
        return i0, i1, f
    s = np.minimum(np.maximum(s, 0.0), n - 1.0)
    i0 = np.minimum(np.floor(s).astype(np.int64), n - 2)
    return i0, i0 + 1, s - i0


def _bilinear(arr, ix, iy):
    i0, i1, fx = ix
    j0, j1, fy = iy
    return ((1.0 - fx) * (1.0 - fy) * arr[j0, i0] + fx * (1.0 - fy) * arr[j0, i1]
            + (1.0 - fx) * fy * arr[j1, i0] + fx * fy * arr[j1, i1])


def _bracket(times, t):
    n = times.shape[0]
    if n == 1:
        return 0, 0, 0.0
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), n - 2)
    w = (t - times[k]) / (times[k + 1] - times[k])
    return k, k + 1, min(max(w, 0.0), 1.0)


def _gridded_rhs(x, y, br, u, v, geom):
    x_min, y_min, dx, dy, nx, ny, px, py = geom
    ix = _axis(x, x_min, dx, nx, px)
    iy = _axis(y, y_min, dy, ny, py)
    k0, k1, w = br
    uu = _bilinear(u[k0], ix, iy)
    vv = _bilinear(v[k0], ix, iy)
    if w > 0.0:
        uu = (1.0 - w) * uu + w * _bilinear(u[k1], ix, iy)
        vv = (1.0 - w) * vv + w * _bilinear(v[k1], ix, iy)
    return uu, vv


def advect_gridded(pts, t0, tau, substeps, times, u, v,
                   x_min, y_min, dx, dy, nx, ny, periodic_x, periodic_y):
    """RK4-advect points through a node-sampled field, bilinear in space, linear in time."""
    pts = np.asarray(pts, dtype=float)
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    geom = (x_min, y_min, dx, dy, nx, ny, bool(periodic_x), bool(periodic_y))
    h = tau / substeps
    for s in range(substeps):
        t = t0 + s * h
        b1 = _bracket(times, t)
        b2 = _bracket(times, t + 0.5 * h)
        b4 = _bracket(times, t + h)
        k1x, k1y = _gridded_rhs(x, y, b1, u, v, geom)
        k2x, k2y = _gridded_rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y, b2, u, v, geom)
        k3x, k3y = _gridded_rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y, b2, u, v, geom)
        k4x, k4y = _gridded_rhs(x + h * k3x, y + h * k3y, b4, u, v, geom)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return np.column_stack([x, y])
