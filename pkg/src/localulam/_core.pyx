# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 advection kernels.

Mirrors ``_pycore`` operation for operation; the loops release the GIL so
callers may advect disjoint point batches from several threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, floor, fmod, M_PI

cnp.import_array()


cdef inline double _forcing(double t) noexcept nogil:
    cdef double s = fmod(t, 100.0)
    cdef double c
    if s < 0.0:
        s += 100.0
    if s <= 10.0:
        return 1.0
    if s <= 40.0:
        c = cos((s - 10.0) * M_PI / 60.0)
        return c * c
    if s <= 60.0:
        return 0.0
    if s <= 90.0:
        c = cos((s - 30.0) * M_PI / 60.0)
        return c * c
    return 1.0


cdef inline double _dwp_ydot(double x, double a) noexcept nogil:
    return x * (0.5 * x + a) * (a - 0.5 * x)


def advect_dwp(pts, double t0, double tau, int substeps):
    cdef const double[:, ::1] src = np.ascontiguousarray(pts, dtype=np.float64)
    out_arr = np.array(src, dtype=np.float64, copy=True)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n = out.shape[0], i
    cdef int s
    cdef double h = tau / substeps, t, a1, a2, a4
    cdef double x, y, k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y
    with nogil:
        for s in range(substeps):
            t = t0 + s * h
            a1 = _forcing(t)
            a2 = _forcing(t + 0.5 * h)
            a4 = _forcing(t + h)
            for i in range(n):
                x = out[i, 0]
                y = out[i, 1]
                k1x = y
                k1y = _dwp_ydot(x, a1)
                k2x = y + 0.5 * h * k1y
                k2y = _dwp_ydot(x + 0.5 * h * k1x, a2)
                k3x = y + 0.5 * h * k2y
                k3y = _dwp_ydot(x + 0.5 * h * k2x, a2)
                k4x = y + h * k3y
                k4y = _dwp_ydot(x + h * k3x, a4)
                out[i, 0] = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                out[i, 1] = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return out_arr


cdef struct Geom:
    double x_min
    double y_min
    double dx
    double dy
    Py_ssize_t nx
    Py_ssize_t ny
    bint px
    bint py


cdef struct Bracket:
    Py_ssize_t k0
    Py_ssize_t k1
    double w


cdef inline void _axis(double c, double lo, double step, Py_ssize_t n, bint periodic,
                       Py_ssize_t* i0, Py_ssize_t* i1, double* f) noexcept nogil:
    cdef double s = (c - lo) / step
    if periodic:
        s = s - n * floor(s / n)
        i0[0] = <Py_ssize_t> s
        f[0] = s - i0[0]
        if i0[0] >= n:
            i0[0] = 0
        i1[0] = i0[0] + 1
        if i1[0] >= n:
            i1[0] = 0
        return
    if s < 0.0:
        s = 0.0
    if s > n - 1.0:
        s = n - 1.0
    # s is non-negative here, so truncation is floor
    i0[0] = <Py_ssize_t> s
    if i0[0] > n - 2:
        i0[0] = n - 2
    i1[0] = i0[0] + 1
    f[0] = s - i0[0]


cdef inline double _bilinear(const double* a, Py_ssize_t k, Py_ssize_t nx, Py_ssize_t ny,
                            Py_ssize_t i0, Py_ssize_t i1, Py_ssize_t j0, Py_ssize_t j1,
                            double fx, double fy) noexcept nogil:
    cdef const double* r0 = a + (k * ny + j0) * nx
    cdef const double* r1 = a + (k * ny + j1) * nx
    return ((1.0 - fy) * ((1.0 - fx) * r0[i0] + fx * r0[i1])
            + fy * ((1.0 - fx) * r1[i0] + fx * r1[i1]))


cdef inline void _rhs(double x, double y, Bracket b, const double* u, const double* v,
                      Geom g, double* ou, double* ov) noexcept nogil:
    cdef Py_ssize_t i0, i1, j0, j1
    cdef double fx, fy, uu, vv
    _axis(x, g.x_min, g.dx, g.nx, g.px, &i0, &i1, &fx)
    _axis(y, g.y_min, g.dy, g.ny, g.py, &j0, &j1, &fy)
    uu = _bilinear(u, b.k0, g.nx, g.ny, i0, i1, j0, j1, fx, fy)
    vv = _bilinear(v, b.k0, g.nx, g.ny, i0, i1, j0, j1, fx, fy)
    if b.w > 0.0:
        uu = (1.0 - b.w) * uu + b.w * _bilinear(u, b.k1, g.nx, g.ny, i0, i1, j0, j1, fx, fy)
        vv = (1.0 - b.w) * vv + b.w * _bilinear(v, b.k1, g.nx, g.ny, i0, i1, j0, j1, fx, fy)
    ou[0] = uu
    ov[0] = vv


cdef Bracket _bracket(const double[::1] times, double t):
    cdef Bracket b
    cdef Py_ssize_t n = times.shape[0]
    if n == 1:
        b.k0 = 0
        b.k1 = 0
        b.w = 0.0
        return b
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), n - 2)
    b.k0 = k
    b.k1 = k + 1
    b.w = (t - times[k]) / (times[k + 1] - times[k])
    b.w = min(max(b.w, 0.0), 1.0)
    return b


def advect_gridded(pts, double t0, double tau, int substeps, times, u, v,
                   double x_min, double y_min, double dx, double dy,
                   Py_ssize_t nx, Py_ssize_t ny, bint periodic_x, bint periodic_y):
    cdef const double[:, ::1] src = np.ascontiguousarray(pts, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[:, :, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[:, :, ::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out_arr = np.array(src, dtype=np.float64, copy=True)
    cdef double[:, ::1] out = out_arr
    cdef Geom g
    g.x_min = x_min
    g.y_min = y_min
    g.dx = dx
    g.dy = dy
    g.nx = nx
    g.ny = ny
    g.px = periodic_x
    g.py = periodic_y
    cdef Py_ssize_t n = out.shape[0], i
    cdef int s
    cdef double h = tau / substeps, t
    cdef double x, y, k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y
    cdef Bracket b1, b2, b4
    cdef const double* up = &uv[0, 0, 0]
    cdef const double* vp = &vv[0, 0, 0]
    for s in range(substeps):
        t = t0 + s * h
        b1 = _bracket(tv, t)
        b2 = _bracket(tv, t + 0.5 * h)
        b4 = _bracket(tv, t + h)
        with nogil:
            for i in range(n):
                x = out[i, 0]
                y = out[i, 1]
                _rhs(x, y, b1, up, vp, g, &k1x, &k1y)
                _rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y, b2, up, vp, g, &k2x, &k2y)
                _rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y, b2, up, vp, g, &k3x, &k3y)
                _rhs(x + h * k3x, y + h * k3y, b4, up, vp, g, &k4x, &k4y)
                out[i, 0] = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                out[i, 1] = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return out_arr
