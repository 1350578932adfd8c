"""Compare the compiled and numpy advection kernels.

Usage::

    python benchmarks/bench_kernels.py [--points 20800] [--substeps 20] [--repeat 5]

Times one step of the double well and of a 192x192 gridded copy of it on
the test-point lattice of the left-well patch, checks that both backends
agree, and prints a small table.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from localulam.fields import dwp_gridded
from localulam.geometry import Domain, Patch, bins_in_patch, build_grid, lattice_offsets
from localulam.kernels import available_backends, get_backend


def lattice(n_points: int) -> np.ndarray:
    grid = build_grid(Domain(-4.0, 4.0, -4.0, 4.0), 12)
    bins = bins_in_patch(grid, Patch.circle((-2.0, 0.0), 1.0))
    off = lattice_offsets(100)
    i, j = grid.ij(bins)
    x = grid.domain.x_min + (i[:, None] + off[None, :, 0]) * grid.bin_width
    y = grid.domain.y_min + (j[:, None] + off[None, :, 1]) * grid.bin_height
    pts = np.column_stack([x.ravel(), y.ravel()])
    reps = -(-n_points // len(pts))
    return np.tile(pts, (reps, 1))[:n_points].copy()


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20800)
    ap.add_argument("--substeps", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    pts = lattice(args.points)
    fld = dwp_gridded(Domain(-4.0, 4.0, -4.0, 4.0), 192, 192, np.arange(0.0, 12.0))
    d = fld.domain
    cases = {
        "dwp": lambda b: b.advect_dwp(pts, 3.3, 1.0, args.substeps),
        "gridded": lambda b: b.advect_gridded(pts, 3.3, 1.0, args.substeps, fld.times, fld.u, fld.v,
                                              d.x_min, d.y_min, fld.dx, fld.dy, fld.nx, fld.ny,
                                              False, False),
    }
    backends = available_backends()
    print(f"{len(pts)} points, {args.substeps} RK4 substeps, best of {args.repeat}")
    print(f"{'kernel':<10}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>12}")
    for name, run in cases.items():
        res = {b: best_of(lambda: run(get_backend(b)), args.repeat) for b in backends}
        row = f"{name:<10}" + "".join(f"{res[b][0] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            diff = float(np.abs(res["cython"][1] - res["python"][1]).max())
            row += f"{res['python'][0] / res['cython'][0]:>9.1f}x{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
