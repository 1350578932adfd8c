import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localulam.geometry import (Domain, Patch, bin_of, bins_in_patch, bins_of_points, build_grid,
                                lattice_offsets, seed_points)


def test_depth_12_on_double_well_domain():
    g = build_grid(Domain(-4, 4, -4, 4), 12)
    assert (g.nx, g.ny) == (64, 64)
    assert g.bin_width == pytest.approx(0.125)
    assert g.n_bins == 4096


def test_depth_14_on_periodic_square():
    g = build_grid(Domain(0, 2 * math.pi, 0, 2 * math.pi, True, True), 14)
    assert (g.nx, g.ny) == (128, 128)


def test_depth_2_centres(unit_domain):
    g = build_grid(unit_domain, 2)
    np.testing.assert_allclose(g.centres(), [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])


def test_odd_depth_splits_x_first(unit_domain):
    g = build_grid(unit_domain, 5)
    assert (g.nx, g.ny) == (8, 4)
    assert g.bin_area == pytest.approx(1 / 32)


@pytest.mark.parametrize("depth", [0, -3, 2.5, True])
def test_bad_depth(unit_domain, depth):
    with pytest.raises(ValueError):
        build_grid(unit_domain, depth)


@pytest.mark.parametrize("bounds", [(0, 0, 0, 1), (1, 0, 0, 1), (0, 1, 0, float("nan"))])
def test_degenerate_domain(bounds):
    with pytest.raises(ValueError):
        Domain(*bounds)


def test_bin_of_examples(unit_domain):
    g = build_grid(unit_domain, 2)
    assert bin_of(g, (0.1, 0.1)) == 0
    assert bin_of(g, (1.5, 0.5)) is None
    assert bin_of(g, (0.75, 0.6)) == 3


def test_bin_of_upper_edge_belongs_to_last_cell(unit_domain):
    g = build_grid(unit_domain, 2)
    assert bin_of(g, (1.0, 1.0)) == 3
    assert bin_of(g, (0.5, 0.0)) == 1


def test_periodic_wrap():
    tp = 2 * math.pi
    g = build_grid(Domain(0, tp, 0, tp, True, True), 6)
    assert bin_of(g, (tp + 0.1, 0.1)) == bin_of(g, (0.1, 0.1))
    assert bin_of(g, (-0.1, 0.1)) == bin_of(g, (tp - 0.1, 0.1))
    assert bin_of(g, (tp, tp)) == 0


def test_patch_bins_lie_in_circle(dwp_grid):
    bins = bins_in_patch(dwp_grid, Patch.circle((-2, 0), 1))
    c = dwp_grid.centres(bins)
    assert np.all(np.hypot(c[:, 0] + 2, c[:, 1]) <= 1)
    assert np.all(np.diff(bins) > 0)


def test_patch_count_matches_brute_force(dwp_grid):
    bins = bins_in_patch(dwp_grid, Patch.circle((-2, 0), 1))
    brute = [b for b in range(dwp_grid.n_bins)
             if math.hypot(dwp_grid.centres([b])[0, 0] + 2, dwp_grid.centres([b])[0, 1]) <= 1]
    assert bins.tolist() == brute


def test_tiny_patch_hits_one_bin(dwp_grid):
    c = dwp_grid.centres([1000])[0]
    bins = bins_in_patch(dwp_grid, Patch.circle(c, 0.3 * dwp_grid.bin_width))
    assert bins.tolist() == [1000]


def test_ellipse_patch():
    g = build_grid(Domain(0, 2 * math.pi, 0, 2 * math.pi, True, True), 14)
    p = Patch((3.75, 4.0), (1.5, 0.75))
    c = g.centres(bins_in_patch(g, p))
    assert p.shape == "ellipse"
    assert np.ptp(c[:, 0]) > 2 * np.ptp(c[:, 1]) * 0.9


def test_bad_patch():
    with pytest.raises(ValueError):
        Patch.circle((0, 0), 0)


def test_seed_lattice(unit_domain):
    g = build_grid(unit_domain, 2)
    assert len(seed_points(g, 0, 100)) == 100
    np.testing.assert_allclose(seed_points(g, 0, 1), [[0.25, 0.25]])
    unit = build_grid(Domain(0, 2, 0, 2), 2)
    np.testing.assert_allclose(seed_points(unit, 0, 4), [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])


@pytest.mark.parametrize("Q", [2, 50, 0])
def test_non_square_Q(Q):
    with pytest.raises(ValueError):
        lattice_offsets(Q)


def test_seeds_stay_in_their_bin(dwp_grid):
    for b in (0, 77, 4095):
        pts = seed_points(dwp_grid, b, 100)
        assert np.all(bins_of_points(dwp_grid, pts[:, 0], pts[:, 1]) == b)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3.999, 3.999), st.floats(-3.999, 3.999), st.integers(1, 12))
def test_partition_property(x, y, depth):
    g = build_grid(Domain(-4, 4, -4, 4), depth)
    b = bin_of(g, (x, y))
    assert b is not None
    x0, y0, x1, y1 = g.corners(b)
    assert x0 <= x < x1 and y0 <= y < y1
    assert g.n_bins * g.bin_area == pytest.approx(g.domain.area, rel=1e-12)
