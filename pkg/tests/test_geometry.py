import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmcontrol.errors import GeometryViolation
from helmcontrol.geometry import (
    FarFieldTarget,
    SectorBounds,
    SourceGeometry,
    cartesian_to_cylindrical,
    cartesian_to_spherical,
    check_distinct_targets,
    check_ocean_target,
    cylindrical_to_cartesian,
    free_direction,
    make_annular_sector_grid,
    make_farfield_patch,
    make_ocean_farfield_patch,
    make_sphere_patch_basis,
    offset_region,
    spherical_to_cartesian,
    write_points_csv,
)

QUARTER = np.pi / 4
W1 = SectorBounds((0.02, 0.03), (QUARTER, 3 * QUARTER), (3 * QUARTER, 5 * QUARTER))
SOURCE = SourceGeometry((0.0, 0.0, 0.0), 0.01, 0.015)


@settings(max_examples=200)
@given(st.floats(1e-6, 1e6), st.floats(1e-6, np.pi - 1e-6), st.floats(0.0, 2 * np.pi - 1e-9))
def test_spherical_round_trip(r, theta, phi):
    p = spherical_to_cartesian(r, theta, phi)
    back = spherical_to_cartesian(*cartesian_to_spherical(p))
    assert np.linalg.norm(back - p) <= 1e-12 * r


@settings(max_examples=200)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-20, 0))
def test_cylindrical_round_trip(x, y, z):
    p = np.array([x, y, z])
    back = cylindrical_to_cartesian(*cartesian_to_cylindrical(p))
    assert np.allclose(back, p, rtol=1e-12, atol=1e-12)


def test_source_geometry_ordering():
    with pytest.raises(GeometryViolation):
        SourceGeometry((0, 0, 0), 0.02, 0.015)
    with pytest.raises(GeometryViolation):
        SourceGeometry((0, 0, 0), 0.0, 0.015)


def test_basis_of_234_patches():
    b = make_sphere_patch_basis((0, 0, 0), 0.01, 13, 18)
    assert len(b) == 234
    assert b.areas.sum() == pytest.approx(4 * np.pi * 1e-4, rel=1e-12)
    assert b.areas.sum() == pytest.approx(1.256637e-3, rel=1e-6)
    assert np.max(np.abs(np.linalg.norm(b.centroids, axis=1) - 0.01)) <= 1e-12 * 0.01
    assert np.max(np.abs(np.linalg.norm(b.normals, axis=1) - 1)) <= 1e-12


def test_single_patch_is_whole_sphere():
    b = make_sphere_patch_basis((0, 0, 0), 1.0, 1, 1)
    assert len(b) == 1
    assert b.areas[0] == pytest.approx(4 * np.pi, rel=1e-14)


def test_zero_counts_rejected():
    with pytest.raises(ValueError):
        make_sphere_patch_basis((0, 0, 0), 0.01, 0, 18)


@settings(max_examples=50)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(1e-3, 10.0),
       st.sampled_from(["centroid", "gauss2"]))
def test_patch_partition(n_lat, n_lon, radius, quad):
    b = make_sphere_patch_basis((1.0, -2.0, 0.5), radius, n_lat, n_lon, quad)
    assert b.areas.sum() == pytest.approx(4 * np.pi * radius**2, rel=1e-12)
    assert b.weights.sum() == pytest.approx(4 * np.pi * radius**2, rel=1e-12)
    node_r = np.linalg.norm(b.nodes - b.center, axis=-1)
    assert np.allclose(node_r, radius, rtol=1e-12)


def test_gauss2_integrates_polynomial_exactly():
    # z^2 over the unit sphere is 4 pi / 3; the rule is exact in cos(theta) up to cubic.
    b = make_sphere_patch_basis((0, 0, 0), 1.0, 5, 7, "gauss2")
    assert np.sum(b.weights * b.nodes[..., 2] ** 2) == pytest.approx(4 * np.pi / 3, rel=1e-13)


def test_paper_sector_grid():
    reg = make_annular_sector_grid("W1", (0, 0, 0), W1, (10, 16, 29), SOURCE)
    assert len(reg) == 4640
    r, theta, phi = cartesian_to_spherical(reg.points)
    assert np.all((r >= 0.02 - 1e-15) & (r <= 0.03 + 1e-15))
    assert np.all((theta >= QUARTER - 1e-12) & (theta <= 3 * QUARTER + 1e-12))
    assert np.all((phi >= 3 * QUARTER - 1e-12) & (phi <= 5 * QUARTER + 1e-12))
    assert np.all(reg.prescribed == 0)


def test_degenerate_sector_gives_midpoint():
    bounds = SectorBounds((0.02, 0.02), (0.2, 0.6), (1.0, 2.0))
    reg = make_annular_sector_grid("P", (0, 0, 0), bounds, (1, 1, 1))
    assert len(reg) == 1
    assert np.allclose(reg.points[0], spherical_to_cartesian(0.02, 0.4, 1.5), atol=1e-15)


def test_sector_touching_source_rejected():
    near = SectorBounds((0.015, 0.03), (QUARTER, 3 * QUARTER), (0.0, 1.0))
    with pytest.raises(GeometryViolation, match="region 'bad'"):
        make_annular_sector_grid("bad", (0, 0, 0), near, (3, 3, 3), SOURCE)


def test_corner_check_catches_coarse_grid():
    # A one-node grid sits at the midpoint, but the sector reaches into the ball.
    bounds = SectorBounds((0.01, 0.05), (QUARTER, 3 * QUARTER), (0.0, 1.0))
    with pytest.raises(GeometryViolation, match="corners"):
        make_annular_sector_grid("coarse", (0, 0, 0), bounds, (1, 1, 1), SOURCE)


def test_grid_is_deterministic():
    a = make_annular_sector_grid("W1", (0, 0, 0), W1, (10, 16, 29), SOURCE)
    b = make_annular_sector_grid("W1", (0, 0, 0), W1, (10, 16, 29), SOURCE)
    assert a.points.tobytes() == b.points.tobytes()


def test_offset_half_on_two_node_axis_gives_midpoints():
    bounds = SectorBounds((0.02, 0.03), (1.0, 1.2), (0.0, 0.4))
    reg = make_annular_sector_grid("R", (0, 0, 0), bounds, (2, 2, 2))
    off = offset_region(reg, 0.5)
    r, theta, phi = cartesian_to_spherical(off.points)
    assert np.allclose(np.unique(np.round(r, 14)), [0.0225, 0.0275])
    assert np.allclose(np.unique(np.round(theta, 14)), [1.05, 1.15])
    assert np.allclose(np.unique(np.round(phi, 14)), [0.1, 0.3])


@settings(max_examples=50)
@given(st.floats(0.01, 0.5), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6))
def test_offset_grid_stays_inside(frac, n_r, n_t, n_p):
    reg = make_annular_sector_grid("W1", (0, 0, 0), W1, (n_r, n_t, n_p), SOURCE)
    off = offset_region(reg, frac)
    assert len(off) == len(reg)
    r, theta, phi = cartesian_to_spherical(off.points)
    assert np.all((r >= 0.02) & (r <= 0.03))
    assert np.all((theta >= QUARTER - 1e-12) & (theta <= 3 * QUARTER + 1e-12))
    assert np.all((phi >= 3 * QUARTER - 1e-12) & (phi <= 5 * QUARTER + 1e-12))


def test_farfield_patch_center_and_norms():
    d = (-1.0, 0.0, 0.0)
    dirs = make_farfield_patch(d, 0.1, 11)
    assert dirs.shape == (121, 3)
    assert np.array_equal(dirs[60], np.array(d))
    assert np.max(np.abs(np.linalg.norm(dirs, axis=1) - 1)) <= 1e-12
    # Every node is within the angular half-width (diagonal corners reach sqrt(2) of it).
    ang = np.arccos(np.clip(dirs @ np.array(d), -1, 1))
    assert ang.max() <= np.sqrt(2) * 0.1 + 1e-12


def test_farfield_patch_at_pole():
    dirs = make_farfield_patch((0.0, 0.0, 1.0), 0.2, 5)
    assert np.all(np.isfinite(dirs))
    assert np.array_equal(dirs[12], [0.0, 0.0, 1.0])


def test_farfield_patch_even_rejected():
    with pytest.raises(ValueError):
        make_farfield_patch((1.0, 0.0, 0.0), 0.1, 10)


def test_ocean_patch_clamped_into_layer():
    grid = make_ocean_farfield_patch(np.pi, -10.0, 0.1, 11, -20.0)
    assert grid.shape == (121, 2)
    assert tuple(grid[60]) == (np.pi, -10.0)
    # A target near the floor forces clamping; every depth must stay strictly inside.
    low = make_ocean_farfield_patch(np.pi, -19.5, 0.1, 11, -20.0)
    assert np.all((low[:, 1] > -20.0) & (low[:, 1] < 0.0))
    assert np.min(low[:, 1]) > -20.0 and np.isclose(np.min(low[:, 1]), -20.0, atol=1e-6)


def test_direction_and_target_checks():
    with pytest.raises(ValueError):
        free_direction((1.0, 1.0, 0.0))
    free_direction((0.5, 0.5, -np.sqrt(0.5)))
    with pytest.raises(GeometryViolation):
        check_ocean_target(0.0, 0.0, -20.0)
    with pytest.raises(GeometryViolation):
        check_ocean_target(0.0, -20.0, -20.0)
    with pytest.raises(ValueError):
        check_distinct_targets([FarFieldTarget(0j, theta=np.pi, z=-10.0),
                                FarFieldTarget(1j, theta=-np.pi, z=-10.0)])


def test_points_csv(tmp_path):
    b = make_sphere_patch_basis((0, 0, 0), 0.01, 3, 4)
    write_points_csv(tmp_path / "basis.csv", b.centroids, b)
    rows = list(csv.reader((tmp_path / "basis.csv").open()))
    assert rows[0] == ["id", "x", "y", "z", "area", "nx", "ny", "nz"]
    assert len(rows) == 13
    # Full double precision survives the round trip.
    assert float(rows[1][1]) == b.centroids[0, 0]
