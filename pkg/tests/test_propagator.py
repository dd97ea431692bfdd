import numpy as np
import pytest

from helmcontrol.errors import GeometryViolation, NumericalFailure
from helmcontrol.geometry import (
    FarFieldTarget,
    SectorBounds,
    make_annular_sector_grid,
    make_sphere_patch_basis,
    spherical_to_cartesian,
)
from helmcontrol.greens import Medium, ModeTruncation, phi_free
from helmcontrol import propagator
from helmcontrol.propagator import (
    assemble,
    assemble_scenario,
    condition_report,
    near_field_matrix,
    read_system,
    write_system,
)
from helmcontrol.scenario import load_bundled

FREE = Medium("free_space", 10.0)
TRUNC = ModeTruncation()
Q = np.pi / 4


@pytest.fixture(scope="module")
def paper_system():
    return assemble_scenario(load_bundled("freespace_null"))


def small_problem(prescribed_scale=1.0):
    basis = make_sphere_patch_basis((0, 0, 0), 0.01, 4, 6)
    reg = make_annular_sector_grid("W", (0, 0, 0), SectorBounds((0.02, 0.03), (Q, 3 * Q), (0, 1)),
                                   (2, 3, 4))
    reg.prescribed = prescribed_scale * np.exp(1j * np.arange(len(reg)))
    targets = [FarFieldTarget(prescribed_scale * 0.01, direction=(-1.0, 0.0, 0.0)),
               FarFieldTarget(prescribed_scale * 0.02j, direction=(0.0, 0.0, 1.0))]
    return reg, targets, basis


def test_paper_shape(paper_system):
    assert paper_system.shape == (4642, 234)
    assert len(paper_system.row_map) == 4642
    assert len(set(paper_system.row_map)) == 4642
    assert np.all(paper_system.row_weights > 0)


def test_zero_prescriptions_give_zero_rhs():
    reg, targets, basis = small_problem(0.0)
    sysm = assemble([reg], targets, basis, FREE, TRUNC)
    assert np.all(sysm.b == 0)


def brute_force_patch_integral(x, j, n_lat, n_lon, radius, n=100):
    """Midpoint rule with n x n equal-area cells in (cos theta, phi) over patch j."""
    i_lat, i_lon = divmod(j, n_lon)
    tb = np.linspace(0, np.pi, n_lat + 1)[i_lat:i_lat + 2]
    pb = np.linspace(0, 2 * np.pi, n_lon + 1)[i_lon:i_lon + 2]
    mu_edges = np.linspace(np.cos(tb[1]), np.cos(tb[0]), n + 1)
    ph_edges = np.linspace(pb[0], pb[1], n + 1)
    M, P = np.meshgrid(0.5 * (mu_edges[1:] + mu_edges[:-1]), 0.5 * (ph_edges[1:] + ph_edges[:-1]),
                       indexing="ij")
    nodes = spherical_to_cartesian(radius, np.arccos(M), P).reshape(-1, 3)
    dA = radius**2 * (mu_edges[1] - mu_edges[0]) * (ph_edges[1] - ph_edges[0])
    return np.sum(phi_free(x, nodes, 10.0)) * dA


def _nearest_patch_error(quadrature):
    basis = make_sphere_patch_basis((0, 0, 0), 0.01, 13, 18, quadrature)
    # Closest W1 node to the source: r = 0.02 on the equator, straight above a patch centre.
    x = 2.0 * basis.centroids[6 * 18 + 9]
    j = 6 * 18 + 9
    entry = near_field_matrix(x[None], basis, FREE, TRUNC)[0, j]
    brute = brute_force_patch_integral(x, j, 13, 18, 0.01)
    return abs(entry - brute) / abs(brute)


def test_one_point_entry_against_brute_force():
    # Known red: the one-point rule is 1.5% off here (second-order in patch size / distance).
    assert _nearest_patch_error("centroid") <= 5e-3


def test_gauss2_entry_against_brute_force():
    assert _nearest_patch_error("gauss2") <= 5e-3


def test_rhs_scales_linearly():
    reg1, targets1, basis = small_problem(1.0)
    reg3, targets3, _ = small_problem(3.0)
    a = assemble([reg1], targets1, basis, FREE, TRUNC)
    b = assemble([reg3], targets3, basis, FREE, TRUNC)
    assert np.array_equal(a.A, b.A)
    assert np.allclose(b.b, 3.0 * a.b, rtol=1e-15, atol=0)


def test_permutation_equivariance():
    reg, targets, basis = small_problem()
    sysm = assemble([reg], targets, basis, FREE, TRUNC)
    perm = np.random.default_rng(0).permutation(len(reg))
    reg.points = reg.points[perm]
    reg.prescribed = reg.prescribed[perm]
    permuted = assemble([reg], targets, basis, FREE, TRUNC)
    rows = sysm.rows_of("W")
    assert np.array_equal(permuted.A[rows], sysm.A[rows][perm])
    assert np.array_equal(permuted.b[rows], sysm.b[rows][perm])
    far = sysm.rows_of("farfield")
    assert np.array_equal(permuted.A[far], sysm.A[far])


@pytest.mark.parametrize("medium", [FREE, Medium("ocean", 10.0, -20.0)])
def test_threaded_assembly_is_bit_identical(medium):
    c = (0, 0, 0) if not medium.is_ocean else (0, 0, -10.0)
    basis = make_sphere_patch_basis(c, 0.01, 6, 8)
    reg = make_annular_sector_grid("W", c, SectorBounds((0.02, 0.03), (Q, 3 * Q), (0, 1)),
                                   (8, 9, 10))
    one = near_field_matrix(reg.points, basis, medium, TRUNC, threads=1)
    many = near_field_matrix(reg.points, basis, medium, TRUNC, threads=4)
    assert one.tobytes() == many.tobytes()


def test_row_weights_scale_rows():
    reg, targets, basis = small_problem()
    plain = assemble([reg], targets, basis, FREE, TRUNC)
    weighted = assemble([reg], targets, basis, FREE, TRUNC, {"W": 2.0}, farfield_weight=5.0)
    assert np.allclose(weighted.A, plain.A * weighted.row_weights[:, None], rtol=1e-15)
    A, b = weighted.unweighted()
    assert np.allclose(A, plain.A, rtol=1e-15) and np.allclose(b, plain.b, rtol=1e-15)


def test_point_inside_fictitious_ball_rejected():
    reg, targets, basis = small_problem()
    reg.points = reg.points.copy()
    reg.points[3] = [0.001, 0.0, 0.0]
    with pytest.raises(GeometryViolation, match="region 'W'"):
        assemble([reg], targets, basis, FREE, TRUNC)


def test_non_finite_entry_reported(monkeypatch):
    reg, targets, basis = small_problem()
    monkeypatch.setattr(propagator, "phi_free", lambda x, y, k: np.full(np.broadcast_shapes(
        np.shape(x)[:-1], np.shape(y)[:-1]), np.nan + 0j))
    with pytest.raises(NumericalFailure, match="row 0"):
        assemble([reg], targets, basis, FREE, TRUNC)


def test_condition_report_identity_and_rank():
    rep = condition_report(np.eye(5, dtype=complex))
    assert rep["sigma_max"] == rep["sigma_min"] == 1.0
    assert rep["effective_rank"] == 5
    A = np.random.default_rng(0).normal(size=(6, 4)) + 0j
    dup = np.vstack([A, A[2]])
    assert condition_report(dup)["effective_rank"] == condition_report(A)["effective_rank"] == 4


def test_paper_system_is_ill_posed(paper_system):
    rep = condition_report(paper_system.A)
    assert rep["sigma_ratio"] < 1e-6


def test_binary_round_trip(tmp_path):
    reg, targets, basis = small_problem()
    sysm = assemble([reg], targets, basis, FREE, TRUNC)
    path = tmp_path / "system.bin"
    write_system(path, sysm, flags=7)
    raw = path.read_bytes()
    assert raw[:4] == b"HCPM" and len(raw) == 16 + 16 * (sysm.A.size + sysm.b.size)
    A, b, flags = read_system(path)
    assert flags == 7 and np.array_equal(A, sysm.A) and np.array_equal(b, sysm.b)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        read_system(path)
