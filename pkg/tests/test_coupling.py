import numpy as np
import pytest

from array_emitters.coupling import (
    ArraySystem,
    assemble_lattice_matrix,
    band_edge,
    band_structure,
    impurity_vector,
    lattice_modes,
    patch_displacements,
    uniform_mode_value,
)
from array_emitters.geometry import ImpuritySpec, LatticeConfig, build_geometry
from array_emitters.green import GAMMA_L, circular_dipole, pair_coupling
from array_emitters.toy import V_M1, V_M2, V_PAR, V_PERP, toy_couplings, toy_eigenvalues

# row-major lattice order -> counterclockwise corner order of the 2x2 model
CCW = [0, 2, 3, 1]

# k = 0 collective rates of the default (triangular, 40x40) patch sum at
# a = 0.2, frozen from an independent double-loop evaluation
GAMMA_K0_A02 = 5.751928126585288
J_K0_A02 = -0.10074203311827432


def test_matrix_symmetric_with_exact_diagonal():
    cfg = LatticeConfig(spacing=0.2, n_x=4, n_y=3)
    m = assemble_lattice_matrix(build_geometry(cfg))
    assert np.max(np.abs(m - m.T)) < 1e-12
    np.testing.assert_array_equal(np.diag(m), np.full(12, -0.5j * GAMMA_L))


def test_offdiagonal_is_pair_coupling():
    cfg = LatticeConfig(spacing=0.23, n_x=2, n_y=2)
    geo = build_geometry(cfg)
    m = assemble_lattice_matrix(geo)
    right = circular_dipole("right")
    expected = pair_coupling(geo.lattice_positions[0], geo.lattice_positions[1], right, right)
    assert abs(m[0, 1] - expected) < 1e-15


def test_2x2_eigensystem_matches_toy_model():
    cfg = LatticeConfig(spacing=0.2, n_x=2, n_y=2)
    m = assemble_lattice_matrix(build_geometry(cfg))
    tc = toy_couplings(0.2, 0.01)
    lam_par, lam_perp, lam_m = toy_eigenvalues(tc, 0.0)
    numeric = np.sort_complex(np.linalg.eigvals(m))
    analytic = np.sort_complex([lam_par, lam_perp, lam_m, lam_m])
    assert np.max(np.abs(numeric - analytic)) < 1e-10
    # eigenvector sign patterns of the in-phase and checkerboard modes
    modes = lattice_modes(m)
    for lam, vec in ((lam_par, V_PAR), (lam_perp, V_PERP)):
        idx = int(np.argmin(np.abs(modes.eigenvalues - lam)))
        v = modes.vectors[:, idx][CCW]
        v = v * np.sign((v @ vec).real)
        assert np.max(np.abs(v - vec)) < 1e-10


def test_eigenvalue_passivity(rng):
    for trial in range(4):
        n = int(rng.integers(2, 6))
        cfg = LatticeConfig(spacing=float(0.1 + 0.3 * rng.random()), n_x=n, n_y=n)
        m = assemble_lattice_matrix(build_geometry(cfg))
        assert np.linalg.eigvals(m).imag.max() <= 1e-8 * GAMMA_L


def test_modes_bilinear_orthonormal_and_resolvent(rng):
    cfg = LatticeConfig(spacing=0.17, n_x=4, n_y=4)
    geo = build_geometry(cfg, [ImpuritySpec((1, 1), offset=(0.05, 0.08))])
    m = assemble_lattice_matrix(geo)
    modes = lattice_modes(m)
    assert modes.basis_defect < 1e-9
    g = impurity_vector(geo, 0)
    delta = 4.7
    direct = g.reverse @ np.linalg.solve(delta * np.eye(16) - m, g.forward)
    spectral = modes.resolvent_sum(modes.pair_weights(g.reverse, g.forward), delta)[0]
    assert abs(direct - spectral) / abs(direct) < 1e-10


def test_identical_coupling_vector_symmetries():
    cfg = LatticeConfig(spacing=0.2, n_x=2, n_y=2)
    g = impurity_vector(build_geometry(cfg, [ImpuritySpec((0, 0))]), 0)
    assert np.max(np.abs(g.forward - g.forward[0])) < 1e-14  # all four equal
    assert g.is_symmetric
    # fourfold rotation invariance on a larger array
    cfg10 = LatticeConfig(spacing=0.2, n_x=10, n_y=10)
    geo = build_geometry(cfg10, [ImpuritySpec(cfg10.central_plaquette())])
    gv = impurity_vector(geo, 0).forward
    center = geo.impurity_positions[0][:2]
    rel = geo.lattice_positions[:, :2] - center
    rotated = np.column_stack([-rel[:, 1], rel[:, 0]])
    # map each site to its 90-degree image and compare couplings
    index = {tuple(np.round(p, 9)): i for i, p in enumerate(rel)}
    for i, p in enumerate(rotated):
        j = index[tuple(np.round(p, 9))]
        assert abs(gv[i] - gv[j]) < 1e-12


def test_orthogonal_coupling_checkerboard():
    cfg = LatticeConfig(spacing=0.2, n_x=2, n_y=2)
    g = impurity_vector(
        build_geometry(cfg, [ImpuritySpec((0, 0), configuration="orthogonal")]), 0
    )
    ccw = g.forward[CCW]
    np.testing.assert_allclose(ccw[0], -ccw[1], rtol=0, atol=1e-14)
    np.testing.assert_allclose(ccw[0], ccw[2], rtol=0, atol=1e-14)
    assert abs(ccw @ V_PAR) < 1e-12
    assert not g.is_symmetric


def test_selection_rules_block_diagonalization():
    cfg = LatticeConfig(spacing=0.15, n_x=2, n_y=2)
    g_id = impurity_vector(build_geometry(cfg, [ImpuritySpec((0, 0))]), 0).forward[CCW]
    g_or = impurity_vector(
        build_geometry(cfg, [ImpuritySpec((0, 0), configuration="orthogonal")]), 0
    ).forward[CCW]
    for vec in (V_PERP, V_M1, V_M2):
        assert abs(g_id @ vec) < 1e-12
    for vec in (V_PAR, V_M1, V_M2):
        assert abs(g_or @ vec) < 1e-12


def test_coupling_scales_with_sqrt_gamma_impurity():
    cfg = LatticeConfig(spacing=0.2, n_x=4, n_y=4)
    g1 = impurity_vector(build_geometry(cfg, [ImpuritySpec((1, 1), gamma_I=0.01)]), 0)
    g4 = impurity_vector(build_geometry(cfg, [ImpuritySpec((1, 1), gamma_I=0.04)]), 0)
    np.testing.assert_allclose(g4.forward, 2.0 * g1.forward, rtol=1e-14)


def test_uniform_mode_value_is_in_phase_eigenvalue():
    cfg = LatticeConfig(spacing=0.2, n_x=2, n_y=2)
    m = assemble_lattice_matrix(build_geometry(cfg))
    tc = toy_couplings(0.2, 0.01)
    lam_par = toy_eigenvalues(tc, 0.0)[0]
    assert abs(uniform_mode_value(m) - lam_par) < 1e-12


def test_band_structure_inversion_symmetry_and_positivity():
    cfg = LatticeConfig(spacing=0.2, n_x=20, n_y=20)
    bs = band_structure(cfg, n_k=41)
    assert np.max(np.abs(bs.J - bs.J[::-1])) < 1e-10  # J(k) = J(-k) on the grid
    assert np.max(np.abs(bs.Gamma - bs.Gamma[::-1])) < 1e-10
    assert bs.Gamma.min() >= -1e-8 * GAMMA_L


def test_band_k0_regression_against_independent_sum():
    cfg = LatticeConfig(spacing=0.2, n_x=2, n_y=2)
    bs = band_structure(cfg, k_grid=np.array([[0.0, 0.0]]))
    assert abs(bs.Gamma[0] - GAMMA_K0_A02) < 1e-10
    assert abs(bs.J[0] - J_K0_A02) < 1e-10
    assert bs.Gamma[0] > 5.0 * GAMMA_L  # collectively enhanced


def test_band_corner_is_guided():
    cfg = LatticeConfig(spacing=0.2, n_x=20, n_y=20)
    corner = np.array([[np.pi / 0.2, np.pi / 0.2]])
    bs = band_structure(cfg, k_grid=corner)
    assert abs(bs.Gamma[0]) < 0.05 * GAMMA_L
    assert not bs.in_light_cone[0]


def test_band_edge_behavior():
    cfg = LatticeConfig(spacing=0.2, n_x=20, n_y=20)
    e101 = band_edge(cfg, n_k=101)
    e201 = band_edge(cfg, n_k=201)
    assert abs(e101 - e201) / e101 < 0.005
    assert 0.8 < e101 < 1.4  # order-one collective shift at a = 0.2
    e_small = band_edge(LatticeConfig(spacing=0.1, n_x=20, n_y=20))
    assert e_small > e101


def test_band_grid_outside_bz_rejected():
    cfg = LatticeConfig(spacing=0.2, n_x=20, n_y=20)
    with pytest.raises(ValueError):
        band_structure(cfg, k_grid=np.array([[1.1 * np.pi / 0.2, 0.0]]))


def test_fourier_convention_against_two_atom_splitting():
    # a hand-built two-site "patch" must reproduce the symmetric and
    # antisymmetric eigenvalues of the literal two-atom matrix
    a = 0.2
    right = circular_dipole("right")
    coupling = pair_coupling((a, 0, 0), (0, 0, 0), right, right)
    two_atom = np.array([[-0.5j, coupling], [coupling, -0.5j]])
    lam = np.sort_complex(np.linalg.eigvals(two_atom))
    for k, expected in ((0.0, -0.5j + 2 * coupling * 1.0), (np.pi / a, -0.5j - 2 * coupling)):
        summed = -0.5j + coupling * (np.exp(-1j * k * a) + np.exp(1j * k * a))
        assert abs(summed - expected) < 1e-14
    assert abs(lam[0] - (-0.5j - coupling)) < 1e-14 or abs(lam[0] - (-0.5j + coupling)) < 1e-14


def test_patch_displacements_weighting():
    disp, w_tri = patch_displacements(0.2, 4, "triangular")
    assert disp.shape == (24, 2)  # 5x5 - origin
    _, w_uni = patch_displacements(0.2, 4, "uniform")
    assert np.all(w_uni == 1.0)
    assert np.all((w_tri > 0) & (w_tri <= 1.0))
    with pytest.raises(ValueError):
        patch_displacements(0.2, 4, "gaussian")
