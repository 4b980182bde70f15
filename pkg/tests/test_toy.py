import numpy as np
import pytest

from array_emitters.coupling import assemble_lattice_matrix, impurity_vector
from array_emitters.geometry import ImpuritySpec, LatticeConfig, build_geometry
from array_emitters.green import GAMMA_L, circular_dipole, pair_coupling_parts
from array_emitters.markov import self_energy
from array_emitters.toy import (
    ToyApproximationError,
    toy_couplings,
    toy_dark_detuning,
    toy_dressed_states,
    toy_effective_rabi_identical,
    toy_eigenvalues,
    toy_im_sigma_identical,
    toy_optimal_linewidth,
    toy_optimal_shift,
    toy_self_energy_identical,
    toy_self_energy_orthogonal,
    toy_small_a_limits,
    toy_two_mode_hamiltonian,
)

GAMMA_I = 0.01


def test_couplings_near_field_limits():
    tc = toy_couplings(1e-3, GAMMA_I)
    assert abs(tc.g1 - GAMMA_L) < 1e-4
    assert abs(tc.g2 - GAMMA_L) < 1e-4
    t1 = toy_couplings(0.004, GAMMA_I)
    t2 = toy_couplings(0.008, GAMMA_I)
    assert abs(t1.j1 / t2.j1 - 8.0) / 8.0 < 0.05


def test_orthogonal_coupling_is_purely_imaginary_at_half_diagonal():
    tc = toy_couplings(0.2, GAMMA_I)
    assert abs(tc.js_orthogonal.real) < 1e-15
    assert abs(tc.gs_orthogonal.real) < 1e-15
    assert abs(tc.js_orthogonal.imag) > 0


def test_trace_identity():
    for a in (0.05, 0.1, 0.2, 0.3):
        tc = toy_couplings(a, GAMMA_I)
        assert abs(tc.g_par + tc.g_perp + 2 * (GAMMA_L - tc.g2) - 4 * GAMMA_L) < 1e-12


def test_self_energies_match_pipeline(rng):
    for a in (0.05, 0.1, 0.2, 0.3):
        tc = toy_couplings(a, GAMMA_I)
        cfg = LatticeConfig(spacing=a, n_x=2, n_y=2)
        geo_id = build_geometry(cfg, [ImpuritySpec((0, 0), gamma_I=GAMMA_I)])
        geo_or = build_geometry(
            cfg, [ImpuritySpec((0, 0), gamma_I=GAMMA_I, configuration="orthogonal")]
        )
        matrix = assemble_lattice_matrix(geo_id)
        for _ in range(5):
            delta = tc.j_par + 0.5 + 8.0 * rng.random()
            sig = toy_self_energy_identical(tc, delta)
            assert abs(sig - self_energy(matrix, impurity_vector(geo_id, 0), delta)) \
                / abs(sig) < 1e-10
            sig_o = toy_self_energy_orthogonal(tc, delta)
            assert abs(sig_o - self_energy(matrix, impurity_vector(geo_or, 0), delta)) \
                / abs(sig_o) < 1e-10


def test_im_sigma_closed_form_and_decoupling():
    tc = toy_couplings(0.2, GAMMA_I)
    for delta in (3.0, 5.0, 11.0):
        sig = toy_self_energy_identical(tc, delta)
        assert abs(sig.imag - toy_im_sigma_identical(tc, delta)) < 1e-14
    assert abs(toy_self_energy_identical(tc, 1e7)) < 1e-7  # off-resonant decoupling


def test_optimized_linewidth_and_shift():
    tc = toy_couplings(0.2, GAMMA_I)
    dark = toy_dark_detuning(tc)
    sig = toy_self_energy_identical(tc, dark)
    assert GAMMA_I - 2 * sig.imag == pytest.approx(toy_optimal_linewidth(tc), abs=1e-14)
    assert sig.real == pytest.approx(toy_optimal_shift(tc), abs=1e-14)


def test_small_a_limits():
    tc = toy_couplings(0.01, GAMMA_I)
    gamma_lim, omega_lim = toy_small_a_limits(tc, GAMMA_I, 1.0)
    assert abs(gamma_lim) / GAMMA_I < 0.01
    assert abs(omega_lim) < 0.01
    # suppression of the drive is weaker than of the linewidth by Gamma_3/gamma_L <= 1
    gamma3 = tc.gs_identical / np.sqrt(GAMMA_I / GAMMA_L)
    assert 0 < gamma3 / GAMMA_L <= 1.0
    assert abs((1 - gamma_lim / GAMMA_I) - (1 - omega_lim) * gamma3 / GAMMA_L) < 1e-12
    with pytest.raises(ValueError):
        toy_small_a_limits(toy_couplings(0.2, GAMMA_I), GAMMA_I, 1.0)


def test_exact_approaches_limit_as_a_shrinks():
    errors = []
    for a in (0.08, 0.05, 0.02):
        tc = toy_couplings(a, GAMMA_I)
        gamma_lim, _ = toy_small_a_limits(tc, GAMMA_I, 1.0)
        dark = toy_dark_detuning(tc)
        gamma_exact = GAMMA_I - 2 * toy_self_energy_identical(tc, dark).imag
        errors.append(abs(gamma_exact - gamma_lim))
    assert errors[0] > errors[1] > errors[2]


def test_dressed_states():
    tc = toy_couplings(0.2, GAMMA_I)
    dark_detuning = toy_dark_detuning(tc)
    dark, radiant = toy_dressed_states(tc, dark_detuning, GAMMA_I)
    sig = toy_self_energy_identical(tc, dark_detuning)
    gamma_eff = GAMMA_I - 2 * sig.imag
    assert dark.eigenvalue.imag == pytest.approx(-gamma_eff / 2, abs=1e-8)
    # exact two-mode eigenvalues within the approximation bound
    exact = np.linalg.eigvals(toy_two_mode_hamiltonian(tc, dark_detuning, GAMMA_I))
    nearest_dark = exact[np.argmin(np.abs(exact - dark.eigenvalue))]
    assert abs(dark.eigenvalue - nearest_dark) <= 0.05 * abs(sig)
    # radiant state is approximately the bare in-phase mode
    bare = -(dark_detuning - tc.j_par) - 0.5j * tc.g_par
    assert abs(radiant.eigenvalue - bare) <= abs(sig) * 1.05
    # at minimized linewidth the dark amplitude reduces to (-alpha, 1)
    ratio = dark.amplitude[0] / dark.amplitude[1]
    assert abs(ratio - (-dark.alpha)) < 1e-12
    # basis completeness away from degeneracies
    basis = np.column_stack([dark.amplitude, radiant.amplitude])
    assert np.linalg.cond(basis) < 1e6
    with pytest.raises(ToyApproximationError):
        toy_dressed_states(tc, tc.j_par, 5.0)


def test_alpha_near_field_limit():
    tc = toy_couplings(1e-3, GAMMA_I)
    alpha = tc.gt_par / tc.g_par
    assert abs(alpha - 0.5 * np.sqrt(GAMMA_I / GAMMA_L)) < 1e-3


def test_dark_state_net_drive_matches_effective_rabi():
    tc = toy_couplings(0.2, GAMMA_I)
    dark_detuning = toy_dark_detuning(tc)
    omega_L, omega_I = 0.01, 0.001
    alpha = tc.gt_par / tc.g_par
    net = omega_I - 2 * omega_L * alpha  # Omega_I - Omega_par * alpha
    rabi = toy_effective_rabi_identical(tc, dark_detuning, omega_L, omega_I)
    assert abs(rabi - net) < 1e-12
    assert abs(rabi.imag) < 1e-12  # real at the dark detuning


def test_nearest_plaquette_dominance():
    # per-atom coherent coupling of the 2x2 plaquette vs a 4x4 corner atom
    # approaches the pure 1/r^3 ratio of 27 as the spacing shrinks; at
    # a = 0.05 the corner already sits at 0.106 lambda where retardation
    # corrections pull the exact ratio down to ~19
    right = circular_dipole("right")

    def ratio(a):
        j_near, _ = pair_coupling_parts((a / 2, a / 2, 0), (0, 0, 0), right, right)
        j_far, _ = pair_coupling_parts((1.5 * a, 1.5 * a, 0), (0, 0, 0), right, right)
        return abs(j_near.real / j_far.real)

    assert abs(ratio(0.02) - 27.0) / 27.0 < 0.2
    ratios = [ratio(a) for a in (0.05, 0.02, 0.01)]
    assert ratios[0] < ratios[1] < ratios[2] < 27.0


def test_eigenvalues_include_detuning():
    tc = toy_couplings(0.2, GAMMA_I)
    lam_par_0 = toy_eigenvalues(tc, 0.0)[0]
    lam_par_2 = toy_eigenvalues(tc, 2.0)[0]
    assert lam_par_2 == pytest.approx(lam_par_0 - 2.0)
