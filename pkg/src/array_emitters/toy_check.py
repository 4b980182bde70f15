"""Pass/fail comparisons between the 2x2 closed forms and the generic pipeline.

Backs the `toy-check` CLI subcommand.  Each check reports its worst
error across a sweep of spacings and detunings against a fixed bound.
"""

from __future__ import annotations

import numpy as np

from . import markov, toy
from .coupling import assemble_lattice_matrix, impurity_vector
from .geometry import ImpuritySpec, LatticeConfig, build_geometry
from .green import GAMMA_L

TOY_SPACINGS = (0.05, 0.1, 0.2, 0.3)


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def toy_check_report(gamma_I: float = 0.01, n_deltas: int = 20, seed: int = 7):
    """Run every oracle comparison; returns rows (name, passed, max_error, bound)."""
    rng = np.random.default_rng(seed)
    rows = []

    def record(name, err, bound):
        rows.append((name, bool(err <= bound), float(err), float(bound)))

    err_sig_id = err_sig_or = err_rabi = err_eig = 0.0
    err_im = err_opt = err_shift = 0.0
    for a in TOY_SPACINGS:
        tc = toy.toy_couplings(a, gamma_I)
        cfg = LatticeConfig(spacing=a, n_x=2, n_y=2)
        geo_id = build_geometry(cfg, [ImpuritySpec((0, 0), gamma_I=gamma_I)])
        geo_or = build_geometry(
            cfg, [ImpuritySpec((0, 0), gamma_I=gamma_I, configuration="orthogonal")]
        )
        matrix = assemble_lattice_matrix(geo_id)
        g_id = impurity_vector(geo_id, 0)
        g_or = impurity_vector(geo_or, 0)

        lam_par, lam_perp, lam_m = toy.toy_eigenvalues(tc, 0.0)
        numeric = np.sort_complex(np.linalg.eigvals(matrix))
        analytic = np.sort_complex(np.array([lam_par, lam_perp, lam_m, lam_m]))
        err_eig = max(err_eig, float(np.max(np.abs(numeric - analytic))))

        deltas = tc.j_par + 0.3 + 9.7 * rng.random(n_deltas)
        for delta in deltas:
            sig_toy = toy.toy_self_energy_identical(tc, delta)
            sig_pipe = markov.self_energy(matrix, g_id, delta)
            err_sig_id = max(err_sig_id, _rel(sig_toy, sig_pipe))
            sig_toy_o = toy.toy_self_energy_orthogonal(tc, delta)
            sig_pipe_o = markov.self_energy(matrix, g_or, delta)
            err_sig_or = max(err_sig_or, _rel(sig_toy_o, sig_pipe_o))
            drive = markov.DriveSpec.plane_wave(0.01, gamma_I)
            om_toy = toy.toy_effective_rabi_identical(tc, delta, drive.omega_L, drive.omega_I)
            om_pipe = markov.effective_rabi(matrix, g_id, delta, drive)
            err_rabi = max(err_rabi, _rel(om_toy, om_pipe))
            err_im = max(
                err_im, abs(toy.toy_im_sigma_identical(tc, delta) - sig_toy.imag)
            )

        dark = toy.toy_dark_detuning(tc)
        sig_at_dark = toy.toy_self_energy_identical(tc, dark)
        gamma_opt = gamma_I - 2.0 * sig_at_dark.imag
        err_opt = max(err_opt, abs(gamma_opt - toy.toy_optimal_linewidth(tc)))
        err_shift = max(err_shift, abs(sig_at_dark.real - toy.toy_optimal_shift(tc)))

    record("self_energy_identical_vs_pipeline", err_sig_id, 1e-10)
    record("self_energy_orthogonal_vs_pipeline", err_sig_or, 1e-10)
    record("effective_rabi_vs_pipeline", err_rabi, 1e-10)
    record("mode_eigenvalues_vs_numeric", err_eig, 1e-10)
    record("im_sigma_closed_form", err_im, 1e-12)
    record("optimal_linewidth_closed_form", err_opt, 1e-12)
    record("optimal_shift_closed_form", err_shift, 1e-12)

    # dark-detuning formula vs a brute scan of the toy linewidth
    err_dark = 0.0
    for a in TOY_SPACINGS:
        tc = toy.toy_couplings(a, gamma_I)
        dark = toy.toy_dark_detuning(tc)
        grid = np.arange(dark - 5.0, dark + 5.0, 0.01)
        gam = np.array(
            [gamma_I - 2.0 * toy.toy_self_energy_identical(tc, d).imag for d in grid]
        )
        err_dark = max(err_dark, abs(grid[int(np.argmin(gam))] - dark))
    record("dark_detuning_vs_scan", err_dark, 0.01 + 1e-12)

    # dressed states against the exact two-mode eigenproblem
    err_dressed = 0.0
    for a in TOY_SPACINGS:
        tc = toy.toy_couplings(a, gamma_I)
        dark = toy.toy_dark_detuning(tc)
        dressed_dark, dressed_rad = toy.toy_dressed_states(tc, dark, gamma_I)
        exact = np.linalg.eigvals(toy.toy_two_mode_hamiltonian(tc, dark, gamma_I))
        sig = toy.toy_self_energy_identical(tc, dark)
        for state in (dressed_dark, dressed_rad):
            nearest = exact[np.argmin(np.abs(exact - state.eigenvalue))]
            err_dressed = max(err_dressed, abs(state.eigenvalue - nearest) / abs(sig))
    record("dressed_eigenvalues_vs_exact", err_dressed, 0.05)

    # alpha -> sqrt(gamma_I)/2 in the near field
    tc_nf = toy.toy_couplings(1e-3, gamma_I)
    alpha = tc_nf.gt_par / tc_nf.g_par
    record("alpha_near_field_limit", _rel(alpha, 0.5 * np.sqrt(gamma_I / GAMMA_L)), 1e-3)

    # near-field limits of Gamma and drive suppression
    tc_small = toy.toy_couplings(0.01, gamma_I)
    gamma_lim, omega_lim = toy.toy_small_a_limits(tc_small, gamma_I, 1.0)
    dark = toy.toy_dark_detuning(tc_small)
    gamma_exact = gamma_I - 2.0 * toy.toy_self_energy_identical(tc_small, dark).imag
    record("small_a_linewidth_suppression", max(gamma_exact, abs(gamma_lim)) / gamma_I, 0.01)
    record("small_a_drive_suppression", abs(omega_lim), 0.01)

    # dissipative trace identity over the four modes
    err_trace = 0.0
    for a in TOY_SPACINGS:
        tc = toy.toy_couplings(a, gamma_I)
        err_trace = max(
            err_trace,
            abs(tc.g_par + tc.g_perp + 2.0 * (GAMMA_L - tc.g2) - 4.0 * GAMMA_L),
        )
    record("mode_linewidth_trace_identity", err_trace, 1e-12)

    # selection rules of the centered impurity couplings
    err_sel = 0.0
    for a in TOY_SPACINGS:
        cfg = LatticeConfig(spacing=a, n_x=2, n_y=2)
        perm = [0, 2, 3, 1]  # row-major lattice order -> counterclockwise corners
        g_id = impurity_vector(
            build_geometry(cfg, [ImpuritySpec((0, 0), gamma_I=gamma_I)]), 0
        ).forward[perm]
        g_or = impurity_vector(
            build_geometry(
                cfg, [ImpuritySpec((0, 0), gamma_I=gamma_I, configuration="orthogonal")]
            ),
            0,
        ).forward[perm]
        for vec in (toy.V_PERP, toy.V_M1, toy.V_M2):
            err_sel = max(err_sel, abs(g_id @ vec))
        for vec in (toy.V_PAR, toy.V_M1, toy.V_M2):
            err_sel = max(err_sel, abs(g_or @ vec))
    record("mode_selection_rules", err_sel, 1e-12)

    return rows
