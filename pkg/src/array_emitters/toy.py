"""Closed-form 2x2 plaquette model: an impurity centered in a four-atom array.

Serves as an independent analytic oracle for the generic pipeline.  All
formulas are transcribed symbol-for-symbol (no algebraic simplification).
Atom order is counterclockwise starting from the lower-left corner, so
with the impurity at the origin the atoms sit at (-a/2,-a/2), (a/2,-a/2),
(a/2,a/2), (-a/2,a/2); the three displacement classes are the
nearest-neighbor vector (a,0), the array diagonal (a,a), and the
impurity half-diagonal (a/2,a/2).

For the orthogonal polarization configuration the impurity-corner
couplings J_s, Gamma_s are complex (purely imaginary at the half
diagonal), and the self-energy carries an explicit leading minus sign;
together these reproduce the physical sign of the elimination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green import GAMMA_L, circular_dipole, pair_coupling_parts

_SQRT2 = np.sqrt(2.0)

# counterclockwise corner modes of the 2x2 array: in-phase, out-of-phase
# (checkerboard), and the degenerate pair
V_PAR = np.array([1.0, 1.0, 1.0, 1.0]) / 2.0
V_PERP = np.array([-1.0, 1.0, -1.0, 1.0]) / 2.0
V_M1 = np.array([0.0, -1.0, 0.0, 1.0]) / _SQRT2
V_M2 = np.array([-1.0, 0.0, 1.0, 0.0]) / _SQRT2


class ToyApproximationError(ValueError):
    """Dressed-state formulas used outside their validity guard."""


@dataclass(frozen=True)
class ToyCouplings:
    """Pair couplings of the 2x2 model at its three displacement classes.

    j1, g1: nearest-neighbor coherent/dissipative rates; j2, g2 the
    diagonal pair; (js, gs) the impurity-corner coupling scaled by
    sqrt(gamma_I/gamma_L), real for the identical configuration and
    complex for the orthogonal one.
    """

    spacing: float
    gamma_I: float
    j1: float
    g1: float
    j2: float
    g2: float
    js_identical: float
    gs_identical: float
    js_orthogonal: complex
    gs_orthogonal: complex

    # collective in-phase / out-of-phase combinations
    @property
    def j_par(self) -> float:
        return 2.0 * self.j1 + self.j2

    @property
    def g_par(self) -> float:
        return GAMMA_L + 2.0 * self.g1 + self.g2

    @property
    def j_perp(self) -> float:
        return -2.0 * self.j1 + self.j2

    @property
    def g_perp(self) -> float:
        return GAMMA_L - 2.0 * self.g1 + self.g2

    @property
    def jt_par(self) -> float:
        return 2.0 * self.js_identical

    @property
    def gt_par(self) -> float:
        return 2.0 * self.gs_identical

    @property
    def jt_perp(self) -> complex:
        return 2.0 * self.js_orthogonal

    @property
    def gt_perp(self) -> complex:
        return 2.0 * self.gs_orthogonal


def toy_couplings(spacing: float, gamma_I: float) -> ToyCouplings:
    """Evaluate the three coupling classes of the 2x2 model."""
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    a = spacing
    right = circular_dipole("right")
    left = circular_dipole("left")
    r1 = (a, 0.0, 0.0)
    r2 = (a, a, 0.0)
    r3 = (a / 2.0, a / 2.0, 0.0)
    origin = (0.0, 0.0, 0.0)
    j1, g1 = pair_coupling_parts(r1, origin, right, right)
    j2, g2 = pair_coupling_parts(r2, origin, right, right)
    js_id, gs_id = pair_coupling_parts(r3, origin, right, right, GAMMA_L, gamma_I)
    js_or, gs_or = pair_coupling_parts(r3, origin, right, left, GAMMA_L, gamma_I)
    return ToyCouplings(
        spacing=a,
        gamma_I=gamma_I,
        j1=j1.real,
        g1=g1.real,
        j2=j2.real,
        g2=g2.real,
        js_identical=js_id.real,
        gs_identical=gs_id.real,
        js_orthogonal=js_or,
        gs_orthogonal=gs_or,
    )


def toy_eigenvalues(tc: ToyCouplings, delta: float) -> tuple[complex, complex, complex]:
    """Array-mode eigenvalues (lam_par, lam_perp, lam_M) at lattice detuning delta."""
    lam_par = -delta + 2 * tc.j1 + tc.j2 - 0.5j * (GAMMA_L + 2 * tc.g1 + tc.g2)
    lam_perp = -delta - 2 * tc.j1 + tc.j2 - 0.5j * (GAMMA_L - 2 * tc.g1 + tc.g2)
    lam_m = -delta - tc.j2 - 0.5j * (GAMMA_L - tc.g2)
    return lam_par, lam_perp, lam_m


def _pole_guard(delta: float, j_mode: float, g_mode: float) -> None:
    if abs(delta - j_mode) < 1e-9 and abs(g_mode) < 1e-9:
        raise ValueError("detuning resonant with a lossless array mode")


def toy_self_energy_identical(tc: ToyCouplings, delta: float) -> complex:
    """Impurity self-energy for identical polarizations (single in-phase pole)."""
    _pole_guard(delta, tc.j_par, tc.g_par)
    num = tc.jt_par - 0.5j * tc.gt_par
    return num * num / (delta - tc.j_par + 0.5j * tc.g_par)


def toy_self_energy_orthogonal(tc: ToyCouplings, delta: float) -> complex:
    """Self-energy for orthogonal polarizations (out-of-phase pole, leading minus)."""
    _pole_guard(delta, tc.j_perp, tc.g_perp.real if np.iscomplexobj(tc.g_perp) else tc.g_perp)
    num = tc.jt_perp - 0.5j * tc.gt_perp
    return -num * num / (delta - tc.j_perp + 0.5j * tc.g_perp)


def toy_im_sigma_identical(tc: ToyCouplings, delta: float) -> float:
    """Closed-form Im[Sigma] for the identical configuration (independent transcription)."""
    jt, gt = tc.jt_par, tc.gt_par
    jp, gp = tc.j_par, tc.g_par
    num = (jt**2 - gt**2 / 4.0) * gp / 2.0 + jt * gt * (delta - jp)
    den = (delta - jp) ** 2 + gp**2 / 4.0
    return -num / den


def toy_dark_detuning(tc: ToyCouplings) -> float:
    """Detuning minimizing the identical-configuration effective linewidth."""
    return tc.j_par - tc.jt_par * tc.g_par / tc.gt_par


def toy_optimal_linewidth(tc: ToyCouplings) -> float:
    """Gamma_Eff at the dark detuning: gamma_I - Gt_par^2 / Gamma_par."""
    return tc.gamma_I - tc.gt_par**2 / tc.g_par


def toy_optimal_shift(tc: ToyCouplings) -> float:
    """Re[Sigma] at the dark detuning: -Jt_par*Gt_par/Gamma_par."""
    return -tc.jt_par * tc.gt_par / tc.g_par


def toy_effective_rabi_identical(
    tc: ToyCouplings, delta: float, omega_L: float, omega_I: float
) -> complex:
    """Effective drive with the in-phase mode drive Omega_par = 2*Omega_L."""
    omega_par = 2.0 * omega_L
    num = (tc.jt_par + 0.5j * tc.gt_par) * omega_par
    return num / (delta - tc.j_par - 0.5j * tc.g_par) + omega_I


def toy_small_a_limits(tc: ToyCouplings, gamma_I: float, omega_I: float) -> tuple[float, float]:
    """Near-field limits of the optimized linewidth and drive.

    Gamma3 is the impurity-corner dissipative rate at lattice-lattice
    normalization (gs without the sqrt(gamma_I/gamma_L) scale).
    """
    if not tc.spacing < 0.1:
        raise ValueError("near-field limit formulas require a < 0.1 lambda")
    gamma3 = tc.gs_identical / np.sqrt(gamma_I / GAMMA_L)
    gp = tc.g_par
    gamma_limit = gamma_I * (1.0 - 4.0 * gamma3**2 / (GAMMA_L * gp))
    omega_limit = omega_I * (1.0 - 4.0 * gamma3 / gp)
    return gamma_limit, omega_limit


@dataclass(frozen=True)
class DressedState:
    """One dressed impurity-lattice state: eigenvalue, (in-phase, impurity) amplitude."""

    eigenvalue: complex
    amplitude: np.ndarray
    alpha: float


def toy_dressed_states(
    tc: ToyCouplings, delta: float, gamma_I: float, guard_factor: float = 10.0
) -> tuple[DressedState, DressedState]:
    """Dark and radiant dressed states of the two-mode (in-phase, impurity) block.

    Valid when gamma_I/2 is far smaller than the in-phase pole distance;
    the guard enforces a margin of `guard_factor`.
    """
    pole = abs(delta - tc.j_par + 0.5j * tc.g_par)
    if 0.5 * gamma_I * guard_factor > pole:
        raise ToyApproximationError(
            "dressed-state expansion invalid: gamma_I/2 not small against "
            f"|delta - J_par + i Gamma_par/2| = {pole:.3g}"
        )
    sigma = toy_self_energy_identical(tc, delta)
    gamma_eff = gamma_I - 2.0 * sigma.imag
    lam_dark = -(-sigma.real) - 0.5j * gamma_eff
    lam_rad = -(delta - tc.j_par + sigma.real) - 0.5j * (tc.g_par + 2.0 * sigma.imag)
    coupling = tc.jt_par - 0.5j * tc.gt_par
    detune = delta - tc.j_par + 0.5j * tc.g_par
    alpha = tc.gt_par / tc.g_par
    dark = DressedState(
        eigenvalue=complex(lam_dark),
        amplitude=np.array([coupling, detune]),
        alpha=float(alpha),
    )
    radiant = DressedState(
        eigenvalue=complex(lam_rad),
        amplitude=np.array([detune, -coupling]),
        alpha=float(alpha),
    )
    return dark, radiant


def toy_two_mode_hamiltonian(tc: ToyCouplings, delta: float, gamma_I: float) -> np.ndarray:
    """Exact 2x2 block over (in-phase lattice mode, impurity), identical config."""
    coupling = tc.jt_par - 0.5j * tc.gt_par
    return np.array(
        [
            [-delta + tc.j_par - 0.5j * tc.g_par, coupling],
            [coupling, -0.5j * gamma_I],
        ]
    )
