"""Markovian elimination of the lattice around a single impurity.

With the lattice in steady state, the impurity acquires a self-energy

    Sigma_SE = g_rev^T (delta_LI*I - M)^{-1} g_fwd,

whose real part shifts the impurity frequency and whose imaginary part
renormalizes its linewidth, Gamma_Eff = gamma_I - 2*Im[Sigma_SE].  The
same resolvent gives the lattice-mediated drive.  Both a direct
linear-solve path and a spectral (eigenmode-sum) path are provided; they
agree exactly for a bilinearly orthonormal mode basis and serve as
independent cross-checks of one another.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .coupling import (
    ArraySystem,
    ImpurityCoupling,
    LatticeModes,
    band_edge,
    uniform_mode_value,
)
from .geometry import ImpuritySpec, LatticeConfig, build_geometry
from .green import GAMMA_L

POLE_DETUNING_TOL = 1e-6
POLE_WIDTH_TOL = 1e-6
GAMMA_EFF_FLOOR = -1e-8  # gamma_L units
MARKOV_VARIATION_LIMIT = 0.2


class PoleError(ValueError):
    """Requested detuning is resonant with an (almost) lossless lattice mode."""

    def __init__(self, delta: float, eigenvalue: complex):
        self.delta = delta
        self.eigenvalue = eigenvalue
        super().__init__(
            f"detuning {delta!r} hits a lattice pole near eigenvalue {eigenvalue!r}"
        )


class UnphysicalParamsError(ValueError):
    """Effective linewidth came out negative beyond numerical tolerance."""


@dataclass(frozen=True)
class DriveSpec:
    """Plane-wave drive amplitudes (gamma_L units), perpendicular incidence.

    Perpendicular incidence puts a uniform phase on every lattice atom.
    """

    omega_L: float
    omega_I: float
    incidence: str = "perpendicular"

    def __post_init__(self):
        if self.incidence != "perpendicular":
            raise ValueError("only perpendicular plane-wave incidence is supported")
        if abs(self.omega_L) / GAMMA_L > 0.1:
            warnings.warn(
                "drive exceeds the weak-drive (single-excitation) regime: "
                f"omega_L/gamma_L = {self.omega_L / GAMMA_L:.3g}",
                stacklevel=2,
            )

    @classmethod
    def plane_wave(cls, omega_L: float, gamma_I: float) -> "DriveSpec":
        """Drive from one field amplitude: Rabi rates scale with sqrt(linewidth)."""
        return cls(omega_L=omega_L, omega_I=omega_L * np.sqrt(gamma_I / GAMMA_L))


@dataclass(frozen=True)
class EffectiveParams:
    """Self-energy and the renormalized impurity parameters derived from it."""

    sigma_se: complex
    gamma_eff: float
    omega_shift: float
    omega_eff_drive: complex | None = None
    q1: float | None = None
    markov_flag: bool = False


def _check_pole(eigenvalues, delta: float) -> None:
    if eigenvalues is None:
        return
    close = np.abs(eigenvalues.real - delta) < POLE_DETUNING_TOL * GAMMA_L
    narrow = np.abs(eigenvalues.imag) < 0.5 * POLE_WIDTH_TOL * GAMMA_L
    hits = close & narrow
    if np.any(hits):
        idx = int(np.argmax(hits))
        raise PoleError(delta, complex(eigenvalues[idx]))


def _as_coupling(g) -> ImpurityCoupling:
    if isinstance(g, ImpurityCoupling):
        return g
    g = np.asarray(g, dtype=complex)
    return ImpurityCoupling(forward=g, reverse=g)


def self_energy(matrix: np.ndarray, g, delta: float, eigenvalues=None) -> complex:
    """Self-energy via a dense linear solve (production path)."""
    coupling = _as_coupling(g)
    _check_pole(eigenvalues, delta)
    n = matrix.shape[0]
    try:
        x = np.linalg.solve(delta * np.eye(n) - matrix, coupling.forward)
    except np.linalg.LinAlgError as exc:
        raise PoleError(delta, np.nan) from exc
    return complex(coupling.reverse @ x)


def self_energy_spectral(modes: LatticeModes, g, delta) -> complex:
    """Self-energy as an explicit eigenmode sum (oracle / sweep path)."""
    coupling = _as_coupling(g)
    _check_pole(modes.eigenvalues, float(np.real(delta)))
    weights = modes.pair_weights(coupling.reverse, coupling.forward)
    return complex(modes.resolvent_sum(weights, delta)[0])


def self_energy_sweep(modes: LatticeModes, g, deltas) -> np.ndarray:
    """Vectorized self-energy over a detuning grid (no pole screening)."""
    coupling = _as_coupling(g)
    weights = modes.pair_weights(coupling.reverse, coupling.forward)
    return modes.resolvent_sum(weights, deltas)


def effective_params(
    sigma_se: complex,
    gamma_I: float,
    omega_eff: complex | None = None,
    markov_flag: bool = False,
) -> EffectiveParams:
    """Package Gamma_Eff, the frequency shift, and Q1 from a self-energy."""
    gamma_eff = gamma_I - 2.0 * sigma_se.imag
    if gamma_eff < GAMMA_EFF_FLOOR * GAMMA_L:
        raise UnphysicalParamsError(
            f"Gamma_Eff = {gamma_eff!r} < 0: outside the Markovian regime"
        )
    q1 = None
    if omega_eff is not None and gamma_eff > 0:
        q1 = abs(omega_eff) / gamma_eff
    return EffectiveParams(
        sigma_se=complex(sigma_se),
        gamma_eff=float(gamma_eff),
        omega_shift=float(sigma_se.real),
        omega_eff_drive=None if omega_eff is None else complex(omega_eff),
        q1=q1,
        markov_flag=markov_flag,
    )


def effective_rabi(
    matrix: np.ndarray, g, delta: float, drive: DriveSpec, eigenvalues=None
) -> complex:
    """Lattice-mediated effective Rabi amplitude on the impurity.

    The lattice term uses the conjugate propagator relative to the
    self-energy (driven-response convention), so for a plaquette-centered
    impurity and uniform drive it reduces to the textbook two-level form
    with numerator J~ + i*Gamma~/2 and denominator delta - J - i*Gamma/2.
    """
    coupling = _as_coupling(g)
    _check_pole(eigenvalues, delta)
    n = matrix.shape[0]
    drive_vec = np.full(n, drive.omega_L)
    try:
        x = np.linalg.solve(delta * np.eye(n) - matrix, drive_vec)
    except np.linalg.LinAlgError as exc:
        raise PoleError(delta, np.nan) from exc
    return complex(np.conj(coupling.reverse @ x) + drive.omega_I)


def effective_rabi_sweep(modes: LatticeModes, g, deltas, drive: DriveSpec) -> np.ndarray:
    coupling = _as_coupling(g)
    ones = np.ones(modes.n)
    weights = modes.project(coupling.reverse) * modes.project(ones) * drive.omega_L
    return np.conj(modes.resolvent_sum(weights, deltas)) + drive.omega_I


def optimal_dark_detuning(j_k, gamma_k, jt_k, gt_k) -> float:
    """Dark-state detuning delta = J(k) - Jt(k)*Gamma(k)/Gt(k).

    Valid for real projections (plaquette-centered impurities); small
    imaginary residue is tolerated, a vanishing Gt(k) is rejected.
    """
    values = np.array([j_k, gamma_k, jt_k, gt_k], dtype=complex)
    scale = np.max(np.abs(values))
    if np.max(np.abs(values.imag)) > 1e-8 * scale:
        raise ValueError(
            "k-space projections are not real: the closed-form dark detuning "
            "only applies to plaquette-centered impurities"
        )
    j_k, gamma_k, jt_k, gt_k = values.real
    if abs(gt_k) < 1e-12 * scale:
        raise ValueError("dissipative projection Gt(k) vanishes: dark detuning undefined")
    return float(j_k - jt_k * gamma_k / gt_k)


def dark_detuning_k0(system: ArraySystem, impurity_index: int = 0) -> float:
    """Closed-form detuning from the finite array's k = 0 projections.

    J(0), Gamma(0) are the uniform-mode Rayleigh quotient of the lattice
    matrix; Jt(0), Gt(0) the plain sums of the impurity coupling vector.
    Single-pole estimate: the full multi-mode linewidth minimum sits a
    fraction of gamma_L away on large arrays (see dark_detuning_scan).
    """
    coupling = system.coupling(impurity_index)
    r_imp = system.geometry.impurity_positions[impurity_index]
    disp = system.geometry.lattice_positions - r_imp
    jt, gt = coupling.k_projection(disp, (0.0, 0.0))
    lattice_value = uniform_mode_value(system.matrix)
    return optimal_dark_detuning(
        lattice_value.real, -2.0 * lattice_value.imag, jt, gt
    )


def dark_detuning_infinite(
    spacing: float,
    gamma_I: float = 0.01,
    patch_size: int = 200,
    weighting: str = "triangular",
) -> float:
    """Dark detuning from infinite-lattice k = 0 projections (Fig.-2a curve).

    J(0), Gamma(0) come from the band-structure patch sum; Jt(0), Gt(0)
    from the same weighted sum of couplings between a plaquette-centered
    impurity and the surrounding lattice sites.  Finite-array k = 0 sums
    ring with array size, while this converged form tracks the actual
    linewidth valley of 10x10...40x40 arrays to within ~0.1 gamma_L.
    """
    from .coupling import band_structure
    from .geometry import LatticeConfig
    from .green import circular_dipole, coupling_kernel

    lattice = LatticeConfig(spacing=spacing, n_x=2, n_y=2)
    bs = band_structure(
        lattice, k_grid=np.zeros((1, 2)), patch_size=patch_size, weighting=weighting
    )
    m = patch_size // 2
    idx = np.arange(-m, m + 1)
    ix, iy = np.meshgrid(idx, idx, indexing="ij")
    # site offsets from the plaquette-centered impurity, in units of a
    ux = ix.ravel() + 0.5
    uy = iy.ravel() + 0.5
    disp = np.column_stack([ux * spacing, uy * spacing, np.zeros(ux.size)])
    if weighting == "triangular":
        weights = (1.0 - (np.abs(ux) - 0.5) / (m + 1)) * (1.0 - (np.abs(uy) - 0.5) / (m + 1))
    else:
        weights = np.ones(ux.size)
    right = circular_dipole("right")
    g = coupling_kernel(disp, right, right, GAMMA_L, gamma_I)
    jt = float(weights @ g.real)
    gt = float(weights @ (-2.0 * g.imag))
    return optimal_dark_detuning(bs.J[0], bs.Gamma[0], jt, gt)


def dark_detuning_scan(
    system: ArraySystem, impurity_index: int = 0, resolution: float = 0.01
) -> float:
    """Operating dark detuning: the Gamma_Eff minimum above the band edge.

    Scans the detuning axis above every lattice mode at the given
    resolution, then sharpens the minimum with one parabolic refinement
    of log Gamma_Eff.  Seeded by the closed-form candidates (the 2x2
    plaquette model and the array's k = 0 projections), which bracket
    the multi-mode valley.
    """
    from .toy import toy_couplings, toy_dark_detuning

    coupling = system.coupling(impurity_index)
    modes = system.modes
    gamma_I = system.geometry.impurities[impurity_index].gamma_I
    spacing = system.geometry.config.spacing
    seeds = [toy_dark_detuning(toy_couplings(spacing, gamma_I))]
    seeds.append(dark_detuning_infinite(spacing, gamma_I))
    try:
        seeds.append(dark_detuning_k0(system, impurity_index))
    except ValueError:
        pass
    top = float(modes.eigenvalues.real.max())
    lower = 1.01 * abs(top) + 0.05 * GAMMA_L + top - abs(top)  # margin above all modes
    upper = max(1.7 * max(seeds), lower + 2.0 * GAMMA_L)
    deltas = np.arange(lower, upper, resolution)
    gamma_eff = gamma_I - 2.0 * self_energy_sweep(modes, coupling, deltas).imag
    i = int(np.argmin(gamma_eff))
    if 0 < i < len(deltas) - 1 and np.all(gamma_eff[i - 1 : i + 2] > 0):
        # parabolic vertex through the three bracketing log values
        y = np.log(gamma_eff[i - 1 : i + 2])
        denom = y[0] - 2.0 * y[1] + y[2]
        if denom > 0:
            return float(deltas[i] + 0.5 * (y[0] - y[2]) / denom * resolution)
    return float(deltas[i])


def markov_variation(modes: LatticeModes, g, delta: float, gamma_eff: float) -> float:
    """Relative change of Sigma_SE over delta +- Gamma_Eff (validity measure)."""
    sig = self_energy_sweep(modes, g, [delta - gamma_eff, delta, delta + gamma_eff])
    center = abs(sig[1])
    if center == 0.0:
        return 0.0
    return float(max(abs(sig[0] - sig[1]), abs(sig[2] - sig[1])) / center)


@dataclass(frozen=True)
class MapCell:
    """One (a, delta_LI) cell of an impurity parameter map."""

    spacing: float
    delta: float
    params: EffectiveParams | None
    status: str  # "ok" | "pole" | "markov-warning"
    note: str = ""


def impurity_map(
    config: LatticeConfig,
    impurity: ImpuritySpec,
    delta_grid,
    a_grid,
    drive: DriveSpec | None = None,
) -> list[MapCell]:
    """Effective impurity parameters over an (a, delta_LI) grid.

    The lattice is re-diagonalized once per spacing; detuning cells reuse
    the spectral decomposition.  Pole cells are recorded, never dropped.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    a_grid = np.asarray(a_grid, dtype=float)
    cells: list[MapCell] = []
    for a in a_grid:
        cfg = LatticeConfig(
            spacing=float(a), n_x=config.n_x, n_y=config.n_y, handedness=config.handedness
        )
        system = ArraySystem(build_geometry(cfg, [impurity]))
        modes = system.modes
        coupling = system.coupling(0)
        sigmas = self_energy_sweep(modes, coupling, delta_grid)
        if drive is not None:
            rabis = effective_rabi_sweep(modes, coupling, delta_grid, drive)
        for idx, delta in enumerate(delta_grid):
            try:
                _check_pole(modes.eigenvalues, float(delta))
                omega_eff = complex(rabis[idx]) if drive is not None else None
                params = effective_params(complex(sigmas[idx]), impurity.gamma_I, omega_eff)
                flag = (
                    markov_variation(modes, coupling, float(delta), params.gamma_eff)
                    > MARKOV_VARIATION_LIMIT
                )
                if flag:
                    params = EffectiveParams(
                        sigma_se=params.sigma_se,
                        gamma_eff=params.gamma_eff,
                        omega_shift=params.omega_shift,
                        omega_eff_drive=params.omega_eff_drive,
                        q1=params.q1,
                        markov_flag=True,
                    )
                cells.append(
                    MapCell(
                        spacing=float(a),
                        delta=float(delta),
                        params=params,
                        status="markov-warning" if flag else "ok",
                    )
                )
            except (PoleError, UnphysicalParamsError) as exc:
                cells.append(
                    MapCell(
                        spacing=float(a),
                        delta=float(delta),
                        params=None,
                        status="pole",
                        note=str(exc),
                    )
                )
    return cells


def map_overlays(
    config: LatticeConfig, impurity: ImpuritySpec, a_grid, n_k: int = 101, patch_size: int = 40
) -> list[tuple[float, float, float | None]]:
    """Per-spacing (a, omega_BE, dark detuning) curves for heatmap overlays.

    The dark curve is the k = 0 dark detuning from converged
    infinite-lattice projections; None where it is undefined (the
    orthogonal configuration only couples to band-edge modes).
    """
    rows = []
    for a in np.asarray(a_grid, dtype=float):
        cfg = LatticeConfig(
            spacing=float(a), n_x=config.n_x, n_y=config.n_y, handedness=config.handedness
        )
        edge = band_edge(cfg, n_k=n_k, patch_size=patch_size)
        if impurity.configuration == "identical":
            dark = dark_detuning_infinite(float(a), impurity.gamma_I)
        else:
            dark = None
        rows.append((float(a), float(edge), dark))
    return rows
