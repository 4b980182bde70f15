"""Array-mediated interaction between two embedded impurities.

The effective exchange splits into the free-space dipole-dipole coupling
phi and a lattice-mediated resolvent term; the total Phi_Eff follows the
driven-response convention (conjugate lattice propagator), under which
its real part -- the coherent transfer rate entering the two-impurity
quality factor Q2 = Re[Phi_Eff]/Gamma_Eff -- coincides with the
amplitude-level elimination of the lattice.

Scan drivers reuse one lattice diagonalization per (spacing, detuning)
across every impurity separation at that spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import (
    LatticeModes,
    assemble_lattice_matrix,
    band_edge,
    impurity_vector,
    lattice_modes,
)
from .geometry import (
    DEFAULT_GAMMA_I,
    LatticeConfig,
    SystemGeometry,
    build_geometry,
    symmetric_pair_specs,
)
from .green import coupling_kernel
from .markov import PoleError, _as_coupling, _check_pole, self_energy_spectral

ORTHOGONAL_DETUNING_FACTOR = 1.05  # delta_LI = 1.05 * omega_BE keeps the Markov regime
FIT_WINDOW_FACTOR = 3.0


class FitError(ValueError):
    """Scaling fit attempted on insufficient or degenerate data."""


@dataclass(frozen=True)
class TwoImpurityResult:
    """Effective interaction of one impurity pair at fixed (a, delta_LI)."""

    phi_eff: complex
    phi_free: complex
    gamma_eff_1: float
    gamma_eff_2: float
    q2: float
    separation: float
    configuration: str
    gamma_I: float = 0.01

    @property
    def q2_free(self) -> float:
        """Free-space reference quality factor |Re phi|/gamma_I at this separation."""
        return abs(self.phi_free.real) / self.gamma_I

    @property
    def gamma_eff(self) -> float:
        return self.gamma_eff_1

    @property
    def abs_q2(self) -> float:
        return abs(self.q2)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line fit in transformed coordinates, with R^2 kept."""

    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    decay_length: float | None = None  # xi of Q2 ~ exp(-d/xi), distance fits only


def free_space_phi(geometry: SystemGeometry, index_1: int = 0, index_2: int = 1) -> complex:
    """Free-space dipole-dipole coupling J - (i/2)Gamma between two impurities."""
    m = geometry.n_impurities
    if not (0 <= index_1 < m and 0 <= index_2 < m) or index_1 == index_2:
        raise IndexError("need two distinct impurities")
    disp = geometry.impurity_positions[index_1] - geometry.impurity_positions[index_2]
    if not np.any(disp):
        raise ValueError("impurities coincide")
    d1 = geometry.impurity_dipole(index_1)
    d2 = geometry.impurity_dipole(index_2)
    g1 = geometry.impurities[index_1].gamma_I
    g2 = geometry.impurities[index_2].gamma_I
    return complex(coupling_kernel(disp, d1, d2, g1, g2))


def effective_interaction(
    matrix: np.ndarray, g1, g2, delta: float, phi: complex, eigenvalues=None
) -> complex:
    """Phi_Eff: conjugated lattice-mediated exchange plus the free-space phi."""
    c1 = _as_coupling(g1)
    c2 = _as_coupling(g2)
    _check_pole(eigenvalues, delta)
    n = matrix.shape[0]
    try:
        x = np.linalg.solve(delta * np.eye(n) - matrix, c2.forward)
    except np.linalg.LinAlgError as exc:
        raise PoleError(delta, np.nan) from exc
    return complex(np.conj(c1.reverse @ x) + phi)


def effective_interaction_spectral(
    modes: LatticeModes, g1, g2, delta: float, phi: complex
) -> complex:
    c1 = _as_coupling(g1)
    c2 = _as_coupling(g2)
    _check_pole(modes.eigenvalues, delta)
    weights = modes.pair_weights(c1.reverse, c2.forward)
    return complex(np.conj(modes.resolvent_sum(weights, delta)[0]) + phi)


def q2(phi_eff: complex, gamma_eff: float) -> float:
    """Two-impurity quality factor Re[Phi_Eff]/Gamma_Eff (sign preserved)."""
    if not gamma_eff > 0:
        raise ValueError(f"Gamma_Eff = {gamma_eff!r} must be positive")
    return float(phi_eff.real / gamma_eff)


def pair_result(
    geometry: SystemGeometry, delta: float, modes: LatticeModes | None = None
) -> TwoImpurityResult:
    """Full two-impurity evaluation on a geometry holding exactly two impurities."""
    if geometry.n_impurities != 2:
        raise ValueError("geometry must hold exactly two impurities")
    if modes is None:
        modes = lattice_modes(assemble_lattice_matrix(geometry))
    g1 = impurity_vector(geometry, 0)
    g2 = impurity_vector(geometry, 1)
    phi = free_space_phi(geometry)
    sig1 = self_energy_spectral(modes, g1, delta)
    sig2 = self_energy_spectral(modes, g2, delta)
    gam1 = geometry.impurities[0].gamma_I - 2.0 * sig1.imag
    gam2 = geometry.impurities[1].gamma_I - 2.0 * sig2.imag
    phi_eff = effective_interaction_spectral(modes, g1, g2, delta, phi)
    return TwoImpurityResult(
        phi_eff=phi_eff,
        phi_free=phi,
        gamma_eff_1=float(gam1),
        gamma_eff_2=float(gam2),
        q2=q2(phi_eff, float(gam1)),
        separation=geometry.impurity_separation(0, 1),
        configuration=geometry.impurities[0].configuration,
        gamma_I=geometry.impurities[0].gamma_I,
    )


def default_detuning(
    config: LatticeConfig, configuration: str, gamma_I: float = DEFAULT_GAMMA_I
) -> float:
    """Operating detuning per configuration.

    Identical: the dark detuning of the lattice k = 0 mode (converged
    infinite-lattice projections, which track the finite-array linewidth
    valley to ~0.1 gamma_L).  Orthogonal: 1.05*omega_BE, just above the
    band edge to stay inside the Markovian window.
    """
    if configuration == "orthogonal":
        return ORTHOGONAL_DETUNING_FACTOR * band_edge(config)
    from .markov import dark_detuning_infinite

    return dark_detuning_infinite(config.spacing, gamma_I)


def _fit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    if len(x) < 4:
        raise FitError(f"fit needs at least 4 points, got {len(x)}")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - np.mean(y)
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 0.0
    return float(slope), float(intercept), r2


def exponential_fit(results: list[TwoImpurityResult]) -> ScalingFit:
    """Exponential fit of |Q2| vs separation over the pre-floor window.

    At large separation every scan settles onto a fluctuation floor set
    by the free-space exchange as transmitted through the array --
    transmission ~1 for the orthogonal configuration, but orders of
    magnitude below 1 under dark-state screening in the identical
    configuration.  The transmission is estimated from the scan tail
    (capped at the bare free-space value), and only points at least
    FIT_WINDOW_FACTOR above that floor enter the fit.
    """
    tail = [r for r in results[-3:] if abs(r.phi_free.real) > 0]
    if tail:
        transmission = float(
            np.median([abs(r.phi_eff.real) / abs(r.phi_free.real) for r in tail])
        )
    else:
        transmission = 1.0
    transmission = min(1.0, transmission)
    kept = [
        r
        for r in results
        if r.abs_q2 > 0
        and r.abs_q2
        > FIT_WINDOW_FACTOR * transmission * abs(r.phi_free.real) / r.gamma_eff_1
    ]
    x = np.array([r.separation for r in kept])
    y = np.log(np.array([r.abs_q2 for r in kept]))
    slope, intercept, r2 = _fit_line(x, y)
    xi = -1.0 / slope if slope < 0 else None
    return ScalingFit(x=x, y=y, slope=slope, intercept=intercept, r_squared=r2,
                      decay_length=xi)


def distance_scan(
    config: LatticeConfig,
    separations,
    delta: float | None = None,
    gamma_I: float = DEFAULT_GAMMA_I,
    configuration: str = "identical",
    fit: bool = True,
) -> tuple[list[TwoImpurityResult], ScalingFit | None]:
    """Two-impurity results vs separation d = m*a on the plaquette-center grid.

    One lattice diagonalization is shared by every separation.
    """
    separations = [int(m) for m in separations]
    if delta is None:
        delta = default_detuning(config, configuration, gamma_I)
    lattice_only = build_geometry(config)
    modes = lattice_modes(assemble_lattice_matrix(lattice_only))
    results = []
    for m in separations:
        specs = symmetric_pair_specs(config, m, gamma_I=gamma_I, configuration=configuration)
        geometry = build_geometry(config, specs)
        results.append(pair_result(geometry, delta, modes=modes))
    return results, (exponential_fit(results) if fit else None)


def free_space_q2_at(config: LatticeConfig, m: int, gamma_I: float, configuration: str) -> float:
    """Free-space reference Q2 at separation m*a (no lattice, Gamma_Eff = gamma_I)."""
    specs = symmetric_pair_specs(config, m, gamma_I=gamma_I, configuration=configuration)
    geometry = build_geometry(config, specs)
    phi = free_space_phi(geometry)
    return q2(phi, gamma_I)


def spacing_scan(
    config_template: LatticeConfig,
    spacings,
    gamma_I: float = DEFAULT_GAMMA_I,
    configurations=("identical", "orthogonal", "free"),
) -> dict[str, tuple[np.ndarray, np.ndarray, ScalingFit]]:
    """|Q2(d=a)| vs spacing with log-log slope fits per configuration.

    The "free" series is the two-impurity free-space reference.
    """
    spacings = np.asarray(spacings, dtype=float)
    out: dict[str, tuple[np.ndarray, np.ndarray, ScalingFit]] = {}
    for label in configurations:
        values = []
        for a in spacings:
            cfg = LatticeConfig(
                spacing=float(a),
                n_x=config_template.n_x,
                n_y=config_template.n_y,
                handedness=config_template.handedness,
            )
            if label == "free":
                values.append(abs(free_space_q2_at(cfg, 1, gamma_I, "identical")))
            else:
                results, _ = distance_scan(
                    cfg, [1], gamma_I=gamma_I, configuration=label, fit=False
                )
                values.append(results[0].abs_q2)
        values = np.asarray(values)
        slope, intercept, r2 = _fit_line(np.log(spacings), np.log(values))
        out[label] = (
            spacings,
            values,
            ScalingFit(
                x=np.log(spacings),
                y=np.log(values),
                slope=slope,
                intercept=intercept,
                r_squared=r2,
            ),
        )
    return out


def reach_scan(
    config_template: LatticeConfig,
    spacings,
    threshold: float = 1.0,
    gamma_I: float = DEFAULT_GAMMA_I,
    configuration: str = "orthogonal",
) -> list[tuple[float, int]]:
    """Largest separation (in lattice spacings) with |Q2| above threshold, per spacing."""
    out = []
    for a in np.asarray(spacings, dtype=float):
        cfg = LatticeConfig(
            spacing=float(a),
            n_x=config_template.n_x,
            n_y=config_template.n_y,
            handedness=config_template.handedness,
        )
        max_m = cfg.n_x - 2
        results, _ = distance_scan(
            cfg, range(1, max_m + 1), gamma_I=gamma_I, configuration=configuration, fit=False
        )
        above = [m for m, r in zip(range(1, max_m + 1), results) if r.abs_q2 > threshold]
        out.append((float(a), max(above) if above else 0))
    return out
