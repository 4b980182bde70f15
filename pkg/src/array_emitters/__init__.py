"""Coupled-dipole simulator for impurity emitters in 2D subwavelength atom arrays.

Units throughout: lengths in units of the lattice transition wavelength
(lambda = 1, so the transition frequency is OMEGA_L = 2*pi with c = 1), and
all rates (J, Gamma, Sigma, Omega, Phi) in units of the lattice linewidth
gamma_L = 1.
"""

from .green import (
    OMEGA_L,
    GAMMA_L,
    circular_dipole,
    green_tensor,
    pair_coupling,
    pair_coupling_parts,
)
from .geometry import LatticeConfig, ImpuritySpec, SystemGeometry, build_geometry
from .coupling import (
    assemble_lattice_matrix,
    impurity_vector,
    band_structure,
    band_edge,
    lattice_modes,
)
from .markov import (
    DriveSpec,
    EffectiveParams,
    self_energy,
    effective_params,
    effective_rabi,
    optimal_dark_detuning,
    impurity_map,
)
from .toy import ToyCouplings, toy_couplings
from .pairwise import (
    TwoImpurityResult,
    free_space_phi,
    effective_interaction,
    q2,
    distance_scan,
    spacing_scan,
    reach_scan,
)
from .dynamics import build_full_hamiltonian, evolve, transfer_metrics

__version__ = "0.1.0"
