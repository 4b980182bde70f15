"""Lattice coupling matrix, impurity coupling vectors, and band structure.

The single-excitation lattice matrix M collects pairwise couplings
J - (i/2)*Gamma between lattice atoms, with diagonal -(i/2)*gamma_L; the
lattice block of the full non-Hermitian Hamiltonian is M - delta_LI * I.
For a uniform lattice polarization M is complex symmetric, and its
eigenvectors can be normalized bilinearly (v^T v = 1) so that spectral
sums reproduce linear solves exactly.

The band structure of the infinite lattice is approximated by a
real-space sum of couplings over a finite, inversion-symmetric patch of
displacement vectors:

    J(k) - (i/2)Gamma(k) = -(i/2)gamma_L + sum_{r != 0} K(r) e^{-i k.r}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .geometry import SystemGeometry, LatticeConfig
from .green import GAMMA_L, OMEGA_L, coupling_kernel


def assemble_lattice_matrix(geometry: SystemGeometry) -> np.ndarray:
    """N x N complex coupling matrix over the lattice atoms.

    Off-diagonal entries are pair couplings at gamma_L; the diagonal is
    exactly -(i/2)*gamma_L.
    """
    pos = geometry.lattice_positions
    n = pos.shape[0]
    if n < 2:
        raise ValueError("need at least 2 lattice atoms")
    d = geometry.lattice_dipole()
    disp = pos[:, None, :] - pos[None, :, :]
    # keep the kernel off the zero diagonal, then overwrite it
    disp[np.arange(n), np.arange(n), 0] = 1.0
    m = coupling_kernel(disp, d, d, geometry.config.gamma_L, geometry.config.gamma_L)
    m[np.arange(n), np.arange(n)] = -0.5j * geometry.config.gamma_L
    return m


@dataclass(frozen=True)
class ImpurityCoupling:
    """Impurity-lattice coupling vectors for one impurity.

    forward[i] is the coefficient of sigma_i^dagger s (excitation hops
    from the impurity onto lattice atom i); reverse[i] the coefficient of
    s^dagger sigma_i.  For the identical configuration both J and Gamma
    are real and reverse == forward; for complex couplings (orthogonal
    configuration) reverse carries the conjugated J and Gamma of the
    k-space coupling convention.
    """

    forward: np.ndarray
    reverse: np.ndarray

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.forward, self.reverse, rtol=0, atol=1e-14))

    def k_projection(self, displacements: np.ndarray, k) -> tuple[complex, complex]:
        """Quasimomentum projections (Jt(k), Gt(k)) of the coupling.

        Fourier phases are taken relative to the impurity position, so
        plaquette-centered impurities give real projections.
        """
        k = np.asarray(k, dtype=float)
        phases = np.exp(-1j * (displacements[:, :2] @ k))
        j_site = 0.5 * (self.forward + np.conj(self.reverse))
        gamma_site = 1j * (self.forward - np.conj(self.reverse))
        return complex(phases @ j_site), complex(phases @ gamma_site)


def impurity_vector(geometry: SystemGeometry, impurity_index: int) -> ImpurityCoupling:
    """Coupling vectors between one impurity and every lattice atom."""
    if not 0 <= impurity_index < geometry.n_impurities:
        raise IndexError("impurity index out of range")
    spec = geometry.impurities[impurity_index]
    r_imp = geometry.impurity_positions[impurity_index]
    d_lat = geometry.lattice_dipole()
    d_imp = geometry.impurity_dipole(impurity_index)
    disp = geometry.lattice_positions - r_imp
    fwd = coupling_kernel(disp, d_lat, d_imp, geometry.config.gamma_L, spec.gamma_I)
    rev = coupling_kernel(-disp, d_imp, d_lat, spec.gamma_I, geometry.config.gamma_L)
    return ImpurityCoupling(forward=fwd, reverse=rev)


@dataclass(frozen=True)
class LatticeModes:
    """Eigendecomposition of the complex-symmetric lattice matrix.

    Eigenvectors are normalized bilinearly, v^T v = 1, so left
    eigenvectors are transposes of right ones and

        (delta*I - M)^{-1} = V diag(1/(delta - lam)) V^T.

    Degenerate clusters are orthogonalized with the same bilinear form;
    spectral sums over them are projector sums and therefore
    basis-independent.  `basis_defect` records max|V^T V - I| as a
    quality certificate.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)
    basis_defect: float

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def project(self, vec: np.ndarray) -> np.ndarray:
        """Mode amplitudes V^T vec."""
        return self.vectors.T @ vec

    def pair_weights(self, g_rev: np.ndarray, g_fwd: np.ndarray) -> np.ndarray:
        """Per-mode numerators (g_rev . v_m)(v_m . g_fwd) of the mode sums."""
        return self.project(g_rev) * self.project(g_fwd)

    def resolvent_sum(self, weights: np.ndarray, deltas) -> np.ndarray:
        """sum_m weights_m / (delta - lam_m), vectorized over deltas."""
        deltas = np.atleast_1d(np.asarray(deltas, dtype=complex))
        return (weights[None, :] / (deltas[:, None] - self.eigenvalues[None, :])).sum(axis=1)

    def nearest_eigenvalue(self, delta: float) -> complex:
        idx = int(np.argmin(np.abs(self.eigenvalues - delta)))
        return complex(self.eigenvalues[idx])


def lattice_modes(matrix: np.ndarray, degeneracy_tol: float = 1e-8) -> LatticeModes:
    """Eigendecomposition with bilinear (unconjugated) normalization."""
    eigvals, vecs = scipy.linalg.eig(matrix)
    order = np.lexsort((eigvals.imag, eigvals.real))
    eigvals = eigvals[order]
    vecs = vecs[:, order]

    scale = max(np.max(np.abs(eigvals)), 1.0)
    # group nearly-degenerate eigenvalues, then bilinear Gram-Schmidt per group
    start = 0
    groups = []
    for i in range(1, len(eigvals) + 1):
        if i == len(eigvals) or abs(eigvals[i] - eigvals[i - 1]) > degeneracy_tol * scale:
            groups.append((start, i))
            start = i
    for lo, hi in groups:
        for i in range(lo, hi):
            v = vecs[:, i]
            for j in range(lo, i):
                v = v - (vecs[:, j] @ v) * vecs[:, j]
            norm_sq = v @ v
            if abs(norm_sq) < 1e-12:
                raise np.linalg.LinAlgError(
                    "quasi-null eigenvector in degenerate cluster; "
                    "use the linear-solve path for this matrix"
                )
            vecs[:, i] = v / np.sqrt(norm_sq)
    defect = float(np.max(np.abs(vecs.T @ vecs - np.eye(len(eigvals)))))
    return LatticeModes(eigenvalues=eigvals, vectors=vecs, basis_defect=defect)


class ArraySystem:
    """Caches the coupling matrix, modes, and impurity vectors of one geometry."""

    def __init__(self, geometry: SystemGeometry):
        self.geometry = geometry
        self._matrix = None
        self._modes = None
        self._couplings: dict[int, ImpurityCoupling] = {}

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = assemble_lattice_matrix(self.geometry)
        return self._matrix

    @property
    def modes(self) -> LatticeModes:
        if self._modes is None:
            self._modes = lattice_modes(self.matrix)
        return self._modes

    def coupling(self, impurity_index: int) -> ImpurityCoupling:
        if impurity_index not in self._couplings:
            self._couplings[impurity_index] = impurity_vector(self.geometry, impurity_index)
        return self._couplings[impurity_index]


def patch_displacements(
    spacing: float, patch_size: int, weighting: str = "triangular"
) -> tuple[np.ndarray, np.ndarray]:
    """Inversion-symmetric displacement set of an n x n patch around the origin.

    Uses integer offsets i, j in [-patch_size//2, +patch_size//2] excluding
    (0, 0), which keeps J(k) and Gamma(k) exactly even in k.  Returns
    (displacements, weights).  "triangular" weights make the k sum the
    exact Rayleigh quotient of a plane wave on a finite array, which
    keeps Gamma(k) nonnegative (the decay matrix is positive
    semidefinite); "uniform" is the bare truncated lattice sum, whose
    Gibbs ringing can push Gamma(k) negative outside the light cone.
    """
    m = patch_size // 2
    if m < 1:
        raise ValueError("patch must span at least one neighbor shell")
    idx = np.arange(-m, m + 1)
    ix, iy = np.meshgrid(idx, idx, indexing="ij")
    mask = (ix != 0) | (iy != 0)
    if weighting == "triangular":
        weights = (1.0 - np.abs(ix[mask]) / (m + 1)) * (1.0 - np.abs(iy[mask]) / (m + 1))
    elif weighting == "uniform":
        weights = np.ones(int(mask.sum()))
    else:
        raise ValueError("weighting must be 'triangular' or 'uniform'")
    return np.column_stack([ix[mask] * spacing, iy[mask] * spacing]), weights


@dataclass(frozen=True)
class BandStructure:
    """J(k), Gamma(k) over a Brillouin-zone grid plus light-cone mask and edge."""

    kx: np.ndarray
    ky: np.ndarray
    J: np.ndarray
    Gamma: np.ndarray
    in_light_cone: np.ndarray
    omega_be: float
    k_at_edge: tuple[float, float]
    patch_size: int
    weighting: str


def _band_values(
    config: LatticeConfig, k_points: np.ndarray, patch_size: int, weighting: str
) -> np.ndarray:
    """J(k) - (i/2)Gamma(k) on arbitrary k points (rows of k_points)."""
    disp, weights = patch_displacements(config.spacing, patch_size, weighting)
    d = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)  # handedness-independent for J/Gamma
    disp3 = np.column_stack([disp, np.zeros(len(disp))])
    couplings = weights * coupling_kernel(disp3, d, d, config.gamma_L, config.gamma_L)
    values = np.empty(len(k_points), dtype=complex)
    chunk = max(1, 4_000_000 // max(len(disp), 1))
    for lo in range(0, len(k_points), chunk):
        hi = min(lo + chunk, len(k_points))
        phases = np.exp(-1j * (k_points[lo:hi] @ disp.T))
        values[lo:hi] = phases @ couplings
    return values - 0.5j * config.gamma_L


def band_structure(
    config: LatticeConfig,
    k_grid: np.ndarray | None = None,
    n_k: int = 101,
    patch_size: int = 40,
    weighting: str = "triangular",
) -> BandStructure:
    """Collective frequency shift and decay over the first Brillouin zone.

    k_grid: optional (Q, 2) array of quasimomenta; defaults to an
    n_k x n_k uniform grid over [-pi/a, pi/a]^2.  Grid points outside the
    first Brillouin zone are rejected.
    """
    k_max = np.pi / config.spacing
    if k_grid is None:
        axis = np.linspace(-k_max, k_max, n_k)
        kxg, kyg = np.meshgrid(axis, axis, indexing="ij")
        k_points = np.column_stack([kxg.ravel(), kyg.ravel()])
    else:
        k_points = np.asarray(k_grid, dtype=float).reshape(-1, 2)
        if np.any(np.abs(k_points) > k_max * (1 + 1e-12)):
            raise ValueError("quasimomentum grid extends outside the first Brillouin zone")
    values = _band_values(config, k_points, patch_size, weighting)
    j = values.real
    gamma = -2.0 * values.imag
    cone = (k_points**2).sum(axis=1) <= OMEGA_L**2
    edge_idx = int(np.argmax(j))
    return BandStructure(
        kx=k_points[:, 0],
        ky=k_points[:, 1],
        J=j,
        Gamma=gamma,
        in_light_cone=cone,
        omega_be=float(j[edge_idx]),
        k_at_edge=(float(k_points[edge_idx, 0]), float(k_points[edge_idx, 1])),
        patch_size=patch_size,
        weighting=weighting,
    )


def band_edge(
    config: LatticeConfig, n_k: int = 101, patch_size: int = 40, weighting: str = "triangular"
) -> float:
    """Band edge omega_BE = max_k J(k) over a dense Brillouin-zone grid."""
    return band_structure(config, n_k=n_k, patch_size=patch_size, weighting=weighting).omega_be


def uniform_mode_value(matrix: np.ndarray) -> complex:
    """J(0) - (i/2)Gamma(0) of the finite array: Rayleigh quotient of the uniform mode."""
    n = matrix.shape[0]
    ones = np.ones(n)
    return complex(ones @ matrix @ ones / n)
