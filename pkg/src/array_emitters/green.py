"""Free-space dyadic Green's function and pairwise dipole-dipole couplings.

Conventions: lambda = 1 so the lattice transition frequency is
OMEGA_L = 2*pi (c = 1); linewidths are measured in units of GAMMA_L = 1.
The contact (delta-function) term of the Green's function is never
evaluated: atoms at coincident positions are rejected, and self-terms are
handled by explicit diagonal entries downstream.

A pair coupling is the complex combination J - (i/2)*Gamma obtained by
projecting the Green's tensor onto the two transition dipoles,

    K(i<-j) = -(3*pi*sqrt(gamma_i*gamma_j)/OMEGA_L) * conj(d_i) . G(r_i - r_j) . d_j

which is the coefficient of the process "excitation hops from atom j to
atom i".  For equal polarizations K is direction-independent under
exchange, and J, Gamma are real.  For unequal complex polarizations
(e.g. opposite circular), J and Gamma are themselves complex and the
reverse coupling K(j<-i) equals conj(J) - (i/2)*conj(Gamma); both
directions are exposed so downstream code can honor that structure.
"""

from __future__ import annotations

import numpy as np

OMEGA_L = 2.0 * np.pi
GAMMA_L = 1.0

_PREFACTOR = 3.0 * np.pi / OMEGA_L


class ZeroDisplacementError(ValueError):
    """Self-term excluded: the Green's function is not evaluated at r = 0."""


def circular_dipole(handedness: str) -> np.ndarray:
    """Unit circular polarization vector in the xy-plane, (x ± i*y)/sqrt(2).

    handedness: "right" for (1, +i, 0)/sqrt(2), "left" for (1, -i, 0)/sqrt(2).
    """
    if handedness == "right":
        return np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)
    if handedness == "left":
        return np.array([1.0, -1.0j, 0.0]) / np.sqrt(2.0)
    raise ValueError(f"handedness must be 'right' or 'left', got {handedness!r}")


def _radial_factors(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scalar radial factors (A, B) with G = A*delta_ij - B*rhat_i*rhat_j.

    A multiplies the identity, B the transverse projector part:
      A = e^{i w r}/(4 pi r) * (1 + i/(w r) - 1/(w r)^2)
      B = e^{i w r}/(4 pi r) * (1 + 3i/(w r) - 3/(w r)^2)
    """
    u = OMEGA_L * r
    phase = np.exp(1j * u) / (4.0 * np.pi * r)
    inv = 1.0 / u
    a = phase * (1.0 + 1j * inv - inv**2)
    b = phase * (1.0 + 3.0j * inv - 3.0 * inv**2)
    return a, b


def green_tensor(r) -> np.ndarray:
    """Free-space dyadic Green's tensor G(r, OMEGA_L) as a 3x3 complex array.

    The contact term is omitted (precondition |r| > 0).
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("displacement must be a 3-vector")
    if not np.all(np.isfinite(r)):
        raise ValueError("displacement components must be finite")
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise ZeroDisplacementError("self-term excluded")
    a, b = _radial_factors(np.asarray(dist))
    rhat = r / dist
    return a * np.eye(3) - b * np.outer(rhat, rhat)


def coupling_kernel(disp, d_row, d_col, gamma_row=GAMMA_L, gamma_col=GAMMA_L):
    """Vectorized pair coupling K = J - (i/2)*Gamma over displacement rows.

    disp: array of shape (..., 3), displacement r_row - r_col for each pair.
    Returns a complex array of shape (...,).  Zero displacements raise.
    """
    disp = np.asarray(disp, dtype=float)
    dist = np.linalg.norm(disp, axis=-1)
    if np.any(dist == 0.0):
        raise ZeroDisplacementError("self-term excluded")
    a, b = _radial_factors(dist)
    rhat = disp / dist[..., None]
    d_row = np.asarray(d_row, dtype=complex)
    d_col = np.asarray(d_col, dtype=complex)
    proj_row = rhat @ np.conj(d_row)
    proj_col = rhat @ d_col
    scalar = a * (np.conj(d_row) @ d_col) - b * proj_row * proj_col
    return -_PREFACTOR * np.sqrt(gamma_row * gamma_col) * scalar


def pair_coupling(r_i, r_j, d_i, d_j, gamma_i=GAMMA_L, gamma_j=GAMMA_L) -> complex:
    """Coupling J - (i/2)*Gamma for the process j -> i (see module docstring).

    r_i, r_j: positions (3-vectors, lambda units); d_i, d_j: complex unit
    dipole vectors; gamma_i, gamma_j: linewidths in gamma_L units.
    """
    disp = np.asarray(r_i, dtype=float) - np.asarray(r_j, dtype=float)
    return complex(coupling_kernel(disp, d_i, d_j, gamma_i, gamma_j))


def pair_coupling_parts(r_i, r_j, d_i, d_j, gamma_i=GAMMA_L, gamma_j=GAMMA_L):
    """Coherent and dissipative parts (J, Gamma) of the coupling.

    Computed by contracting the real and imaginary parts of the Green's
    tensor separately, so both remain well defined (complex in general)
    when the two dipoles differ:
      J     = -(3 pi sqrt(g_i g_j)/w) * conj(d_i) . Re G . d_j,
      Gamma = +(6 pi sqrt(g_i g_j)/w) * conj(d_i) . Im G . d_j.
    For identical dipoles both are real and K = J - (i/2)*Gamma.
    """
    disp = np.asarray(r_i, dtype=float) - np.asarray(r_j, dtype=float)
    g = green_tensor(disp)
    scale = _PREFACTOR * np.sqrt(gamma_i * gamma_j)
    di = np.conj(np.asarray(d_i, dtype=complex))
    dj = np.asarray(d_j, dtype=complex)
    j_part = -scale * (di @ g.real @ dj)
    gamma_part = 2.0 * scale * (di @ g.imag @ dj)
    return complex(j_part), complex(gamma_part)
