"""Finite square-array geometries with interstitial impurity emitters.

Lattice atoms sit on an exact rectangular grid, position(ix, iy) =
(ix*a, iy*a, 0), ordered row-major (index = ix*n_y + iy).  Impurities are
placed inside a plaquette, the unit square whose lower-left atom is the
plaquette index (i, j); the default offset is the plaquette center
(a/2, a/2).  Impurities follow the lattice atoms in input order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .green import GAMMA_L, circular_dipole

DEFAULT_GAMMA_I = 0.01

_OPPOSITE = {"right": "left", "left": "right"}


@dataclass(frozen=True)
class LatticeConfig:
    """Square-lattice parameters: spacing (lambda units), side counts, polarization."""

    spacing: float
    n_x: int
    n_y: int
    handedness: str = "right"
    gamma_L: float = GAMMA_L

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("lattice spacing must be positive")
        if self.n_x < 2 or self.n_y < 2:
            raise ValueError("lattice must have at least 2 atoms per side")
        if self.handedness not in _OPPOSITE:
            raise ValueError("handedness must be 'right' or 'left'")

    @property
    def n_atoms(self) -> int:
        return self.n_x * self.n_y

    def central_plaquette(self) -> tuple[int, int]:
        """Plaquette nearest the array center.

        Even sides: lower-left atom index n/2 - 1.  Odd sides: the two
        straddling plaquettes tie; break toward +x/+y with (n - 1)//2.
        """

        def central(n: int) -> int:
            return n // 2 - 1 if n % 2 == 0 else (n - 1) // 2

        return central(self.n_x), central(self.n_y)


@dataclass(frozen=True)
class ImpuritySpec:
    """One impurity: plaquette, in-plaquette offset, linewidth, polarization.

    configuration: "identical" (same circular handedness as the lattice)
    or "orthogonal" (opposite handedness).  offset defaults to the
    plaquette center and must lie strictly inside the plaquette.
    """

    plaquette: tuple[int, int]
    offset: tuple[float, float] | None = None
    gamma_I: float = DEFAULT_GAMMA_I
    configuration: str = "identical"

    def __post_init__(self):
        if self.configuration not in ("identical", "orthogonal"):
            raise ValueError("configuration must be 'identical' or 'orthogonal'")
        if not self.gamma_I > 0:
            raise ValueError("impurity linewidth must be positive")
        if self.gamma_I / GAMMA_L > 0.1:
            warnings.warn(
                f"gamma_I/gamma_L = {self.gamma_I / GAMMA_L:.3g} > 0.1: the lattice "
                "is no longer a fast (Markovian) bath for this impurity",
                stacklevel=2,
            )

    def handedness(self, lattice_handedness: str) -> str:
        if self.configuration == "identical":
            return lattice_handedness
        return _OPPOSITE[lattice_handedness]


@dataclass(frozen=True)
class SystemGeometry:
    """Immutable positions and polarizations of lattice atoms and impurities."""

    config: LatticeConfig
    impurities: tuple[ImpuritySpec, ...]
    lattice_positions: np.ndarray = field(repr=False)  # (N, 3)
    impurity_positions: np.ndarray = field(repr=False)  # (M, 3)

    @property
    def n_lattice(self) -> int:
        return self.lattice_positions.shape[0]

    @property
    def n_impurities(self) -> int:
        return self.impurity_positions.shape[0]

    def lattice_dipole(self) -> np.ndarray:
        return circular_dipole(self.config.handedness)

    def impurity_dipole(self, index: int) -> np.ndarray:
        spec = self.impurities[index]
        return circular_dipole(spec.handedness(self.config.handedness))

    def impurity_separation(self, index_1: int, index_2: int) -> float:
        """Euclidean distance between two impurities (lambda units)."""
        m = self.n_impurities
        if not (0 <= index_1 < m and 0 <= index_2 < m):
            raise IndexError("impurity index out of range")
        return float(
            np.linalg.norm(self.impurity_positions[index_1] - self.impurity_positions[index_2])
        )

    def to_json(self) -> str:
        """Serialize positions and specs for provenance in output files."""
        payload = {
            "lattice": {
                "spacing": self.config.spacing,
                "n_x": self.config.n_x,
                "n_y": self.config.n_y,
                "handedness": self.config.handedness,
                "gamma_L": self.config.gamma_L,
            },
            "impurities": [
                {
                    "plaquette": list(spec.plaquette),
                    "offset": list(spec.offset) if spec.offset is not None else None,
                    "gamma_I": spec.gamma_I,
                    "configuration": spec.configuration,
                    "position": [float(x) for x in pos],
                }
                for spec, pos in zip(self.impurities, self.impurity_positions)
            ],
        }
        return json.dumps(payload, sort_keys=True)


def _impurity_position(config: LatticeConfig, spec: ImpuritySpec) -> np.ndarray:
    a = config.spacing
    i, j = spec.plaquette
    if not (0 <= i <= config.n_x - 2 and 0 <= j <= config.n_y - 2):
        raise ValueError(f"plaquette {spec.plaquette} out of bounds for "
                         f"{config.n_x}x{config.n_y} lattice")
    offset = spec.offset if spec.offset is not None else (a / 2.0, a / 2.0)
    ox, oy = float(offset[0]), float(offset[1])
    # strictly inside: keeps the impurity in-plane but off every lattice site
    if not (0.0 < ox < a and 0.0 < oy < a):
        raise ValueError(f"offset {offset} not strictly inside an {a} x {a} plaquette")
    return np.array([i * a + ox, j * a + oy, 0.0])


def build_geometry(config: LatticeConfig, impurities=()) -> SystemGeometry:
    """Assemble lattice atom and impurity positions with deterministic ordering."""
    a = config.spacing
    ix, iy = np.meshgrid(np.arange(config.n_x), np.arange(config.n_y), indexing="ij")
    lattice = np.column_stack(
        [ix.ravel() * a, iy.ravel() * a, np.zeros(config.n_atoms)]
    )
    impurities = tuple(impurities)
    positions = [_impurity_position(config, spec) for spec in impurities]
    imp = np.array(positions).reshape(len(positions), 3)
    for k in range(len(positions)):
        for l in range(k + 1, len(positions)):
            if np.array_equal(imp[k], imp[l]):
                raise ValueError(f"impurities {k} and {l} coincide at {imp[k]}")
    return SystemGeometry(
        config=config,
        impurities=impurities,
        lattice_positions=lattice,
        impurity_positions=imp,
    )


def symmetric_pair_specs(
    config: LatticeConfig,
    separation_plaquettes: int,
    gamma_I: float = DEFAULT_GAMMA_I,
    configuration: str = "identical",
) -> tuple[ImpuritySpec, ImpuritySpec]:
    """Two plaquette-centered impurities d = m*a apart along the central row.

    The pair is placed as symmetrically as possible about the array
    center (exactly symmetric when n_x and m have equal parity),
    maximizing the distance to the boundary; odd cases shift half a
    plaquette toward -x.
    """
    m = int(separation_plaquettes)
    if m < 1:
        raise ValueError("separation must be at least one plaquette")
    j = config.central_plaquette()[1]
    i1 = (config.n_x - 2 - m) // 2
    i2 = i1 + m
    if i1 < 0 or i2 > config.n_x - 2:
        raise ValueError(
            f"separation {m}*a does not fit inside a {config.n_x}-wide lattice"
        )
    return (
        ImpuritySpec((i1, j), gamma_I=gamma_I, configuration=configuration),
        ImpuritySpec((i2, j), gamma_I=gamma_I, configuration=configuration),
    )
