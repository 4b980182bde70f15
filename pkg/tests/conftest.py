import numpy as np
import pytest

from array_emitters.coupling import ArraySystem
from array_emitters.geometry import ImpuritySpec, LatticeConfig, build_geometry

GAMMA_I = 0.01


@pytest.fixture(scope="session")
def system_20x20_a02():
    """20x20 lattice at a = 0.2 with a centered identical-configuration impurity."""
    cfg = LatticeConfig(spacing=0.2, n_x=20, n_y=20)
    spec = ImpuritySpec(cfg.central_plaquette(), gamma_I=GAMMA_I)
    system = ArraySystem(build_geometry(cfg, [spec]))
    system.modes  # force the one expensive diagonalization
    return system


@pytest.fixture(scope="session")
def system_10x10_a01():
    """10x10 lattice at a = 0.1 with a centered identical-configuration impurity."""
    cfg = LatticeConfig(spacing=0.1, n_x=10, n_y=10)
    spec = ImpuritySpec(cfg.central_plaquette(), gamma_I=GAMMA_I)
    system = ArraySystem(build_geometry(cfg, [spec]))
    system.modes
    return system


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
