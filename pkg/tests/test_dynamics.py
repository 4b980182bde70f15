import numpy as np
import pytest

from array_emitters.dynamics import (
    MetricsUnavailableError,
    TimeSeries,
    build_full_hamiltonian,
    default_time_grid,
    evolve,
    markov_reduction,
    transfer_metrics,
)
from array_emitters.geometry import (
    ImpuritySpec,
    LatticeConfig,
    build_geometry,
    symmetric_pair_specs,
)
from array_emitters.pairwise import free_space_phi
from array_emitters.toy import toy_couplings, toy_dark_detuning, toy_dressed_states

GAMMA_I = 0.01


def test_single_impurity_without_lattice():
    cfg = LatticeConfig(spacing=0.2, n_x=4, n_y=4)
    geo = build_geometry(cfg, [ImpuritySpec((1, 1), gamma_I=GAMMA_I)])
    h = build_full_hamiltonian(geo, 2.0, include_lattice=False)
    assert h.shape == (1, 1)
    assert h[0, 0] == -0.5j * GAMMA_I
    t = np.linspace(0, 50, 300)
    ts = evolve(h, [1.0], t)
    np.testing.assert_allclose(
        ts.site_population(0), np.exp(-GAMMA_I * t), rtol=0, atol=1e-10
    )


def test_two_free_impurities_beat_at_re_phi():
    # deep near field (d = 0.01 lambda): the dissipative part of phi
    # shifts the beat spacing at second order, (Im/Re)^2 ~ 1e-7
    cfg = LatticeConfig(spacing=0.01, n_x=10, n_y=10)
    geo = build_geometry(cfg, symmetric_pair_specs(cfg, 1, gamma_I=1e-5))
    h = build_full_hamiltonian(geo, 0.0, include_lattice=False)
    phi = free_space_phi(geo)
    assert h.shape == (2, 2)
    assert abs(h[0, 1] - phi) < 1e-15
    period = np.pi / abs(phi.real)
    t = np.linspace(0, 6 * period, 60000)
    ts = evolve(h, [1.0, 0.0], t, n_lattice=0)
    metrics = transfer_metrics(ts, 1)
    assert abs(metrics.frequency - abs(phi.real)) / abs(phi.real) < 1e-6


def test_full_hamiltonian_layout_and_symmetry():
    cfg = LatticeConfig(spacing=0.2, n_x=4, n_y=4)
    geo = build_geometry(cfg, symmetric_pair_specs(cfg, 1, gamma_I=GAMMA_I))
    delta = 1.7
    h = build_full_hamiltonian(geo, delta)
    n = geo.n_lattice
    assert h.shape == (n + 2, n + 2)
    np.testing.assert_allclose(np.diag(h)[:n], -delta - 0.5j, atol=1e-15)
    np.testing.assert_allclose(np.diag(h)[n:], -0.5j * GAMMA_I, atol=1e-18)
    # identical configuration: complex symmetric
    assert np.max(np.abs(h - h.T)) < 1e-12
    # passivity: no growing modes
    assert np.linalg.eigvals(h).imag.max() <= 1e-8


def test_spectrum_contains_dressed_states():
    a = 0.2
    tc = toy_couplings(a, GAMMA_I)
    dark_det = toy_dark_detuning(tc)
    cfg = LatticeConfig(spacing=a, n_x=2, n_y=2)
    geo = build_geometry(cfg, [ImpuritySpec((0, 0), gamma_I=GAMMA_I)])
    h = build_full_hamiltonian(geo, dark_det)
    dark, radiant = toy_dressed_states(tc, dark_det, GAMMA_I)
    eigs = np.linalg.eigvals(h)
    for state in (dark, radiant):
        assert np.min(np.abs(eigs - state.eigenvalue)) < 5e-4


def test_propagator_consistency_eig_vs_ode():
    cfg = LatticeConfig(spacing=0.15, n_x=4, n_y=4)
    geo = build_geometry(cfg, symmetric_pair_specs(cfg, 1, gamma_I=GAMMA_I))
    h = build_full_hamiltonian(geo, 3.0)
    init = np.zeros(h.shape[0], dtype=complex)
    init[geo.n_lattice] = 1.0
    t = np.linspace(0, 30, 400)
    ts_eig = evolve(h, init, t, n_lattice=geo.n_lattice)
    assert ts_eig.method == "eig"

    import scipy.integrate

    def rhs(_t, y):
        c = y[: h.shape[0]] + 1j * y[h.shape[0] :]
        dc = -1j * (h @ c)
        return np.concatenate([dc.real, dc.imag])

    sol = scipy.integrate.solve_ivp(
        rhs,
        (0.0, 30.0),
        np.concatenate([init.real, init.imag]),
        t_eval=t,
        rtol=1e-10,
        atol=1e-12,
        method="DOP853",
    )
    amp = (sol.y[: h.shape[0]] + 1j * sol.y[h.shape[0] :]).T
    assert np.max(np.abs(np.abs(amp) ** 2 - ts_eig.populations)) < 1e-7


def test_population_bounds_and_monotonicity():
    cfg = LatticeConfig(spacing=0.2, n_x=6, n_y=6)
    geo = build_geometry(cfg, symmetric_pair_specs(cfg, 1, gamma_I=GAMMA_I))
    h = build_full_hamiltonian(geo, 1.3)
    init = np.zeros(h.shape[0], dtype=complex)
    init[geo.n_lattice] = 1.0
    t = np.linspace(0, 100, 2000)
    ts = evolve(h, init, t, n_lattice=geo.n_lattice)
    assert ts.populations.max() <= 1.0 + 1e-12
    total = ts.total_population()
    assert total[0] == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.diff(total) <= 1e-8)


def test_initial_state_validation():
    h = np.array([[-0.5j * GAMMA_I]])
    with pytest.raises(ValueError):
        evolve(h, [1.0, 0.0], np.linspace(0, 1, 10))
    with pytest.raises(ValueError):
        evolve(h, [1.5], np.linspace(0, 1, 10))


def test_metrics_unavailable_for_pure_decay():
    t = np.linspace(0, 10, 500)
    amp = np.exp(-0.05 * t)[:, None].astype(complex)
    ts = TimeSeries(times=t, amplitudes=amp, n_lattice=0)
    with pytest.raises(MetricsUnavailableError) as err:
        transfer_metrics(ts, 0)
    assert err.value.n_peaks < 3


def test_metrics_on_synthetic_beat():
    # sin^2(phi t) exchange under exp(-gamma t) decay: exact recovery
    phi, gamma = 0.05, 1e-3
    t = np.linspace(0, 6 * np.pi / phi, 6000)
    c1 = np.cos(phi * t) * np.exp(-0.5 * gamma * t)
    c2 = -1j * np.sin(phi * t) * np.exp(-0.5 * gamma * t)
    ts = TimeSeries(times=t, amplitudes=np.column_stack([c1, c2]), n_lattice=0)
    metrics = transfer_metrics(ts, 1)
    assert abs(metrics.frequency - phi) / phi < 1e-4
    assert abs(metrics.decay - gamma) / gamma < 1e-3
    assert metrics.quality == pytest.approx(phi / gamma, rel=2e-3)


def test_markov_reduction_shape():
    cfg = LatticeConfig(spacing=0.2, n_x=4, n_y=4)
    # m = 2 keeps the pair mirror-symmetric about the array center
    geo = build_geometry(cfg, symmetric_pair_specs(cfg, 2, gamma_I=GAMMA_I))
    h = build_full_hamiltonian(geo, 2.5)
    eff = markov_reduction(h, geo.n_lattice)
    assert eff.shape == (2, 2)
    assert abs(eff[0, 0] - eff[1, 1]) < 1e-12  # symmetric placement


def test_default_time_grid_shapes():
    single = default_time_grid(0.01)
    assert len(single) == 2000 and single[-1] == pytest.approx(1000.0)
    pair = default_time_grid(1e-7, 0.01)
    assert pair[-1] <= 10.0 / 1e-7
    # at least 3.5 exchange periods, densely sampled
    assert pair[-1] >= 3.5 * np.pi / 0.01
    assert len(pair) >= 2000
