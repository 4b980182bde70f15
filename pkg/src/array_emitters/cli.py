"""Batch CLI: configuration parsing, sweep orchestration, persistent outputs.

    array-emitters <study> --config cfg.json [--out DIR] [--threads N]

Studies: band, impurity-map, two-impurity-map, distance-scan,
spacing-scan, reach-scan, dynamics, toy-check.  Exit codes: 0 success,
2 configuration error, 3 systemic compute error.  Per-cell failures
(poles) are recorded in the outputs and do not fail the process.
The ARRAY_EMITTERS_THREADS environment variable overrides any other
thread setting.  Grid cells are independent; parallel and serial runs
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coupling import ArraySystem, band_structure, band_edge, impurity_vector, lattice_modes, assemble_lattice_matrix
from .dynamics import (
    MetricsUnavailableError,
    build_full_hamiltonian,
    default_time_grid,
    evolve,
    transfer_metrics,
)
from .geometry import (
    DEFAULT_GAMMA_I,
    ImpuritySpec,
    LatticeConfig,
    build_geometry,
    symmetric_pair_specs,
)
from .io import ResultManifest, StageTimer, config_hash, write_csv
from .markov import (
    DriveSpec,
    dark_detuning_infinite,
    dark_detuning_scan,
    impurity_map,
    map_overlays,
)
from .pairwise import (
    FitError,
    default_detuning,
    distance_scan,
    exponential_fit,
    free_space_q2_at,
    pair_result,
    reach_scan,
    spacing_scan,
)

STUDIES = (
    "band",
    "impurity-map",
    "two-impurity-map",
    "distance-scan",
    "spacing-scan",
    "reach-scan",
    "dynamics",
    "toy-check",
)


class ConfigError(ValueError):
    """Configuration file violates the schema; message names the field."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    study: str
    lattice: LatticeConfig
    gamma_I: float
    configuration: str
    offset: tuple[float, float] | None
    detuning_mode: str  # "default" | "dark" | "band-edge" | "absolute"
    detuning_value: float | None
    band_edge_factor: float
    omega_L: float | None
    spacing_grid: list[float]
    delta_grid: list[float]
    separations: list[int]
    n_k: int
    patch_size: int
    weighting: str
    size_grid: list[int]
    time_n_points: int | None
    time_t_end: float | None
    full_series: bool
    q2_threshold: float
    threads: int | None
    seed: int | None
    raw: dict = field(repr=False, default_factory=dict)


_SECTION_KEYS = {
    "lattice": {"spacing", "n_x", "n_y", "handedness"},
    "impurity": {"gamma_I", "configuration", "offset"},
    "detuning": {"mode", "value", "factor"},
    "drive": {"omega_L"},
    "band": {"n_k", "patch_size", "weighting"},
    "time_grid": {"t_end", "n_points"},
}
_TOP_KEYS = {
    "study",
    "lattice",
    "impurity",
    "detuning",
    "drive",
    "band",
    "time_grid",
    "spacing_grid",
    "delta_grid",
    "separations",
    "size_grid",
    "full_series",
    "q2_threshold",
    "threads",
    "seed",
}


def _check_keys(mapping: dict, allowed: set, path: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown field {path}{key!r}")


def _grid(raw, path: str, default: list) -> list[float]:
    """Accept an explicit list or {start, stop, num, scale: linear|log}."""
    if raw is None:
        return list(default)
    if isinstance(raw, list):
        if not raw:
            raise ConfigError(f"{path} must be non-empty")
        return [float(v) for v in raw]
    if isinstance(raw, dict):
        _check_keys(raw, {"start", "stop", "num", "scale"}, f"{path}.")
        try:
            start, stop, num = raw["start"], raw["stop"], int(raw["num"])
        except KeyError as exc:
            raise ConfigError(f"{path} needs start/stop/num") from exc
        if num < 1:
            raise ConfigError(f"{path}.num must be >= 1")
        if raw.get("scale", "linear") == "log":
            return list(np.geomspace(start, stop, num))
        return list(np.linspace(start, stop, num))
    raise ConfigError(f"{path} must be a list or a range object")


def parse_config(text: str, study_override: str | None = None) -> RunConfig:
    """Parse and validate a JSON run configuration, applying defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "")
    study = study_override or raw.get("study")
    if study not in STUDIES:
        raise ConfigError(f"study must be one of {STUDIES}, got {study!r}")

    lattice_raw = raw.get("lattice", {})
    _check_keys(lattice_raw, _SECTION_KEYS["lattice"], "lattice.")
    try:
        lattice = LatticeConfig(
            spacing=float(lattice_raw.get("spacing", 0.2)),
            n_x=int(lattice_raw.get("n_x", 20)),
            n_y=int(lattice_raw.get("n_y", 20)),
            handedness=lattice_raw.get("handedness", "right"),
        )
    except ValueError as exc:
        raise ConfigError(f"lattice: {exc}") from exc

    imp_raw = raw.get("impurity", {})
    _check_keys(imp_raw, _SECTION_KEYS["impurity"], "impurity.")
    configuration = imp_raw.get("configuration", "identical")
    if configuration not in ("identical", "orthogonal"):
        raise ConfigError("impurity.configuration must be 'identical' or 'orthogonal'")
    gamma_I = float(imp_raw.get("gamma_I", DEFAULT_GAMMA_I))
    if gamma_I <= 0:
        raise ConfigError("impurity.gamma_I must be positive")
    offset = imp_raw.get("offset")
    if offset is not None:
        offset = (float(offset[0]), float(offset[1]))

    det_raw = raw.get("detuning", {})
    _check_keys(det_raw, _SECTION_KEYS["detuning"], "detuning.")
    detuning_mode = det_raw.get("mode", "default")
    if detuning_mode not in ("default", "dark", "dark-scan", "band-edge", "absolute"):
        raise ConfigError("detuning.mode must be default|dark|dark-scan|band-edge|absolute")
    detuning_value = det_raw.get("value")
    if detuning_mode == "absolute" and detuning_value is None:
        raise ConfigError("detuning.value required for mode 'absolute'")

    drive_raw = raw.get("drive", {})
    _check_keys(drive_raw, _SECTION_KEYS["drive"], "drive.")
    omega_L = drive_raw.get("omega_L")

    band_raw = raw.get("band", {})
    _check_keys(band_raw, _SECTION_KEYS["band"], "band.")
    weighting = band_raw.get("weighting", "triangular")
    if weighting not in ("triangular", "uniform"):
        raise ConfigError("band.weighting must be 'triangular' or 'uniform'")

    time_raw = raw.get("time_grid", {})
    _check_keys(time_raw, _SECTION_KEYS["time_grid"], "time_grid.")

    separations_raw = raw.get("separations")
    if separations_raw is None:
        separations = [1] if configuration == "identical" else [4]
        if study == "distance-scan":
            separations = list(range(1, lattice.n_x - 1))
    elif isinstance(separations_raw, list):
        separations = [int(v) for v in separations_raw]
    elif isinstance(separations_raw, dict):
        _check_keys(separations_raw, {"start", "stop"}, "separations.")
        separations = list(range(int(separations_raw["start"]), int(separations_raw["stop"]) + 1))
    else:
        raise ConfigError("separations must be a list or {start, stop}")
    if study in ("distance-scan", "two-impurity-map", "dynamics") and not separations:
        raise ConfigError("separations must be non-empty")

    return RunConfig(
        study=study,
        lattice=lattice,
        gamma_I=gamma_I,
        configuration=configuration,
        offset=offset,
        detuning_mode=detuning_mode,
        detuning_value=None if detuning_value is None else float(detuning_value),
        band_edge_factor=float(det_raw.get("factor", 1.05)),
        omega_L=None if omega_L is None else float(omega_L),
        spacing_grid=_grid(raw.get("spacing_grid"), "spacing_grid", [lattice.spacing]),
        delta_grid=_grid(raw.get("delta_grid"), "delta_grid", []),
        size_grid=[int(n) for n in raw.get("size_grid", [lattice.n_x])],
        separations=separations,
        n_k=int(band_raw.get("n_k", 101)),
        patch_size=int(band_raw.get("patch_size", 40)),
        weighting=weighting,
        time_n_points=(None if time_raw.get("n_points") is None else int(time_raw["n_points"])),
        time_t_end=(None if time_raw.get("t_end") is None else float(time_raw["t_end"])),
        full_series=bool(raw.get("full_series", False)),
        q2_threshold=float(raw.get("q2_threshold", 1.0)),
        threads=None if raw.get("threads") is None else int(raw.get("threads")),
        seed=None if raw.get("seed") is None else int(raw.get("seed")),
        raw=raw,
    )


def resolve_threads(config: RunConfig, cli_threads: int | None) -> int:
    env = os.environ.get("ARRAY_EMITTERS_THREADS")
    if env is not None:
        return max(1, int(env))
    if cli_threads is not None:
        return max(1, cli_threads)
    if config.threads is not None:
        return max(1, config.threads)
    return os.cpu_count() or 1


def _impurity_spec(cfg: RunConfig, lattice: LatticeConfig) -> ImpuritySpec:
    return ImpuritySpec(
        plaquette=lattice.central_plaquette(),
        offset=cfg.offset,
        gamma_I=cfg.gamma_I,
        configuration=cfg.configuration,
    )


def _lattice_at(cfg: RunConfig, spacing: float) -> LatticeConfig:
    return LatticeConfig(
        spacing=float(spacing),
        n_x=cfg.lattice.n_x,
        n_y=cfg.lattice.n_y,
        handedness=cfg.lattice.handedness,
    )


def resolve_detuning(cfg: RunConfig, lattice: LatticeConfig) -> float:
    """Operating detuning for one lattice spacing, honoring the config mode."""
    mode = cfg.detuning_mode
    if mode == "absolute":
        return float(cfg.detuning_value)
    if mode == "default":
        mode = "dark" if cfg.configuration == "identical" else "band-edge"
    if mode == "dark":
        return dark_detuning_infinite(lattice.spacing, cfg.gamma_I)
    if mode == "dark-scan":
        spec = ImpuritySpec(
            lattice.central_plaquette(), gamma_I=cfg.gamma_I, configuration="identical"
        )
        return dark_detuning_scan(ArraySystem(build_geometry(lattice, [spec])))
    edge = band_edge(lattice, n_k=cfg.n_k, patch_size=cfg.patch_size, weighting=cfg.weighting)
    return cfg.band_edge_factor * edge


# ---------------------------------------------------------------------------
# study runners (each returns a ResultManifest and writes CSV files)


def _metadata(cfg: RunConfig, extra: dict | None = None) -> dict:
    meta = {
        "generator": f"array-emitters v{__version__}",
        "study": cfg.study,
        "config_hash": config_hash(cfg.raw),
        "units": "lengths in lambda; rates in gamma_L",
        "spacing": format(cfg.lattice.spacing, ".17g"),
        "n_x": cfg.lattice.n_x,
        "n_y": cfg.lattice.n_y,
        "gamma_I": format(cfg.gamma_I, ".17g"),
        "configuration": cfg.configuration,
    }
    if extra:
        meta.update(extra)
    return meta


def run_band(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("band")
    bs = band_structure(
        cfg.lattice, n_k=cfg.n_k, patch_size=cfg.patch_size, weighting=cfg.weighting
    )
    timer.stop()
    rows = [
        (float(bs.kx[i]), float(bs.ky[i]), float(bs.J[i]), float(bs.Gamma[i]),
         bool(bs.in_light_cone[i]))
        for i in range(len(bs.kx))
    ]
    path = out / "band.csv"
    write_csv(
        path,
        ["kx", "ky", "J", "Gamma", "in_light_cone"],
        rows,
        _metadata(cfg, {"omega_be": format(bs.omega_be, ".17g"), "weighting": bs.weighting}),
    )
    manifest.add_cell("band", "ok")
    manifest.extras["omega_be"] = bs.omega_be
    manifest.timings = timer.timings
    manifest.outputs = [path.name]
    return manifest


def _impurity_map_cell(args) -> tuple:
    cfg, size, spacing = args
    lattice = LatticeConfig(
        spacing=float(spacing), n_x=size, n_y=size, handedness=cfg.lattice.handedness
    )
    spec = _impurity_spec(cfg, lattice)
    drive = None if cfg.omega_L is None else DriveSpec.plane_wave(cfg.omega_L, cfg.gamma_I)
    return size, impurity_map(lattice, spec, cfg.delta_grid, [spacing], drive=drive)


def run_impurity_map(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    if not cfg.delta_grid:
        raise ConfigError("impurity-map requires delta_grid")
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("map")
    jobs = [(cfg, n, a) for n in cfg.size_grid for a in cfg.spacing_grid]
    cell_groups = _parallel_map(_impurity_map_cell, jobs, threads)
    timer.stop()
    rows = []
    for size, group in cell_groups:
        for cell in group:
            p = cell.params
            rows.append(
                (
                    size,
                    cell.spacing,
                    cell.delta,
                    p.sigma_se.real if p else None,
                    p.sigma_se.imag if p else None,
                    p.gamma_eff if p else None,
                    p.omega_shift if p else None,
                    p.omega_eff_drive.real if p and p.omega_eff_drive is not None else None,
                    p.omega_eff_drive.imag if p and p.omega_eff_drive is not None else None,
                    p.q1 if p else None,
                    p.markov_flag if p else False,
                    cell.status,
                )
            )
            manifest.add_cell(
                f"n={size},a={cell.spacing:.6g},delta={cell.delta:.6g}", cell.status,
                cell.note)
    path = out / "impurity_map.csv"
    write_csv(
        path,
        ["n", "a", "delta_LI", "re_sigma", "im_sigma", "gamma_eff", "omega_shift",
         "re_omega_eff_drive", "im_omega_eff_drive", "q1", "markov_flag", "status"],
        rows,
        _metadata(cfg),
    )
    timer.start("overlays")
    spec = _impurity_spec(cfg, cfg.lattice)
    overlay = map_overlays(cfg.lattice, spec, cfg.spacing_grid, n_k=cfg.n_k,
                           patch_size=cfg.patch_size)
    timer.stop()
    overlay_path = out / "impurity_map_overlays.csv"
    write_csv(
        overlay_path,
        ["a", "omega_be", "delta_dark"],
        overlay,
        _metadata(cfg),
    )
    manifest.timings = timer.timings
    manifest.outputs = [path.name, overlay_path.name]
    return manifest


def _q2_map_cell(args):
    cfg, spacing = args
    lattice = _lattice_at(cfg, spacing)
    separation = cfg.separations[0]
    specs = symmetric_pair_specs(
        lattice, separation, gamma_I=cfg.gamma_I, configuration=cfg.configuration
    )
    geometry = build_geometry(lattice, specs)
    modes = lattice_modes(assemble_lattice_matrix(geometry))
    rows = []
    for delta in cfg.delta_grid:
        try:
            r = pair_result(geometry, float(delta), modes=modes)
            rows.append((spacing, float(delta), r.q2, r.phi_eff.real, r.phi_eff.imag,
                         r.gamma_eff, "ok"))
        except ValueError as exc:
            rows.append((spacing, float(delta), None, None, None, None, f"pole: {exc}"))
    return rows


def run_q2_map(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    if not cfg.delta_grid:
        raise ConfigError("two-impurity-map requires delta_grid")
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("map")
    groups = _parallel_map(_q2_map_cell, [(cfg, a) for a in cfg.spacing_grid], threads)
    timer.stop()
    rows = []
    for group in groups:
        for row in group:
            rows.append(row)
            status = row[-1]
            manifest.add_cell(f"a={row[0]:.6g},delta={row[1]:.6g}",
                              "ok" if status == "ok" else "pole",
                              "" if status == "ok" else status)
    path = out / "q2_map.csv"
    write_csv(
        path,
        ["a", "delta_LI", "q2", "re_phi_eff", "im_phi_eff", "gamma_eff", "status"],
        rows,
        _metadata(cfg),
    )
    timer.start("overlays")
    overlay = map_overlays(
        cfg.lattice, _impurity_spec(cfg, cfg.lattice), cfg.spacing_grid,
        n_k=cfg.n_k, patch_size=cfg.patch_size,
    )
    timer.stop()
    overlay_path = out / "q2_map_overlays.csv"
    write_csv(overlay_path, ["a", "omega_be", "delta_dark"], overlay, _metadata(cfg))
    manifest.timings = timer.timings
    manifest.outputs = [path.name, overlay_path.name]
    return manifest


def run_distance_scan(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("scan")
    delta = resolve_detuning(cfg, cfg.lattice)
    results, fit = None, None
    try:
        results, fit = distance_scan(
            cfg.lattice,
            cfg.separations,
            delta=delta,
            gamma_I=cfg.gamma_I,
            configuration=cfg.configuration,
        )
    except FitError as exc:
        results, _ = distance_scan(
            cfg.lattice,
            cfg.separations,
            delta=delta,
            gamma_I=cfg.gamma_I,
            configuration=cfg.configuration,
            fit=False,
        )
        manifest.extras["fit_error"] = str(exc)
    timer.stop()
    rows = [
        (m, r.separation, r.phi_eff.real, r.phi_eff.imag, r.phi_free.real, r.phi_free.imag,
         r.gamma_eff, r.q2, r.q2_free, r.configuration)
        for m, r in zip(cfg.separations, results)
    ]
    for m in cfg.separations:
        manifest.add_cell(f"d={m}a", "ok")
    path = out / "distance_scan.csv"
    write_csv(
        path,
        ["separation_plaquettes", "d", "re_phi_eff", "im_phi_eff", "re_phi_free",
         "im_phi_free", "gamma_eff", "q2", "q2_free", "configuration"],
        rows,
        _metadata(cfg, {"delta_LI": format(delta, ".17g")}),
    )
    manifest.extras["delta_LI"] = delta
    if fit is not None:
        manifest.extras["fit"] = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "decay_length": fit.decay_length,
            "n_points": len(fit.x),
        }
    manifest.timings = timer.timings
    manifest.outputs = [path.name]
    return manifest


def _spacing_cell(args):
    cfg, spacing = args
    lattice = _lattice_at(cfg, spacing)
    out = {}
    for label in ("identical", "orthogonal"):
        sub = dataclasses.replace(cfg, configuration=label)
        delta = resolve_detuning(sub, lattice)
        results, _ = distance_scan(
            lattice, [1], delta=delta, gamma_I=cfg.gamma_I, configuration=label, fit=False
        )
        out[label] = results[0].abs_q2
    out["free"] = abs(free_space_q2_at(lattice, 1, cfg.gamma_I, "identical"))
    return out


def run_spacing_scan(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("scan")
    cells = _parallel_map(_spacing_cell, [(cfg, a) for a in cfg.spacing_grid], threads)
    timer.stop()
    rows = [
        (a, cell["identical"], cell["orthogonal"], cell["free"])
        for a, cell in zip(cfg.spacing_grid, cells)
    ]
    for a in cfg.spacing_grid:
        manifest.add_cell(f"a={a:.6g}", "ok")
    path = out / "spacing_scan.csv"
    write_csv(
        path,
        ["a", "q2max_identical", "q2max_orthogonal", "q2_free"],
        rows,
        _metadata(cfg),
    )
    log_a = np.log(np.asarray(cfg.spacing_grid))
    slopes = {}
    for idx, label in ((1, "identical"), (2, "orthogonal"), (3, "free")):
        values = np.array([row[idx] for row in rows])
        if len(values) >= 2 and np.all(values > 0):
            slopes[label] = float(np.polyfit(log_a, np.log(values), 1)[0])
    manifest.extras["loglog_slopes"] = slopes
    manifest.timings = timer.timings
    manifest.outputs = [path.name]
    return manifest


def _reach_cell(args):
    cfg, spacing = args
    lattice = _lattice_at(cfg, spacing)
    return reach_scan(lattice, [spacing], threshold=cfg.q2_threshold,
                      gamma_I=cfg.gamma_I, configuration=cfg.configuration)[0]


def run_reach_scan(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("scan")
    cells = _parallel_map(_reach_cell, [(cfg, a) for a in cfg.spacing_grid], threads)
    timer.stop()
    rows = [(a, reach, cfg.q2_threshold) for (a, reach) in cells]
    for a, _reach in cells:
        manifest.add_cell(f"a={a:.6g}", "ok")
    path = out / "reach_scan.csv"
    write_csv(path, ["a", "reach_plaquettes", "q2_threshold"], rows, _metadata(cfg))
    manifest.timings = timer.timings
    manifest.outputs = [path.name]
    return manifest


def run_dynamics(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("setup")
    lattice = cfg.lattice
    delta = resolve_detuning(cfg, lattice)
    separation = cfg.separations[0] if cfg.separations else None
    if separation:
        specs = list(
            symmetric_pair_specs(lattice, separation, gamma_I=cfg.gamma_I,
                                 configuration=cfg.configuration)
        )
    else:
        specs = [_impurity_spec(cfg, lattice)]
    geometry = build_geometry(lattice, specs)
    prediction = None
    if len(specs) == 2:
        prediction = pair_result(geometry, delta)
        gamma_pred = prediction.gamma_eff
        transfer_pred = prediction.phi_eff.real
    else:
        system = ArraySystem(geometry)
        from .markov import self_energy

        sigma = self_energy(system.matrix, system.coupling(0), delta,
                            eigenvalues=system.modes.eigenvalues)
        gamma_pred = cfg.gamma_I - 2.0 * sigma.imag
        transfer_pred = None
    if cfg.time_t_end is not None:
        t_grid = np.linspace(0.0, cfg.time_t_end, cfg.time_n_points or 2000)
    else:
        t_grid = default_time_grid(gamma_pred, transfer_pred, cfg.time_n_points)
    timer.stop()
    timer.start("evolve")
    h = build_full_hamiltonian(geometry, delta)
    initial = np.zeros(h.shape[0], dtype=complex)
    initial[geometry.n_lattice] = 1.0
    series = evolve(h, initial, t_grid, n_lattice=geometry.n_lattice)
    timer.stop()
    timer.start("write")
    populations = series.populations
    lattice_pop = populations[:, : geometry.n_lattice].sum(axis=1)
    rows = []
    for i, t in enumerate(series.times):
        row = [float(t)]
        for k in range(geometry.n_impurities):
            row.append(float(populations[i, geometry.n_lattice + k]))
        row.append(float(lattice_pop[i]))
        row.append(float(populations[i].sum()))
        rows.append(tuple(row))
    imp_cols = [f"p_impurity_{k + 1}" for k in range(geometry.n_impurities)]
    path = out / "dynamics_impurities.csv"
    write_csv(
        path,
        ["t"] + imp_cols + ["p_lattice", "p_total"],
        rows,
        _metadata(cfg, {"delta_LI": format(delta, ".17g"), "method": series.method}),
    )
    outputs = [path.name]
    if cfg.full_series:
        full_rows = []
        for i, t in enumerate(series.times):
            for site in range(h.shape[0]):
                amp = series.amplitudes[i, site]
                full_rows.append((float(t), site, amp.real, amp.imag, abs(amp) ** 2))
        full_path = out / "dynamics_sites.csv"
        write_csv(
            full_path,
            ["t", "site_index", "re_c", "im_c", "population"],
            full_rows,
            _metadata(cfg, {"delta_LI": format(delta, ".17g")}),
        )
        outputs.append(full_path.name)
    timer.stop()
    manifest.add_cell("evolution", "ok", f"method={series.method}")
    manifest.extras["delta_LI"] = delta
    manifest.extras["predicted"] = {
        "gamma_eff": gamma_pred,
        "re_phi_eff": transfer_pred,
    }
    if len(specs) == 2:
        try:
            metrics = transfer_metrics(series, geometry.n_lattice + 1)
            manifest.extras["transfer_metrics"] = {
                "frequency": metrics.frequency,
                "decay": metrics.decay,
                "quality": metrics.quality,
                "n_peaks": metrics.n_peaks,
            }
        except MetricsUnavailableError as exc:
            manifest.extras["transfer_metrics"] = {"unavailable": str(exc)}
    manifest.timings = timer.timings
    manifest.outputs = outputs
    return manifest


def run_toy_check(cfg: RunConfig, out: Path, threads: int = 1) -> ResultManifest:
    from .toy_check import toy_check_report

    manifest = ResultManifest(cfg.study, cfg.raw, __version__)
    timer = StageTimer()
    timer.start("checks")
    report = toy_check_report(gamma_I=cfg.gamma_I)
    timer.stop()
    rows = [(name, passed, value, bound) for name, passed, value, bound in report]
    path = out / "toy_check.csv"
    write_csv(path, ["check", "passed", "max_error", "tolerance"], rows, _metadata(cfg))
    width = max(len(name) for name, *_ in report)
    print(f"{'check'.ljust(width)}  result  max_error   tolerance")
    for name, passed, value, bound in report:
        print(f"{name.ljust(width)}  {'PASS' if passed else 'FAIL'}    {value:.3e}   {bound:.1e}")
    for name, passed, value, bound in report:
        manifest.add_cell(name, "ok" if passed else "failed", f"err={value:.3e}")
    manifest.extras["all_passed"] = all(passed for _, passed, _, _ in report)
    manifest.timings = timer.timings
    manifest.outputs = [path.name]
    return manifest


_RUNNERS = {
    "band": run_band,
    "impurity-map": run_impurity_map,
    "two-impurity-map": run_q2_map,
    "distance-scan": run_distance_scan,
    "spacing-scan": run_spacing_scan,
    "reach-scan": run_reach_scan,
    "dynamics": run_dynamics,
    "toy-check": run_toy_check,
}


def _parallel_map(func, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))


def run_study(config: RunConfig, out_dir, threads: int = 1) -> ResultManifest:
    """Execute one study; writes CSV outputs and a JSON manifest into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _RUNNERS[config.study](config, out, threads)
    manifest_path = out / "manifest.json"
    manifest.write(manifest_path)
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="array-emitters",
        description="Coupled-dipole studies of impurity emitters in 2D atom arrays",
    )
    parser.add_argument("study", choices=STUDIES)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, study_override=args.study)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    threads = resolve_threads(config, args.threads)
    try:
        manifest = run_study(config, args.out, threads=threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # systemic failure
        print(f"compute error: {exc}", file=sys.stderr)
        return 3
    failed = [c for c in manifest.cells if c["status"] == "failed"]
    if config.study == "toy-check" and failed:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
