#!/usr/bin/env python3
"""Regenerate the study figures from the simulator's CSV outputs.

    python figures.py --spec specs/figures.json --out rendered [--data DIR]

The spec file holds a list of figure descriptions; each names a renderer
kind, its input CSV roles, and the output image.  This tool consumes the
documented CSV schemas only (it never imports the simulator), verifies
embedded config hashes when a figure pins them, and renders with a fixed
style so outputs are reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STYLE = {
    "figure.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "lines.linewidth": 1.4,
    "figure.constrained_layout.use": True,
}

SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


class FigureError(RuntimeError):
    """Input CSV missing, malformed, or failing its pinned hash."""


def load_csv(path: Path) -> tuple[dict, dict]:
    """Parse one simulator CSV into (metadata, column arrays).

    Numeric columns become float arrays (missing cells -> nan); anything
    non-numeric stays a list of strings.
    """
    if not path.exists():
        raise FigureError(f"input CSV not found: {path}")
    metadata: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    if header is None or not rows:
        raise FigureError(f"empty CSV: {path}")
    columns: dict[str, object] = {}
    for i, name in enumerate(header):
        raw = [row[i] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in raw])
        except ValueError:
            columns[name] = raw
    return metadata, columns


def require(columns: dict, names: list[str], path: str):
    for name in names:
        if name not in columns:
            raise FigureError(f"{path}: missing column {name!r}")
    return [columns[name] for name in names]


def check_hash(metadata: dict, expected: str | None, path: Path) -> None:
    if expected is None:
        return
    actual = metadata.get("config_hash")
    if actual != expected:
        raise FigureError(
            f"{path}: config hash mismatch (expected {expected}, file has {actual})"
        )


def _pivot(a, delta, value):
    """Arrange map rows into a (spacing x detuning) grid."""
    a_axis = np.unique(a)
    d_axis = np.unique(delta)
    grid = np.full((len(a_axis), len(d_axis)), np.nan)
    ai = np.searchsorted(a_axis, a)
    di = np.searchsorted(d_axis, delta)
    grid[ai, di] = value
    return a_axis, d_axis, grid


# ---------------------------------------------------------------------------
# renderers (one per figure kind)


def render_band(inputs: dict, ax) -> None:
    meta, cols = inputs["band"]
    kx, ky, j = require(cols, ["kx", "ky", "J"], "band")
    kx_axis, ky_axis, grid = _pivot(kx, ky, j)
    mesh = ax.pcolormesh(kx_axis, ky_axis, grid.T, shading="nearest", cmap="viridis")
    plt.colorbar(mesh, ax=ax, label="J(k) [gamma_L]")
    theta = np.linspace(0, 2 * np.pi, 200)
    ax.plot(2 * np.pi * np.cos(theta), 2 * np.pi * np.sin(theta), "y-", lw=1.0,
            label="light cone")
    ax.set_xlabel("k_x [1/lambda]")
    ax.set_ylabel("k_y [1/lambda]")
    ax.set_title(f"band structure, a = {meta.get('spacing', '?')}")
    ax.legend(loc="upper right", fontsize=7)


def render_gamma_map(inputs: dict, ax, overlays: dict | None = None) -> None:
    meta, cols = inputs["map"]
    a, delta, gamma = require(cols, ["a", "delta_LI", "gamma_eff"], "map")
    gamma_i = float(meta.get("gamma_I", 0.01))
    a_axis, d_axis, grid = _pivot(a, delta, gamma / gamma_i)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_grid = np.log10(grid)
    mesh = ax.pcolormesh(a_axis, d_axis, log_grid.T, shading="nearest", cmap="magma")
    plt.colorbar(mesh, ax=ax, label="log10(Gamma_Eff / gamma_I)")
    if "overlays" in inputs:
        _, ocols = inputs["overlays"]
        oa, edge = require(ocols, ["a", "omega_be"], "overlays")
        ax.plot(oa, edge, "r-", label="band edge")
        dark = ocols.get("delta_dark")
        if dark is not None and np.all(np.isfinite(np.asarray(dark, dtype=float))):
            ax.plot(oa, dark, "k-", label="dark detuning")
        ax.legend(loc="upper right", fontsize=7)
    ax.set_xlabel("a [lambda]")
    ax.set_ylabel("delta_LI [gamma_L]")
    ax.set_ylim(d_axis.min(), d_axis.max())
    ax.set_title(f"effective linewidth, {meta.get('configuration', '?')}")


def render_q2_map(inputs: dict, ax) -> None:
    meta, cols = inputs["map"]
    a, delta, q2 = require(cols, ["a", "delta_LI", "q2"], "map")
    a_axis, d_axis, grid = _pivot(a, delta, np.abs(q2))
    with np.errstate(invalid="ignore", divide="ignore"):
        log_grid = np.log10(grid)
    mesh = ax.pcolormesh(a_axis, d_axis, log_grid.T, shading="nearest", cmap="cividis")
    plt.colorbar(mesh, ax=ax, label="log10 |Q2|")
    if "overlays" in inputs:
        _, ocols = inputs["overlays"]
        oa, edge = require(ocols, ["a", "omega_be"], "overlays")
        ax.plot(oa, edge, "r-", label="band edge")
        dark = ocols.get("delta_dark")
        if dark is not None and np.all(np.isfinite(np.asarray(dark, dtype=float))):
            ax.plot(oa, dark, "k--", label="dark detuning")
        ax.legend(loc="upper right", fontsize=7)
    ax.set_xlabel("a [lambda]")
    ax.set_ylabel("delta_LI [gamma_L]")
    ax.set_ylim(d_axis.min(), d_axis.max())
    ax.set_title(f"two-impurity quality factor, {meta.get('configuration', '?')}")


def render_transfer(inputs: dict, ax) -> None:
    meta, cols = inputs["series"]
    (t,) = require(cols, ["t"], "series")
    for idx, color in zip((1, 2), SERIES_COLORS):
        name = f"p_impurity_{idx}"
        if name in cols:
            ax.plot(t, cols[name], color=color, label=name)
    if "p_lattice" in cols:
        ax.plot(t, cols["p_lattice"], color="0.6", lw=0.8, label="p_lattice")
    ax.set_xlabel("t [1/gamma_L]")
    ax.set_ylabel("population")
    ax.set_title(f"excitation transfer, {meta.get('configuration', '?')}, "
                 f"a = {meta.get('spacing', '?')}")
    ax.legend(fontsize=7)


def render_distance(inputs: dict, ax) -> None:
    free_drawn = False
    for (meta, cols), color in zip(inputs["scans"], SERIES_COLORS):
        d, q2 = require(cols, ["d", "q2"], "scan")
        spacing = float(meta.get("spacing", np.nan))
        ax.semilogy(d / spacing, np.abs(q2), "o-", color=color, ms=3,
                    label=f"a = {meta.get('spacing')}")
        if not free_drawn and "q2_free" in cols:
            ax.semilogy(d / spacing, np.abs(cols["q2_free"]), "--", color="#6baed6",
                        lw=1.0, label=f"free space (a = {meta.get('spacing')})")
            free_drawn = True
    ax.set_xlabel("|d| / a")
    ax.set_ylabel("|Q2|")
    ax.set_title("quality factor vs impurity separation")
    ax.legend(fontsize=7)


def render_spacing(inputs: dict, ax) -> None:
    _, cols = inputs["scan"]
    a, ident, orth, free = require(
        cols, ["a", "q2max_identical", "q2max_orthogonal", "q2_free"], "scan"
    )
    ax.loglog(a, ident, "o-", color=SERIES_COLORS[0], label="identical")
    ax.loglog(a, orth, "s--", color=SERIES_COLORS[1], label="orthogonal")
    ax.loglog(a, free, "d:", color=SERIES_COLORS[2], label="free space")
    ax.set_xlabel("a [lambda]")
    ax.set_ylabel("|Q2(d = a)|")
    ax.set_title("maximum quality factor vs spacing")
    ax.legend(fontsize=7)


def render_reach(inputs: dict, ax) -> None:
    _, cols = inputs["scan"]
    a, reach = require(cols, ["a", "reach_plaquettes"], "scan")
    ax.semilogx(1.0 / a, reach, "o-", color=SERIES_COLORS[0])
    ax.set_xlabel("lambda / a")
    ax.set_ylabel("max |d|/a with |Q2| > 1")
    ax.set_title("interaction reach")


def render_size_convergence(inputs: dict, axes) -> None:
    ax_gamma, ax_shift = axes
    for role, marker, color in (("identical", "o", SERIES_COLORS[0]),
                                ("orthogonal", "s", SERIES_COLORS[1])):
        meta, cols = inputs[role]
        n, gamma, shift = require(cols, ["n", "gamma_eff", "omega_shift"], role)
        gamma_i = float(meta.get("gamma_I", 0.01))
        ax_gamma.plot(n, gamma / gamma_i, marker + "-", color=color, label=role)
        ax_shift.plot(n, np.abs(shift) / gamma_i, marker + "-", color=color, label=role)
    ax_gamma.set_ylabel("Gamma_Eff / gamma_I")
    ax_shift.set_ylabel("|shift| / gamma_I")
    for ax in (ax_gamma, ax_shift):
        ax.set_xlabel("array side length")
        ax.legend(fontsize=7)
    ax_gamma.set_title("finite-size convergence")


RENDERERS = {
    "band": render_band,
    "gamma-map": render_gamma_map,
    "q2-map": render_q2_map,
    "transfer": render_transfer,
    "distance": render_distance,
    "spacing": render_spacing,
    "reach": render_reach,
    "size-convergence": render_size_convergence,
}


def render(fig_spec: dict, data_root: Path, out_dir: Path) -> Path:
    """Render one figure spec; returns the written image path."""
    kind = fig_spec.get("figure")
    if kind not in RENDERERS:
        raise FigureError(f"unknown figure kind {kind!r}")
    expected = fig_spec.get("expect_hash", {})
    inputs: dict[str, object] = {}
    for role, value in fig_spec.get("inputs", {}).items():
        if isinstance(value, list):
            loaded = []
            for item in value:
                path = data_root / item
                meta, cols = load_csv(path)
                check_hash(meta, expected.get(item), path)
                loaded.append((meta, cols))
            inputs[role] = loaded
        else:
            path = data_root / value
            meta, cols = load_csv(path)
            check_hash(meta, expected.get(value), path)
            inputs[role] = (meta, cols)
    with plt.rc_context(STYLE):
        if kind == "size-convergence":
            fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.0))
            RENDERERS[kind](inputs, axes)
        else:
            fig, ax = plt.subplots(figsize=(4.2, 3.4))
            RENDERERS[kind](inputs, ax)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / fig_spec["output"]
        fig.savefig(target)
        plt.close(fig)
    return target


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spec", required=True, help="JSON list of figure specs")
    parser.add_argument("--out", required=True, help="output directory for images")
    parser.add_argument("--data", default=None,
                        help="root for relative input paths (default: spec directory)")
    args = parser.parse_args(argv)
    spec_path = Path(args.spec)
    try:
        payload = json.loads(spec_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    figures = payload.get("figures", payload if isinstance(payload, list) else None)
    if not isinstance(figures, list):
        print("spec error: expected {'figures': [...]} or a JSON list", file=sys.stderr)
        return 2
    data_root = Path(args.data) if args.data else spec_path.parent
    failures = 0
    for fig_spec in figures:
        name = fig_spec.get("output", "<unnamed>")
        try:
            target = render(fig_spec, data_root, Path(args.out))
            print(f"rendered {name} -> {target}")
        except FigureError as exc:
            failures += 1
            print(f"FAILED {name}: {exc}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
