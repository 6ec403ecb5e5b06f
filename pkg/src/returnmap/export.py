"""Deterministic text, JSON and SVG output.

Data files are comma-separated with a block of ``#`` header lines and every
float written with 17 significant digits, so two runs with the same inputs
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .analysis import FAILED, UNRESOLVED, BasinMap, CriticalPointRecord, ExpansionReport
from .dynamics import Trajectory
from .sampling import angle_of, lat_lon_of

# one colour per critical point in sorted order, then unresolved and failed
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#17becf", "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f",
)
UNRESOLVED_COLOR = "#d9d9d9"
FAILED_COLOR = "#000000"

__all__ = [
    "format_float",
    "header_lines",
    "write_rows",
    "write_json",
    "trajectory_rows",
    "critical_point_rows",
    "basin_rows",
    "expansion_rows",
    "basin_svg",
    "label_color",
]


def format_float(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and enums into JSON-ready values."""
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def header_lines(meta: Mapping[str, Any]) -> list[str]:
    return [f"# {k}: {json.dumps(_plain(meta[k]), sort_keys=True)}" for k in sorted(meta)]


def write_rows(path, columns: Sequence[str], rows: Iterable[Sequence], meta: Mapping[str, Any]) -> Path:
    path = Path(path)
    lines = header_lines(meta)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path, obj: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")
    return path


def trajectory_rows(traj: Trajectory) -> tuple[list[str], list[list]]:
    dim = traj.points.shape[1]
    cols = ["k", *[f"x{i}" for i in range(dim)], "d", "V", "grad_norm", "displacement"]
    V = traj.energy
    rows = [
        [k, *traj.points[k], traj.thickness[k], V[k], traj.grad_norm[k], traj.displacement[k]]
        for k in range(len(traj.points))
    ]
    return cols, rows


def critical_point_rows(records: Sequence[CriticalPointRecord]) -> tuple[list[str], list[list]]:
    if not records:
        return ["index"], []
    dim = len(records[0].location)
    m = len(records[0].hessian_eigs)
    cols = (
        ["index", *[f"x{i}" for i in range(dim)], "thickness", "grad_residual"]
        + [f"lambda{i}" for i in range(m)]
        + [f"mu{i}" for i in range(m)]
        + [f"jac_modulus{i}" for i in range(m)]
        + ["stability", "observed_stability", "jacobian_consistent", "nondegenerate", "fixed_point_residual"]
    )
    rows = []
    for i, r in enumerate(records):
        rows.append(
            [i, *r.location, r.thickness_at, r.grad_residual, *r.hessian_eigs, *r.map_eigs,
             *np.sort(np.abs(r.jacobian_eigs)), r.stability.value,
             r.observed_stability.value, r.jacobian_consistent, r.nondegenerate,
             r.fixed_point_residual]
        )
    return cols, rows


def basin_rows(basins: BasinMap) -> tuple[list[str], list[list]]:
    dim = basins.seeds.shape[1]
    cols = ["seed", *[f"x{i}" for i in range(dim)], "label"]
    return cols, [[i, *s, int(l)] for i, (s, l) in enumerate(zip(basins.seeds, basins.labels))]


def expansion_rows(report: ExpansionReport) -> tuple[list[str], list[list]]:
    dim = report.grid.shape[1]
    cols = [*[f"x{i}" for i in range(dim)], "remainder", "driver"]
    return cols, [[*g, r, d] for g, r, d in zip(report.grid, report.remainder, report.driver)]


def label_color(label: int) -> str:
    if label == UNRESOLVED:
        return UNRESOLVED_COLOR
    if label == FAILED:
        return FAILED_COLOR
    return PALETTE[label % len(PALETTE)]


def _row_runs(labels: np.ndarray):
    """(start, length, label) runs of equal labels along one row."""
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [len(labels)]])
    return [(int(s), int(e - s), int(labels[s])) for s, e in zip(starts, ends)]


def basin_svg(basins: BasinMap, *, cell: float = 4.0, title: str = "") -> str:
    """Basin heatmap: an angle strip in 2D, an equirectangular map of the sphere in 3D.

    Seeds along a circle (or along each latitude row) are drawn left to right
    by angle or longitude; rows run north to south.
    """
    seeds = basins.seeds
    if seeds.shape[1] == 2:
        order = np.argsort(angle_of(seeds) % (2 * np.pi), kind="stable")
        grid = basins.labels[order][None, :]
        band = 40.0
    else:
        n_lat, n_lon = basins.grid_shape
        lat, lon = lat_lon_of(seeds)
        order = np.lexsort((lon, -lat))
        grid = basins.labels[order].reshape(n_lat, n_lon)
        band = cell
    rows, cols = grid.shape
    width, height = cols * cell, rows * band
    legend_y = height + 16
    used = sorted(set(int(v) for v in np.unique(grid)))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{legend_y + 16 * len(used) + 8:g}" '
        f'viewBox="0 0 {width:g} {legend_y + 16 * len(used) + 8:g}" shape-rendering="crispEdges">'
    ]
    if title:
        out.append(f"<title>{title}</title>")
    for i in range(rows):
        for s, n, lab in _row_runs(grid[i]):
            out.append(
                f'<rect x="{s * cell:g}" y="{i * band:g}" width="{n * cell:g}" height="{band:g}" '
                f'fill="{label_color(lab)}"/>'
            )
    names = {UNRESOLVED: "unresolved", FAILED: "failed"}
    for j, lab in enumerate(used):
        y = legend_y + 16 * j
        if lab >= 0 and lab < len(basins.critical_points):
            cp = basins.critical_points[lab]
            text = f"{lab}: {cp.stability.value} d={cp.thickness_at:.6g}"
        else:
            text = names.get(lab, str(lab))
        count = int(np.sum(grid == lab))
        out.append(f'<rect x="4" y="{y - 10:g}" width="10" height="10" fill="{label_color(lab)}"/>')
        out.append(f'<text x="20" y="{y:g}" font-size="11" font-family="monospace">{text} ({count})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
