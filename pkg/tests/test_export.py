import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from returnmap.analysis import FAILED, UNRESOLVED, BasinMap, find_critical_points
from returnmap.dynamics import iterate
from returnmap.export import (
    PALETTE,
    basin_rows,
    basin_svg,
    critical_point_rows,
    format_float,
    header_lines,
    label_color,
    trajectory_rows,
    write_json,
    write_rows,
)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(x):
    assert float(format_float(x)) == x


def test_special_values():
    assert format_float(np.nan) == "nan"
    assert format_float(-np.inf) == "-inf"
    assert format_float(True) == "1"
    assert format_float(np.int64(7)) == "7"
    assert format_float("saddle") == "saddle"


def test_header_is_sorted_and_prefixed():
    lines = header_lines({"seed": 3, "scenario": "x", "params": {"b": 1, "a": 2.5}})
    assert lines == ['# params: {"a": 2.5, "b": 1}', '# scenario: "x"', "# seed: 3"]


def test_write_rows_and_read_back(tmp_path):
    p = write_rows(tmp_path / "a.csv", ["k", "v"], [[0, 0.1], [1, 1 / 3]], {"seed": 0})
    text = p.read_text().splitlines()
    assert text[0].startswith("#") and text[1] == "k,v"
    data = np.loadtxt(p, delimiter=",", comments="#", skiprows=2)
    assert data[1, 1] == 1 / 3


def test_json_is_sorted_and_plain(tmp_path):
    p = write_json(tmp_path / "s.json", {"z": np.float64(1.5), "a": np.arange(3), "n": np.nan})
    obj = json.loads(p.read_text())
    assert list(obj) == ["a", "n", "z"] and obj["a"] == [0, 1, 2] and obj["n"] == "nan"


def test_trajectory_rows(scenario):
    s = scenario("perturbed_circle_cosine")
    tr = iterate(s.core, s.outer, np.array([0.0, 1.0]), max_iters=3, enforce_lyapunov=False)
    cols, rows = trajectory_rows(tr)
    assert cols == ["k", "x0", "x1", "d", "V", "grad_norm", "displacement"]
    assert len(rows) == 4 and rows[2][0] == 2
    assert rows[1][4] == pytest.approx(0.5 * rows[1][3] ** 2)


def test_critical_point_rows(scenario):
    s = scenario("perturbed_circle_cosine")
    cps = find_critical_points(s.core, s.outer, n_starts=16)
    cols, rows = critical_point_rows(cps.points)
    assert len(rows) == 2 and "mu0" in cols and "stability" in cols
    mu = rows[0][cols.index("mu0")]
    assert mu == pytest.approx(0.92)


def _fake_basins(dim):
    if dim == 2:
        th = 2 * np.pi * np.arange(8) / 8
        seeds = np.stack([np.cos(th), np.sin(th)], axis=1)
        return BasinMap(seeds, np.array([0, 0, 1, 1, UNRESOLVED, FAILED, 0, 0]), 10, [], (8,))
    from returnmap.sampling import equirectangular_grid

    w, _, _ = equirectangular_grid(3, 4)
    return BasinMap(w, np.array([0] * 4 + [1] * 4 + [UNRESOLVED] * 4), 10, [], (3, 4))


@pytest.mark.parametrize("dim", [2, 3])
def test_svg_is_deterministic_and_uses_palette(dim):
    bm = _fake_basins(dim)
    a, b = basin_svg(bm), basin_svg(bm)
    assert a == b and a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert PALETTE[0] in a and PALETTE[1] in a and label_color(UNRESOLVED) in a
    assert "date" not in a.lower()


def test_svg_rows_run_north_to_south():
    bm = _fake_basins(3)
    svg = basin_svg(bm, cell=1.0)
    # first row (northmost) is label 0, drawn at y=0 as one run of width 4
    assert f'<rect x="0" y="0" width="4" height="1" fill="{PALETTE[0]}"/>' in svg
    assert f'y="2" width="4" height="1" fill="{label_color(UNRESOLVED)}"' in svg


def test_basin_rows():
    cols, rows = basin_rows(_fake_basins(2))
    assert cols == ["seed", "x0", "x1", "label"] and rows[5][-1] == FAILED
