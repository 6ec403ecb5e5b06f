import json
import math

import numpy as np
import pytest

from returnmap.cli import build_parser, main, read_config
from returnmap.errors import ConfigError


def read_csv(path):
    return np.loadtxt(path, delimiter=",", comments="#", skiprows=0, ndmin=2, dtype=str)


def data_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


def test_help_lists_scenarios(capsys):
    with pytest.raises(SystemExit):
        main(["simulate", "--help"])
    out = capsys.readouterr().out
    assert "perturbed_sphere_two_bumps" in out and "--seed-point" in out and "--jobs" in out


def test_simulate_is_byte_identical(tmp_path):
    args = ["simulate", "--scenario", "perturbed_circle_cosine", "--seed-point", "2.0", "--no-lyapunov-guard"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trajectory.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_header_and_last_row(tmp_path):
    main(["simulate", "--scenario", "perturbed_circle_cosine", "--seed-point", "1.5707963267948966",
          "--no-lyapunov-guard", "--seed", "5", "--out", str(tmp_path)])
    text = (tmp_path / "trajectory.csv").read_text()
    for key in ("# scenario:", "# params:", "# tolerances:", "# seed: 5"):
        assert key in text
    cols, rows = data_rows(tmp_path / "trajectory.csv")
    last = dict(zip(cols, rows[-1]))
    assert float(last["grad_norm"]) <= 1e-8
    # without the guard the orbit climbs to theta = 0, the maximum of d
    assert abs(math.atan2(float(last["x1"]), float(last["x0"]))) <= 1e-4


def test_simulate_guarded_reports_error(tmp_path, capsys):
    rc = main(["simulate", "--scenario", "perturbed_circle_cosine", "--seed-point", "1.0", "--out", str(tmp_path)])
    assert rc == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["termination"] == "error" and "Lyapunov" in summary["message"]


def test_simulate_sphere_seed_point(tmp_path):
    rc = main(["simulate", "--scenario", "perturbed_sphere_height", "--seed-point", "(0.5,1.0)",
               "--max-iters", "5", "--no-lyapunov-guard", "--out", str(tmp_path)])
    assert rc == 1  # budget exhausted
    cols, rows = data_rows(tmp_path / "trajectory.csv")
    x = np.array([float(v) for v in rows[0][1:4]])
    np.testing.assert_allclose(x, [np.sin(0.5) * np.cos(1.0), np.sin(0.5) * np.sin(1.0), np.cos(0.5)])


def test_random_seed_point_depends_on_seed(tmp_path):
    base = ["simulate", "--scenario", "perturbed_circle_cosine", "--max-iters", "1", "--no-lyapunov-guard"]
    main(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    main(base + ["--seed", "2", "--out", str(tmp_path / "b")])
    main(base + ["--seed", "1", "--out", str(tmp_path / "c")])
    a, b, c = ((tmp_path / k / "trajectory.csv").read_bytes() for k in "abc")
    assert a == c and a != b


def test_bad_seed_point(tmp_path, capsys):
    rc = main(["simulate", "--scenario", "perturbed_circle_cosine", "--seed-point", "1,2", "--out", str(tmp_path)])
    assert rc == 2 and "seed-point" in capsys.readouterr().err


def test_critical_points_table(tmp_path):
    assert main(["critical-points", "--scenario", "perturbed_circle_cosine", "--out", str(tmp_path)]) == 0
    cols, rows = data_rows(tmp_path / "critical_points.csv")
    assert len(rows) == 2
    mu = sorted(float(r[cols.index("mu0")]) for r in rows)
    assert mu == pytest.approx([0.92, 1.12], abs=0.01)


def test_basins_concentric_no_svg(tmp_path, capsys):
    assert main(["basins", "--scenario", "concentric_circle", "--resolution", "32", "--out", str(tmp_path)]) == 0
    assert "globally critical" in capsys.readouterr().out
    assert not (tmp_path / "basins.svg").exists()
    assert json.loads((tmp_path / "basins.json").read_text())["globally_critical"] is True


def test_basins_writes_svg_and_rows(tmp_path):
    rc = main(["basins", "--scenario", "perturbed_circle_cosine", "--resolution", "24", "--no-lyapunov-guard",
               "--jobs", "1", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "basins.svg").read_text().startswith("<svg")
    cols, rows = data_rows(tmp_path / "basins.csv")
    assert cols[-1] == "label" and len(rows) == 24


def test_basins_refuses_inadmissible(tmp_path, capsys):
    rc = main(["basins", "--scenario", "pathological_fold", "--out", str(tmp_path)])
    assert rc == 2 and "check-admissibility" in capsys.readouterr().err


def test_check_admissibility_exit_codes(tmp_path):
    assert main(["check-admissibility", "--scenario", "perturbed_sphere_height", "--samples", "500",
                 "--out", str(tmp_path / "ok")]) == 0
    assert main(["check-admissibility", "--scenario", "pathological_fold", "--samples", "500",
                 "--out", str(tmp_path / "bad")]) == 1
    rep = json.loads((tmp_path / "bad" / "admissibility.json").read_text())
    assert rep["verdict"] is False and rep["normal_property_failures"] > 0


def test_constants_and_expansion(tmp_path):
    assert main(["constants", "--scenario", "perturbed_circle_cosine", "--grid", "100", "--out", str(tmp_path)]) == 0
    assert "eta_hat" in json.loads((tmp_path / "constants.json").read_text())
    assert main(["verify-expansion", "--scenario", "perturbed_circle_cosine", "--eps-family", "0.08,0.04",
                 "--grid", "50", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "expansion.json").read_text())
    assert rep["family_eps"] == [0.08, 0.04] and len(rep["scaling_ratios"]) == 1


def test_constants_concentric(tmp_path):
    assert main(["constants", "--scenario", "concentric_circle", "--grid", "20", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "constants.json").read_text())["globally_critical"] is True


def test_config_file(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nscenario = perturbed_circle_cosine\nseed = 9\nmax_iters = 3\nlyapunov_guard = no\n"
                   "[params]\namplitude = 0.05\nrho = 1.5\n")
    run, params = read_config(cfg)
    assert run == {"scenario": "perturbed_circle_cosine", "seed": 9, "max_iters": 3, "lyapunov_guard": False}
    assert params == {"amplitude": 0.05, "rho": 1.5}
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    text = (tmp_path / "trajectory.csv").read_text()
    assert '# params: {"amplitude": 0.05, "rho": 1.5}' in text and "# seed: 9" in text


def test_config_errors_name_the_line(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nscenario = perturbed_circle_cosine\nmax_iters = lots\n")
    with pytest.raises(ConfigError, match=r"bad.ini:3: \[run\] max_iters"):
        read_config(cfg)
    cfg.write_text("[run]\nwhatever = 1\n")
    with pytest.raises(ConfigError, match="bad.ini:2: .*unknown key"):
        read_config(cfg)
    cfg.write_text("[oops]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        read_config(cfg)


def test_invalid_overrides(tmp_path, capsys):
    assert main(["simulate", "--scenario", "perturbed_circle_cosine", "--grad-tol", "-1", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    assert "no scenario" in capsys.readouterr().err


def test_param_flag(tmp_path):
    rc = main(["check-admissibility", "--scenario", "perturbed_circle_cosine", "--param", "amplitude=0.05",
               "--samples", "100", "--out", str(tmp_path)])
    assert rc == 0
    assert json.loads((tmp_path / "admissibility.json").read_text())["params"] == {"amplitude": 0.05}


def test_acceptance_subcommand(tmp_path, capsys):
    rc = main(["acceptance", "--criterion", "9", "--criterion", "1", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0 and "criterion  9 [PASS]" in out and "criterion  1 [PASS]" in out
    assert len(json.loads((tmp_path / "acceptance.json").read_text())["results"]) == 2


def test_parser_has_all_commands():
    p = build_parser()
    for cmd in ("simulate", "critical-points", "basins", "verify-expansion", "check-admissibility", "constants",
                "acceptance"):
        assert p.parse_args([cmd]).command == cmd
