"""Command-line front end: ``returnmap <command> [options]``.

Scenario settings come from ``--scenario``/``--param`` or from an INI file
given with ``--config``:

    [run]
    scenario = perturbed_circle_cosine
    seed = 7
    max_iters = 20000

    [params]
    rho = 1.5
    amplitude = 0.1

Command-line flags override the file.  Every data file starts with ``#``
header lines recording scenario, parameters, tolerances and seed.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, export
from .acceptance import CRITERIA, run_criterion
from .analysis import (
    BASIN_MATCH_RADIUS,
    CRITICAL_TOL,
    compute_basins,
    find_critical_points,
    verify_expansion,
)
from .dynamics import GRAD_TOL, LYAPUNOV_SLACK, MAX_ITERS, estimate_descent_constants, iterate
from .errors import ConfigError, GloballyCriticalError, ReturnMapError, ScenarioError
from .geometry import project_to_core
from .maps import check_admissibility
from .sampling import directions
from .scenarios import Scenario, build_scenario

log = logging.getLogger("returnmap")

RUN_KEYS = {
    "scenario": str,
    "seed": int,
    "jobs": int,
    "out": str,
    "max_iters": int,
    "grad_tol": float,
    "seed_point": str,
    "resolution": str,
    "starts": int,
    "eps_family": str,
    "samples": int,
    "grid": int,
    "critical_tol": float,
    "lyapunov_guard": bool,
}

SCENARIO_HELP = """scenarios and parameters:
  concentric_circle            rho
  concentric_sphere            rho
  perturbed_circle_cosine      rho, amplitude (of d) or eps; d = rho - 1 + amplitude cos(theta)
  perturbed_sphere_height      rho, eps; f = z
  perturbed_sphere_single_bump rho, eps, kappa, center
  perturbed_sphere_two_bumps   rho, eps, kappa, half_angle_deg, second_depth, tilt
  pathological_fold            rho, eps, kappa (deliberately inadmissible)
  custom                       shape, semi_axes, outer, rho, eps, profile, outer_axes, outer_center
"""


def _literal(text: str) -> Any:
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _line_of(path, section: str, key: str) -> int | None:
    current = None
    with open(path) as fh:
        for no, line in enumerate(fh, 1):
            text = line.strip()
            if text.startswith("[") and text.endswith("]"):
                current = text[1:-1].strip()
            elif current == section and text.split("=", 1)[0].split(":", 1)[0].strip().lower() == key:
                return no
    return None


def read_config(path: str | os.PathLike) -> tuple[dict[str, Any], dict[str, Any]]:
    """Parse an INI run file into ``(run settings, scenario params)``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cp.sections()) - {"run", "params"}
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}; expected [run] and [params]")
    run: dict[str, Any] = {}
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            where = f"{path}:{_line_of(path, 'run', key)}: [run] {key}"
            if key not in RUN_KEYS:
                raise ConfigError(f"{where}: unknown key; known keys are {', '.join(sorted(RUN_KEYS))}")
            kind = RUN_KEYS[key]
            try:
                run[key] = cp.getboolean("run", key) if kind is bool else kind(raw)
            except ValueError as exc:
                raise ConfigError(f"{where} = {raw!r}: expected {kind.__name__}") from exc
    params = {k: _literal(v) for k, v in cp.items("params")} if cp.has_section("params") else {}
    return run, params


def _parse_params(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = _literal(value.strip())
    return out


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--scenario", help="catalog scenario name")
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="scenario parameter")
    g.add_argument("--config", help="INI run file with [run] and [params] sections")
    g.add_argument("--out", help="output directory (default: current directory)")
    g.add_argument("--jobs", type=int, help="worker processes for grid sweeps (default: CPU count)")
    g.add_argument("--seed", type=int, help="random seed for randomised choices (default 0)")
    g.add_argument("--no-lyapunov-guard", action="store_true", help="keep iterating after an energy increase")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="returnmap",
        description="Simulate and analyse the boundary return map between a convex core and an outer domain.",
        epilog=SCENARIO_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_, epilog=SCENARIO_HELP,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("simulate", "iterate the return map from one seed and write the trajectory")
    p.add_argument("--seed-point", help="theta (2D) or 'u,v' = polar,azimuth in radians (3D); default random")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol", type=float)

    p = add("critical-points", "locate and classify the critical points of the thickness")
    p.add_argument("--starts", type=int)
    p.add_argument("--critical-tol", type=float)

    p = add("basins", "label a seed grid by the critical point each trajectory reaches")
    p.add_argument("--resolution", help="R (2D: R angles; 3D: R x 2R) or NLATxNLON")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--starts", type=int)

    p = add("verify-expansion", "measure the first-order expansion remainder")
    p.add_argument("--eps-family", help="comma-separated eps values, e.g. 0.08,0.04,0.02")
    p.add_argument("--grid", type=int)

    p = add("check-admissibility", "sample the normal property and ray connectivity")
    p.add_argument("--samples", type=int)

    p = add("constants", "fit the empirical descent constants")
    p.add_argument("--grid", type=int)

    p = add("acceptance", "run acceptance checks and print one line per check")
    p.add_argument("--criterion", type=int, action="append", choices=sorted(CRITERIA),
                   help="check number (repeatable; default all)")
    return parser


def _settings(args: argparse.Namespace) -> tuple[dict[str, Any], dict[str, Any]]:
    run: dict[str, Any] = {}
    params: dict[str, Any] = {}
    if args.config:
        run, params = read_config(args.config)
    for key in RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            run[key] = val
    if args.no_lyapunov_guard:
        run["lyapunov_guard"] = False
    params.update(_parse_params(args.param))
    run.setdefault("seed", 0)
    run.setdefault("lyapunov_guard", True)
    for key in ("grad_tol", "critical_tol"):
        if key in run and not run[key] > 0:
            raise ConfigError(f"{key} must be > 0, got {run[key]}")
    for key in ("max_iters", "starts", "samples", "grid", "jobs"):
        if key in run and run[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {run[key]}")
    return run, params


def _scenario(run: dict, params: dict) -> Scenario:
    name = run.get("scenario")
    if not name:
        raise ConfigError("no scenario given; use --scenario NAME or [run] scenario = NAME")
    return build_scenario(name, params)


def _require_admissible(s: Scenario, command: str) -> None:
    if s.admissibility is not None and not s.admissibility.verdict:
        raise ScenarioError(
            f"{s.name} is not admissible; {command} refused. "
            f"Run `returnmap check-admissibility --scenario {s.name}` for the failing samples."
        )


def _meta(s: Scenario, run: dict, command: str, **tolerances) -> dict[str, Any]:
    return {
        "command": command,
        "scenario": s.name,
        "params": s.params,
        "seed": run["seed"],
        "tolerances": tolerances,
        "lyapunov_guard": run["lyapunov_guard"],
    }


def _seed_point(s: Scenario, text: str | None, seed: int) -> np.ndarray:
    dim = s.core.ambient_dim
    if text is None:
        w = np.random.default_rng(seed).normal(size=dim)
        return project_to_core(s.core, w / np.linalg.norm(w))
    vals = [float(v) for v in text.strip("()[] ").split(",")]
    if dim == 2 and len(vals) == 1:
        w = np.array([np.cos(vals[0]), np.sin(vals[0])])
    elif dim == 3 and len(vals) == 2:
        u, v = vals
        w = np.array([np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)])
    else:
        raise ConfigError(f"--seed-point {text!r}: expected theta for a 2D core or u,v for a 3D core")
    return project_to_core(s.core, w)


def _out_dir(run: dict) -> Path:
    out = Path(run.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(run, params) -> int:
    s = _scenario(run, params)
    _require_admissible(s, "simulate")
    out = _out_dir(run)
    c0 = _seed_point(s, run.get("seed_point"), run["seed"])
    max_iters = run.get("max_iters", MAX_ITERS)
    grad_tol = run.get("grad_tol", GRAD_TOL)
    traj = iterate(s.core, s.outer, c0, max_iters, grad_tol, enforce_lyapunov=run["lyapunov_guard"])
    meta = _meta(s, run, "simulate", grad_tol=grad_tol, max_iters=max_iters, lyapunov_slack=LYAPUNOV_SLACK)
    meta["seed_point"] = c0
    cols, rows = export.trajectory_rows(traj)
    export.write_rows(out / "trajectory.csv", cols, rows, meta)
    summary = {
        **meta,
        "termination": traj.termination.value,
        "message": traj.message,
        "steps": traj.steps,
        "final_point": traj.points[-1],
        "final_thickness": traj.thickness[-1],
        "final_grad_norm": traj.grad_norm[-1],
        "lyapunov_violations": len(traj.lyapunov_violations()),
    }
    export.write_json(out / "summary.json", summary)
    print(f"{traj.termination.value} after {traj.steps} steps; final |grad d| = {traj.grad_norm[-1]:.3e}")
    if traj.message:
        print(traj.message)
    return 0 if traj.termination.value == "converged" else 1


def _critical(s, run):
    return find_critical_points(s.core, s.outer, run.get("starts", 64), run.get("critical_tol", CRITICAL_TOL))


def cmd_critical_points(run, params) -> int:
    s = _scenario(run, params)
    out = _out_dir(run)
    cps = _critical(s, run)
    meta = _meta(s, run, "critical-points", critical_tol=run.get("critical_tol", CRITICAL_TOL),
                 starts=run.get("starts", 64))
    cols, rows = export.critical_point_rows(cps.points)
    export.write_rows(out / "critical_points.csv", cols, rows, meta)
    export.write_json(out / "critical_points.json", {
        **meta, "globally_critical": cps.globally_critical, "warnings": cps.warnings,
        "points": [r.to_dict() for r in cps],
    })
    if cps.globally_critical:
        print("globally critical: every tested point is critical")
        return 0
    for i, r in enumerate(cps):
        print(f"{i}: x={np.array2string(r.location, precision=6)} d={r.thickness_at:.6f} "
              f"mu={np.array2string(r.map_eigs, precision=4)} {r.stability.value} "
              f"(measured |J eig|={np.array2string(np.abs(r.jacobian_eigs), precision=4)} {r.observed_stability.value})")
    for w in cps.warnings:
        print(f"warning: {w}")
    return 0


def _resolution(text):
    if text is None:
        return 100
    text = str(text).lower()
    if "x" in text:
        a, b = text.split("x")
        return (int(a), int(b))
    return int(text)


def cmd_basins(run, params) -> int:
    s = _scenario(run, params)
    _require_admissible(s, "basins")
    out = _out_dir(run)
    cps = _critical(s, run)
    max_iters = run.get("max_iters", 20_000)
    grad_tol = run.get("grad_tol", GRAD_TOL)
    meta = _meta(s, run, "basins", grad_tol=grad_tol, max_iters=max_iters,
                 basin_match_radius=BASIN_MATCH_RADIUS * s.core.scale)
    res = _resolution(run.get("resolution"))
    bm = compute_basins(s.core, s.outer, res, cps, max_iters=max_iters, grad_tol=grad_tol,
                        enforce_lyapunov=run["lyapunov_guard"], jobs=run.get("jobs"))
    summary = {**meta, **bm.to_dict(), "critical_points": [r.to_dict() for r in bm.critical_points]}
    export.write_json(out / "basins.json", summary)
    if bm.globally_critical:
        print("globally critical: every seed is its own fixed point; no basin map written")
        return 0
    cols, rows = export.basin_rows(bm)
    export.write_rows(out / "basins.csv", cols, rows, meta)
    (out / "basins.svg").write_text(export.basin_svg(bm, title=f"{s.name} basins"))
    print(f"resolved fraction {bm.resolved_fraction:.4f}; counts {bm.counts}")
    return 0


def _family_params(s: Scenario, eps: float) -> dict:
    p = dict(s.params)
    if s.name == "perturbed_circle_cosine":
        p.pop("amplitude", None)
    p["eps"] = eps
    return p


def cmd_verify_expansion(run, params) -> int:
    s = _scenario(run, params)
    out = _out_dir(run)
    n = run.get("grid", 1000)
    grid = project_to_core(s.core, directions(s.core.ambient_dim, n))
    family = None
    if run.get("eps_family"):
        eps = [float(v) for v in str(run["eps_family"]).split(",")]
        family = [(e, build_scenario(s.name, _family_params(s, e)).outer) for e in eps]
    rep = verify_expansion(s.core, s.outer, grid, family)
    meta = _meta(s, run, "verify-expansion", grid=n, eps_family=run.get("eps_family"))
    cols, rows = export.expansion_rows(rep)
    export.write_rows(out / "expansion.csv", cols, rows, meta)
    export.write_json(out / "expansion.json", {**meta, **rep.to_dict()})
    print(f"K_hat = {rep.K_hat:.6g}; max remainder {np.max(rep.remainder):.3e}")
    if family:
        print(f"ratios {np.array2string(rep.scaling_ratios, precision=4)}; slope {rep.slope:.4f}")
    return 0


def cmd_check_admissibility(run, params) -> int:
    s = _scenario(run, params)
    out = _out_dir(run)
    n = run.get("samples", 10_000)
    rep = check_admissibility(s.core, s.outer, n, n)
    meta = _meta(s, run, "check-admissibility", samples=n)
    export.write_json(out / "admissibility.json", {**meta, **rep.to_dict()})
    dim = s.core.ambient_dim
    rows = [["normal", *x] for x in rep.normal_property_failures]
    rows += [["connectivity", *x] for x in rep.connectivity_failures]
    export.write_rows(out / "admissibility_failures.csv", ["kind", *[f"x{i}" for i in range(dim)]], rows, meta)
    print(f"verdict {'admissible' if rep.verdict else 'NOT admissible'}: "
          f"{len(rep.normal_property_failures)} normal-property failures, "
          f"{len(rep.connectivity_failures)} connectivity failures in {rep.samples_checked} samples")
    return 0 if rep.verdict else 1


def cmd_constants(run, params) -> int:
    s = _scenario(run, params)
    out = _out_dir(run)
    n = run.get("grid", 1000)
    grid = project_to_core(s.core, directions(s.core.ambient_dim, n))
    meta = _meta(s, run, "constants", grid=n)
    try:
        dc = estimate_descent_constants(s.core, s.outer, grid)
    except GloballyCriticalError as exc:
        export.write_json(out / "constants.json", {**meta, "globally_critical": True, "message": str(exc)})
        print(str(exc))
        return 0
    export.write_json(out / "constants.json", {**meta, **dc.to_dict()})
    smp = dc.samples
    rows = [[*grid[i], smp["thickness"][i], smp["grad_norm"][i], smp["delta_V"][i]] for i in range(len(grid))]
    cols = [*[f"x{i}" for i in range(s.core.ambient_dim)], "d", "grad_norm", "delta_V"]
    export.write_rows(out / "constants.csv", cols, rows, meta)
    print(f"eta_hat {dc.eta_hat:.6g}; a_hat {dc.a_hat:.6g}; b_hat {dc.b_hat:.6g}; epsilon0 {dc.epsilon0:.6g}; "
          f"energy increases at {dc.energy_increase_count} of {len(grid)} points")
    return 0


def cmd_acceptance(run, params, numbers) -> int:
    out = Path(run["out"]) if run.get("out") else None
    failed = 0
    results = []
    for n in numbers or sorted(CRITERIA):
        r = run_criterion(n, out, run.get("jobs"))
        results.append(r.to_dict())
        failed += not r.passed
        print(r.line(), flush=True)
        if r.diagnostics:
            print(f"    diagnostics: {r.diagnostics}", flush=True)
    if out is not None:
        export.write_json(out / "acceptance.json", {"results": results})
    return 1 if failed else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "critical-points": cmd_critical_points,
    "basins": cmd_basins,
    "verify-expansion": cmd_verify_expansion,
    "check-admissibility": cmd_check_admissibility,
    "constants": cmd_constants,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run, params = _settings(args)
        if args.command == "acceptance":
            return cmd_acceptance(run, params, args.criterion)
        return COMMANDS[args.command](run, params)
    except (ReturnMapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
