"""Critical points of the thickness, their stability, basins, and the expansion check."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import (
    eigenvalues_2x2,
    gradient_values,
    hessian_values,
    jacobian_values,
    symmetric_eigenvalues,
)
from .dynamics import FLAT_GRADIENT, GRAD_TOL, iterate_many
from .errors import OuterBoundaryNotReached
from .geometry import ConvexCore, OuterDomain, _check_on_core, project_to_core
from .maps import return_values, thickness_values
from .sampling import circle_directions, directions, equirectangular_grid

logger = logging.getLogger(__name__)

CRITICAL_TOL = 1e-9
MERGE_RADIUS = 1e-5
BASIN_MATCH_RADIUS = 1e-3
DEGENERACY_FLOOR = 1e-4
HYPERBOLICITY_MARGIN = 1e-3
JACOBIAN_AGREEMENT = 1e-3
DRIVER_FLOOR = 1e-14

UNRESOLVED = -1
FAILED = -2

__all__ = [
    "Stability",
    "CriticalPointRecord",
    "CriticalPointSet",
    "BasinMap",
    "ExpansionReport",
    "classify",
    "classify_multipliers",
    "find_critical_points",
    "compute_basins",
    "basin_seeds",
    "verify_expansion",
    "UNRESOLVED",
    "FAILED",
]


class Stability(str, enum.Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    SADDLE = "saddle"
    NONHYPERBOLIC = "nonhyperbolic"


def classify_multipliers(moduli, margin: float = HYPERBOLICITY_MARGIN) -> Stability:
    m = np.asarray(moduli, dtype=float)
    if np.any(np.abs(m - 1.0) <= margin):
        return Stability.NONHYPERBOLIC
    if np.all(m < 1.0):
        return Stability.ATTRACTING
    if np.all(m > 1.0):
        return Stability.REPELLING
    return Stability.SADDLE


@dataclass
class CriticalPointRecord:
    """A critical point of d with both the predicted and the measured linearisation.

    ``map_eigs`` are the multipliers 1 - 2 d lambda_i built from the Hessian
    eigenvalues and ``stability`` is read off them.  ``jacobian_eigs`` come
    from finite differences of F itself and ``observed_stability`` is read off
    those; ``jacobian_consistent`` records whether the two sets of moduli agree.
    """

    location: np.ndarray
    thickness_at: float
    hessian_eigs: np.ndarray
    map_eigs: np.ndarray
    stability: Stability
    grad_residual: float
    jacobian_eigs: np.ndarray
    observed_stability: Stability
    jacobian_consistent: bool
    nondegenerate: bool
    fixed_point_residual: float

    def to_dict(self) -> dict:
        return {
            "location": self.location.tolist(),
            "thickness_at": self.thickness_at,
            "hessian_eigs": self.hessian_eigs.tolist(),
            "map_eigs": self.map_eigs.tolist(),
            "stability": self.stability.value,
            "grad_residual": self.grad_residual,
            "jacobian_eigs": [[z.real, z.imag] for z in self.jacobian_eigs],
            "jacobian_moduli": np.abs(self.jacobian_eigs).tolist(),
            "observed_stability": self.observed_stability.value,
            "jacobian_consistent": self.jacobian_consistent,
            "nondegenerate": self.nondegenerate,
            "fixed_point_residual": self.fixed_point_residual,
        }


@dataclass
class CriticalPointSet:
    points: list[CriticalPointRecord]
    globally_critical: bool = False
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i) -> CriticalPointRecord:
        return self.points[i]

    @property
    def locations(self) -> np.ndarray:
        return np.array([p.location for p in self.points])

    def of_kind(self, kind: Stability) -> list[CriticalPointRecord]:
        return [p for p in self.points if p.stability is kind]


def _records(core, outer, c, g, h_hess=None, h_jac=None) -> list[CriticalPointRecord]:
    d, ok = thickness_values(core, outer, c)
    H, _, h_ok = hessian_values(core, outer, c, h_hess)
    J, j_ok = jacobian_values(core, outer, c, h_jac)
    Fc, f_ok = return_values(core, outer, c, d=d)
    if not (ok & h_ok & j_ok & f_ok).all():
        raise OuterBoundaryNotReached(c[~(ok & h_ok & j_ok & f_ok)])
    lam = symmetric_eigenvalues(H)
    mu = 1.0 - 2.0 * d[:, None] * lam
    jac = eigenvalues_2x2(J)
    out = []
    for i in range(len(c)):
        nondegenerate = bool(np.all(np.abs(lam[i]) >= DEGENERACY_FLOOR))
        stab = classify_multipliers(np.abs(mu[i])) if nondegenerate else Stability.NONHYPERBOLIC
        jm = np.sort(np.abs(jac[i]))
        consistent = bool(np.all(np.abs(jm - np.sort(np.abs(mu[i]))) <= JACOBIAN_AGREEMENT))
        out.append(
            CriticalPointRecord(
                location=c[i].copy(),
                thickness_at=float(d[i]),
                hessian_eigs=lam[i],
                map_eigs=mu[i],
                stability=stab,
                grad_residual=float(g[i]),
                jacobian_eigs=jac[i],
                observed_stability=classify_multipliers(np.abs(jac[i])),
                jacobian_consistent=consistent,
                nondegenerate=nondegenerate,
                fixed_point_residual=float(np.linalg.norm(Fc[i] - c[i])),
            )
        )
    return out


def classify(
    core: ConvexCore, outer: OuterDomain, location, critical_tolerance: float = CRITICAL_TOL
) -> CriticalPointRecord:
    c = np.asarray(location, dtype=float)[None]
    _check_on_core(core, c)
    coeffs, _, ok = gradient_values(core, outer, c)
    if not ok[0]:
        raise OuterBoundaryNotReached(c)
    g = np.linalg.norm(coeffs, axis=1)
    if g[0] > critical_tolerance:
        raise ValueError(f"not a critical point: |grad d| = {g[0]:.3e} > {critical_tolerance:.1e}")
    return _records(core, outer, c, g)[0]


def _tangent_step(core, c, coeffs, tangents, scale):
    return project_to_core(core, c + scale[:, None] * np.einsum("nm,nmd->nd", coeffs, tangents))


def _gradient_flow(core, outer, c, sign: float, steps: int):
    """Explicit steps c <- c + sign * 2 d grad d, retracted onto the core."""
    for _ in range(steps):
        d, ok = thickness_values(core, outer, c)
        coeffs, tangents, g_ok = gradient_values(core, outer, c)
        live = ok & g_ok
        nxt = _tangent_step(core, c[live], coeffs[live], tangents[live], sign * 2.0 * d[live])
        c = c.copy()
        c[live] = nxt
    return c


def _newton(core, outer, c, tol, max_iter: int = 60, max_step: float = 0.25):
    """Batched Newton on grad d = 0 in the tangent frame; returns (points, grad norms, converged)."""
    c = c.copy()
    g = np.full(len(c), np.inf)
    done = np.zeros(len(c), dtype=bool)
    alive = np.ones(len(c), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(alive & ~done)
        if idx.size == 0:
            break
        ci = c[idx]
        coeffs, tangents, ok = gradient_values(core, outer, ci)
        gi = np.linalg.norm(coeffs, axis=1)
        g[idx] = gi
        alive[idx[~ok]] = False
        conv = ok & (gi <= tol)
        done[idx[conv]] = True
        work = ok & ~conv
        if not work.any():
            continue
        idx, ci, coeffs, tangents = idx[work], ci[work], coeffs[work], tangents[work]
        H, _, h_ok = hessian_values(core, outer, ci, tangents=tangents)
        alive[idx[~h_ok]] = False
        u = -_solve_small(H, coeffs)
        norm = np.linalg.norm(u, axis=1)
        limit = max_step * core.scale
        u *= np.minimum(1.0, limit / np.maximum(norm, 1e-300))[:, None]
        c[idx[h_ok]] = project_to_core(core, ci[h_ok] + np.einsum("nm,nmd->nd", u[h_ok], tangents[h_ok]))
    return c, g, done & alive


def _solve_small(H, b):
    if H.shape[-1] == 1:
        den = H[:, 0, 0]
        den = np.where(np.abs(den) < 1e-14, np.copysign(1e-14, den + 0.0), den)
        return b / den[:, None]
    a, bb, cc, dd = H[:, 0, 0], H[:, 0, 1], H[:, 1, 0], H[:, 1, 1]
    det = a * dd - bb * cc
    det = np.where(np.abs(det) < 1e-20, np.copysign(1e-20, det + 0.0), det)
    x0 = (dd * b[:, 0] - bb * b[:, 1]) / det
    x1 = (-cc * b[:, 0] + a * b[:, 1]) / det
    return np.stack([x0, x1], axis=1)


def _dedupe(points: np.ndarray, radius: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    return np.array(kept).reshape(-1, points.shape[-1])


def _sort_records(records: list[CriticalPointRecord]) -> list[CriticalPointRecord]:
    return sorted(records, key=lambda r: (round(r.thickness_at, 12), tuple(np.round(r.location, 9))))


def find_critical_points(
    core: ConvexCore,
    outer: OuterDomain,
    n_starts: int = 64,
    critical_tolerance: float = CRITICAL_TOL,
    *,
    map_steps: int = 300,
    flow_steps: int = 200,
    merge_radius: float | None = None,
    extra_starts: np.ndarray | None = None,
) -> CriticalPointSet:
    """Multistart search for Crit(d).

    Candidates come from four sources run from the same low-discrepancy starts:
    iterating F, explicit descent and ascent steps of size 2 d |grad d|, and the
    raw starts themselves.  Every candidate is polished by Newton on grad d,
    which also catches saddles; survivors are merged within ``merge_radius``.
    """
    merge_radius = MERGE_RADIUS * core.scale if merge_radius is None else merge_radius
    starts = project_to_core(core, directions(core.ambient_dim, n_starts))
    if extra_starts is not None:
        starts = np.vstack([starts, project_to_core(core, np.atleast_2d(extra_starts))])

    coeffs, _, ok = gradient_values(core, outer, starts)
    if not ok.all():
        raise OuterBoundaryNotReached(starts[~ok])
    g0 = np.linalg.norm(coeffs, axis=1)
    if np.all(g0 <= FLAT_GRADIENT):
        return CriticalPointSet([], globally_critical=True, warnings=["every tested point is critical"])

    sweep = iterate_many(core, outer, starts, map_steps, critical_tolerance, enforce_lyapunov=False, keep_history=False)
    by_map = sweep.final_points[sweep.status != 2]
    down = _gradient_flow(core, outer, starts, -1.0, flow_steps)
    up = _gradient_flow(core, outer, starts, +1.0, flow_steps)
    candidates = np.vstack([by_map, down, up, starts])

    polished, g, conv = _newton(core, outer, candidates, critical_tolerance)
    warnings = []
    if not conv.any():
        warnings.append("Newton did not converge from any candidate")
        return CriticalPointSet([], warnings=warnings)
    misses = int((~conv).sum())
    if misses:
        warnings.append(f"Newton did not converge from {misses} of {len(conv)} candidates")
    order = np.argsort(g[conv], kind="stable")
    unique = _dedupe(polished[conv][order], merge_radius)
    g_u, _, _ = gradient_values(core, outer, unique)
    records = _records(core, outer, unique, np.linalg.norm(g_u, axis=1))
    if not any(r.stability is Stability.SADDLE for r in records) and core.ambient_dim == 3:
        warnings.append("no saddle found")
    return CriticalPointSet(_sort_records(records), warnings=warnings)


@dataclass
class BasinMap:
    seeds: np.ndarray
    labels: np.ndarray
    iteration_budget: int
    critical_points: list[CriticalPointRecord]
    grid_shape: tuple[int, ...]
    globally_critical: bool = False
    unmatched: int = 0
    final_points: np.ndarray | None = field(default=None, repr=False)

    @property
    def counts(self) -> dict[int, int]:
        vals, cnt = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}

    @property
    def resolved_fraction(self) -> float:
        return float(np.mean(self.labels >= 0)) if len(self.labels) else 0.0

    def to_dict(self) -> dict:
        return {
            "grid_shape": list(self.grid_shape),
            "iteration_budget": self.iteration_budget,
            "globally_critical": self.globally_critical,
            "resolved_fraction": self.resolved_fraction,
            "unmatched": self.unmatched,
            "counts": {str(k): v for k, v in self.counts.items()},
        }


def basin_seeds(core: ConvexCore, resolution) -> tuple[np.ndarray, tuple[int, ...]]:
    """Seed grid: R equally spaced angles in 2D, an (n_lat, n_lon) equirectangular grid in 3D."""
    if core.ambient_dim == 2:
        r = int(resolution if np.isscalar(resolution) else resolution[0])
        return project_to_core(core, circle_directions(r)), (r,)
    if np.isscalar(resolution):
        n_lat, n_lon = int(resolution), 2 * int(resolution)
    else:
        n_lat, n_lon = (int(v) for v in resolution)
    w, _, _ = equirectangular_grid(n_lat, n_lon)
    return project_to_core(core, w), (n_lat, n_lon)


def _sweep_chunk(args):
    core, outer, seeds, max_iters, grad_tol, enforce = args
    s = iterate_many(core, outer, seeds, max_iters, grad_tol, enforce_lyapunov=enforce, keep_history=False)
    return s.final_points, s.status


def compute_basins(
    core: ConvexCore,
    outer: OuterDomain,
    grid_resolution,
    critical_points: CriticalPointSet | Sequence[CriticalPointRecord],
    *,
    max_iters: int = 20_000,
    grad_tol: float = GRAD_TOL,
    enforce_lyapunov: bool = True,
    jobs: int | None = None,
    chunk_size: int = 2000,
) -> BasinMap:
    """Label every grid seed by the critical point its trajectory converges to.

    Seeds that exhaust the budget, or converge away from every listed critical
    point, are UNRESOLVED; seeds whose run stops on an error are FAILED.
    """
    seeds, shape = basin_seeds(core, grid_resolution)
    if isinstance(critical_points, CriticalPointSet) and critical_points.globally_critical:
        return BasinMap(seeds, np.full(len(seeds), UNRESOLVED), 0, [], shape, globally_critical=True)
    cps = _sort_records(list(critical_points))
    if not cps:
        raise ValueError("compute_basins needs at least one critical point")

    jobs = jobs or os.cpu_count() or 1
    chunks = [seeds[i : i + chunk_size] for i in range(0, len(seeds), chunk_size)]
    tasks = [(core, outer, ch, max_iters, grad_tol, enforce_lyapunov) for ch in chunks]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_chunk, tasks))
    else:
        results = [_sweep_chunk(t) for t in tasks]
    finals = np.vstack([r[0] for r in results])
    status = np.concatenate([r[1] for r in results])

    locs = np.array([r.location for r in cps])
    labels = np.full(len(seeds), UNRESOLVED)
    labels[status == 2] = FAILED
    conv = np.flatnonzero(status == 0)
    dist = np.linalg.norm(finals[conv, None, :] - locs[None], axis=-1)
    nearest = np.argmin(dist, axis=1)
    match = dist[np.arange(len(conv)), nearest] <= BASIN_MATCH_RADIUS * core.scale
    labels[conv[match]] = nearest[match]
    return BasinMap(
        seeds=seeds,
        labels=labels,
        iteration_budget=max_iters,
        critical_points=cps,
        grid_shape=shape,
        unmatched=int((~match).sum()),
        final_points=finals,
    )


@dataclass
class ExpansionReport:
    """Remainder R(c) = F(c) - c + 2 d(c) grad d(c) against the driver d |grad d|^2.

    ``K_hat`` is an empirical envelope over the grid, not a derived constant.
    """

    grid: np.ndarray
    remainder: np.ndarray
    driver: np.ndarray
    K_hat: float
    family_eps: np.ndarray = field(default_factory=lambda: np.array([]))
    family_max_remainder: np.ndarray = field(default_factory=lambda: np.array([]))
    scaling_ratios: np.ndarray = field(default_factory=lambda: np.array([]))
    slope: float = np.nan

    def to_dict(self) -> dict:
        return {
            "points": len(self.grid),
            "max_remainder": float(np.max(self.remainder)),
            "K_hat": self.K_hat,
            "family_eps": self.family_eps.tolist(),
            "family_max_remainder": self.family_max_remainder.tolist(),
            "scaling_ratios": self.scaling_ratios.tolist(),
            "slope": self.slope,
        }


def _remainders(core, outer, grid, h):
    d, ok = thickness_values(core, outer, grid)
    coeffs, tangents, g_ok = gradient_values(core, outer, grid, h)
    Fc, f_ok = return_values(core, outer, grid, d=d)
    good = ok & g_ok & f_ok
    if not good.all():
        raise OuterBoundaryNotReached(grid[~good])
    grad = np.einsum("nm,nmd->nd", coeffs, tangents)
    R = Fc - grid + 2.0 * d[:, None] * grad
    g = np.linalg.norm(coeffs, axis=1)
    return np.linalg.norm(R, axis=1), d * g**2


def verify_expansion(
    core: ConvexCore,
    outer: OuterDomain,
    grid: np.ndarray,
    family: Sequence[tuple[float, OuterDomain]] | None = None,
    *,
    h: float | None = None,
) -> ExpansionReport:
    """Remainder of the first-order expansion on ``grid``; optionally its scaling over a family.

    ``family`` is a sequence of ``(eps, outer_eps)`` pairs sharing the profile;
    the report then carries successive ratios of the maximum remainder and the
    log-log slope of max remainder against eps.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if len(grid) == 0:
        raise ValueError("empty grid")
    _check_on_core(core, grid)
    rem, drv = _remainders(core, outer, grid, h)
    use = drv >= DRIVER_FLOOR
    K_hat = float(np.max(rem[use] / drv[use])) if use.any() else 0.0
    report = ExpansionReport(grid, rem, drv, K_hat)
    if family:
        eps = np.array([e for e, _ in family], dtype=float)
        mx = np.array([np.max(_remainders(core, o, grid, h)[0]) for _, o in family])
        report.family_eps = eps
        report.family_max_remainder = mx
        report.scaling_ratios = mx[:-1] / mx[1:]
        report.slope = float(np.polyfit(np.log(eps), np.log(mx), 1)[0])
    return report
