"""Iteration of the return map, Lyapunov monitoring, cycle detection, descent constants."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .calculus import gradient_values
from .errors import GloballyCriticalError, OuterBoundaryNotReached
from .geometry import ConvexCore, OuterDomain, _check_on_core
from .maps import return_values, thickness_values

logger = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_ITERS = 100_000
LYAPUNOV_SLACK = 1e-10
FLAT_GRADIENT = 1e-8

__all__ = [
    "Termination",
    "Trajectory",
    "Sweep",
    "CycleReport",
    "DescentConstants",
    "iterate",
    "iterate_many",
    "detect_cycles",
    "estimate_descent_constants",
    "summability_check",
]


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    ERROR = "error"


_CODES = [Termination.CONVERGED, Termination.MAX_ITERS, Termination.ERROR]
_RUNNING = -1


@dataclass
class Trajectory:
    """Iterates c_0..c_K with per-step thickness, gradient norm and |F(c_k) - c_k|.

    When the run stops on an error the last row may hold a point whose gradient
    and displacement were never evaluated (NaN), e.g. the second member of a
    Lyapunov-violating pair.
    """

    points: np.ndarray
    thickness: np.ndarray
    grad_norm: np.ndarray
    displacement: np.ndarray
    termination: Termination
    message: str = ""
    violation: tuple[int, float, float] | None = None

    @property
    def energy(self) -> np.ndarray:
        return 0.5 * self.thickness**2

    @property
    def steps(self) -> int:
        return len(self.points) - 1

    @property
    def limit(self) -> np.ndarray | None:
        return self.points[-1] if self.termination is Termination.CONVERGED else None

    def lyapunov_violations(self, slack: float = LYAPUNOV_SLACK) -> np.ndarray:
        """Indices k with V(c_{k+1}) > V(c_k) + slack."""
        V = self.energy
        return np.flatnonzero(V[1:] > V[:-1] + slack)


@dataclass
class Sweep:
    """Outcome of iterating many seeds at once."""

    seeds: np.ndarray
    final_points: np.ndarray
    final_thickness: np.ndarray
    final_grad_norm: np.ndarray
    status: np.ndarray  # int codes, see ``termination``
    steps: np.ndarray
    violation_count: np.ndarray
    messages: list[str]
    trajectories: list[Trajectory] | None = None

    def termination(self, i: int) -> Termination:
        return _CODES[int(self.status[i])]

    @property
    def converged(self) -> np.ndarray:
        return self.status == 0


def iterate_many(
    core: ConvexCore,
    outer: OuterDomain,
    seeds: np.ndarray,
    max_iters: int = MAX_ITERS,
    grad_tol: float = GRAD_TOL,
    *,
    h: float | None = None,
    lyapunov_slack: float = LYAPUNOV_SLACK,
    enforce_lyapunov: bool = True,
    keep_history: bool = True,
) -> Sweep:
    """Iterate c_{k+1} = F(c_k) from every seed simultaneously.

    A seed stops when its tangential gradient norm drops to ``grad_tol``, when
    ``max_iters`` maps have been applied, or on a failure.  With
    ``enforce_lyapunov`` an energy increase beyond ``lyapunov_slack`` is a
    failure and the offending pair is kept as the last two rows.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    _check_on_core(core, seeds)
    n, dim = seeds.shape
    cur = seeds.copy()
    d, ok = thickness_values(core, outer, cur)

    status = np.full(n, _RUNNING)
    steps = np.zeros(n, dtype=int)
    viol_count = np.zeros(n, dtype=int)
    messages = [""] * n
    violations: list[tuple[int, float, float] | None] = [None] * n
    final_g = np.full(n, np.nan)
    extra_row = np.zeros(n, dtype=bool)

    for i in np.flatnonzero(~ok):
        status[i] = 2
        messages[i] = "thickness undefined at seed: outer boundary not reached"

    hist = []
    active = np.flatnonzero(ok)
    for k in range(max_iters + 1):
        if active.size == 0:
            break
        c_act = cur[active]
        coeffs, _, g_ok = gradient_values(core, outer, c_act, h)
        gn = np.linalg.norm(coeffs, axis=1)
        Fc, f_ok = return_values(core, outer, c_act, d=d[active])
        disp = np.linalg.norm(Fc - c_act, axis=1)
        if keep_history:
            hist.append((active, c_act, d[active].copy(), gn, disp))
        steps[active] = k
        final_g[active] = gn

        failed = ~(g_ok & f_ok)
        for i in active[failed]:
            status[i] = 2
            messages[i] = f"map failure at step {k}"
        conv = ~failed & (gn <= grad_tol)
        status[active[conv]] = 0
        go = ~failed & ~conv
        if k == max_iters:
            status[active[go]] = 1
            break

        nxt = active[go]
        Fn = Fc[go]
        dn, d_ok = thickness_values(core, outer, Fn)
        for i in nxt[~d_ok]:
            status[i] = 2
            messages[i] = f"map failure at step {k + 1}: outer boundary not reached"
        V_old = 0.5 * d[nxt] ** 2
        V_new = 0.5 * dn**2
        up = d_ok & (V_new > V_old + lyapunov_slack)
        viol_count[nxt[up]] += 1
        for j in np.flatnonzero(up):
            i = nxt[j]
            if violations[i] is None:
                violations[i] = (k, float(V_old[j]), float(V_new[j]))
        if enforce_lyapunov and up.any():
            bad = nxt[up]
            status[bad] = 2
            steps[bad] = k + 1
            extra_row[bad] = True
            for j in np.flatnonzero(up):
                messages[nxt[j]] = (
                    f"Lyapunov increase at step {k}: V {V_old[j]:.17g} -> {V_new[j]:.17g}"
                )
            if keep_history:
                hist.append((bad, Fn[up], dn[up], np.full(up.sum(), np.nan), np.full(up.sum(), np.nan)))
            final_g[bad] = np.nan
            cur[bad] = Fn[up]
            d[bad] = dn[up]

        keep = d_ok & ~(enforce_lyapunov & up)
        cur[nxt[keep]] = Fn[keep]
        d[nxt[keep]] = dn[keep]
        active = nxt[keep]

    trajectories = _assemble(hist, n, dim, status, messages, violations, seeds, d) if keep_history else None
    return Sweep(
        seeds=seeds,
        final_points=cur,
        final_thickness=d,
        final_grad_norm=final_g,
        status=status,
        steps=steps,
        violation_count=viol_count,
        messages=messages,
        trajectories=trajectories,
    )


def _assemble(hist, n, dim, status, messages, violations, seeds, d_final):
    rows: list[list] = [[] for _ in range(n)]
    for idx, pts, dd, gn, disp in hist:
        for j, i in enumerate(idx):
            rows[i].append((pts[j], dd[j], gn[j], disp[j]))
    out = []
    for i in range(n):
        if rows[i]:
            pts = np.array([r[0] for r in rows[i]])
            dd = np.array([r[1] for r in rows[i]])
            gn = np.array([r[2] for r in rows[i]])
            disp = np.array([r[3] for r in rows[i]])
        else:
            pts = seeds[i : i + 1].copy()
            dd = np.array([d_final[i]])
            gn = np.array([np.nan])
            disp = np.array([np.nan])
        out.append(Trajectory(pts, dd, gn, disp, _CODES[int(status[i])], messages[i], violations[i]))
    return out


def iterate(
    core: ConvexCore,
    outer: OuterDomain,
    c0,
    max_iters: int = MAX_ITERS,
    grad_tol: float = GRAD_TOL,
    **kwargs,
) -> Trajectory:
    """Single-seed trajectory of the return map (see :func:`iterate_many`)."""
    sweep = iterate_many(core, outer, np.asarray(c0, dtype=float)[None], max_iters, grad_tol, **kwargs)
    return sweep.trajectories[0]


@dataclass(frozen=True)
class CycleReport:
    period: int
    start_index: int
    points: np.ndarray


def detect_cycles(trajectory, spatial_tol: float) -> CycleReport | None:
    """Look for a return |c_j - c_k| <= tol after an excursion of at least 10 tol.

    Returns the cycle with minimal period, or None.  Convergence to a fixed
    point never counts because the excursion guard rejects it.
    """
    P = trajectory.points if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    P = P[np.all(np.isfinite(P), axis=1)]
    if len(P) < 2:
        raise ValueError("cycle detection needs at least 2 iterates")
    best: CycleReport | None = None
    for j in range(len(P) - 1):
        dist = np.linalg.norm(P[j + 1 :] - P[j], axis=1)
        excursion = np.maximum.accumulate(dist)
        hits = np.flatnonzero((dist <= spatial_tol) & (excursion >= 10.0 * spatial_tol))
        if hits.size:
            period = int(hits[0]) + 1
            if best is None or period < best.period:
                best = CycleReport(period, j, P[j : j + period + 1].copy())
                if period == 2:
                    break
    return best


@dataclass
class DescentConstants:
    eta_hat: float
    a_hat: float
    b_hat: float
    epsilon0: float
    sample_count: int
    quartic_controlled: bool  # b_hat * epsilon0^2 < a_hat
    energy_increase_count: int = 0
    epsilon_U: float | None = None
    gamma_U: float | None = None
    samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "eta_hat": self.eta_hat,
            "a_hat": self.a_hat,
            "b_hat": self.b_hat,
            "epsilon0": self.epsilon0,
            "sample_count": self.sample_count,
            "quartic_controlled": self.quartic_controlled,
            "energy_increase_count": self.energy_increase_count,
        }
        if self.epsilon_U is not None:
            out["epsilon_U"] = self.epsilon_U
            out["gamma_U"] = self.gamma_U
        return out


def estimate_descent_constants(
    core: ConvexCore,
    outer: OuterDomain,
    grid: np.ndarray,
    *,
    h: float | None = None,
    critical_points: np.ndarray | None = None,
    neighborhood_radius: float | None = None,
) -> DescentConstants:
    """Empirical constants of the energy decrease V(F(c)) - V(c) on a grid of core points.

    Fits -dV ~ a g^2 - b g^4 by least squares with a >= 0; eta_hat is the
    smallest -dV / g^2 over points with g > 1e-8.  When critical points and a
    neighbourhood radius are given, epsilon_U and gamma_U are the smallest
    gradient norm and energy drop outside that neighbourhood.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if len(grid) == 0:
        raise ValueError("empty grid")
    d, ok = thickness_values(core, outer, grid)
    coeffs, _, g_ok = gradient_values(core, outer, grid, h)
    Fc, f_ok = return_values(core, outer, grid, d=d)
    dF, dF_ok = thickness_values(core, outer, np.where(f_ok[:, None], Fc, grid))
    good = ok & g_ok & f_ok & dF_ok
    if not good.all():
        raise OuterBoundaryNotReached(grid[~good])
    g = np.linalg.norm(coeffs, axis=1)
    dV = 0.5 * dF**2 - 0.5 * d**2
    live = g > FLAT_GRADIENT
    if not live.any():
        raise GloballyCriticalError("scenario globally critical; constants undefined")

    gl, drop = g[live], -dV[live]
    eta_hat = float(np.min(drop / gl**2))
    A = np.stack([gl**2, -(gl**4)], axis=1)
    fit = lsq_linear(A, drop, bounds=([0.0, -np.inf], [np.inf, np.inf]))
    a_hat, b_hat = (float(v) for v in fit.x)
    eps0 = float(np.max(g))

    eps_U = gamma_U = None
    if critical_points is not None and neighborhood_radius is not None:
        cps = np.atleast_2d(critical_points)
        dist = np.min(np.linalg.norm(grid[:, None, :] - cps[None], axis=-1), axis=1)
        outside = dist > neighborhood_radius
        if outside.any():
            eps_U = float(np.min(g[outside]))
            gamma_U = float(np.min(-dV[outside]))

    return DescentConstants(
        eta_hat=eta_hat,
        a_hat=a_hat,
        b_hat=b_hat,
        epsilon0=eps0,
        sample_count=int(live.sum()),
        quartic_controlled=bool(b_hat * eps0**2 < a_hat),
        energy_increase_count=int(np.sum(dV > LYAPUNOV_SLACK)),
        epsilon_U=eps_U,
        gamma_U=gamma_U,
        samples={"grad_norm": g, "delta_V": dV, "thickness": d},
    )


def summability_check(trajectory: Trajectory, eta_hat: float, margin: float = 0.1) -> tuple[float, float]:
    """Return (sum_k |grad d(c_k)|^2, (V_0 - V_final) / eta_hat * (1 + margin))."""
    g = trajectory.grad_norm[np.isfinite(trajectory.grad_norm)]
    V = trajectory.energy
    return float(np.sum(g**2)), float((V[0] - V[-1]) / eta_hat * (1.0 + margin))
