"""Thickness, radial map, reciprocal map, return map and admissibility sampling.

All roots are found the same way: march along the ray with a coarse step to
bracket the first sign change of the implicit function, bisect, then polish
with safeguarded Newton steps that never leave the bracket.  Newton alone can
jump over the first crossing, which would silently change the map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NormalPropertyViolation, OuterBoundaryNotReached
from .geometry import (
    ConvexCore,
    OuterDomain,
    RadialGraphOuter,
    _check_on_core,
    _normals,
    inward_normal,
    project_to_core,
)
from .sampling import directions

MARCH_FRACTION = 1e-2
HORIZON_FACTOR = 10.0
ROOT_TOL_VALUE = 1e-12
ROOT_TOL_T = 1e-10

__all__ = [
    "ThicknessSample",
    "ReciprocalResult",
    "AdmissibilityReport",
    "first_root",
    "thickness",
    "radial_map",
    "reciprocal_map",
    "return_map",
    "thickness_values",
    "return_values",
    "check_admissibility",
    "outer_boundary_points",
]


def first_root(
    fn: Callable[[np.ndarray], np.ndarray],
    grad: Callable[[np.ndarray], np.ndarray],
    origins: np.ndarray,
    dirs: np.ndarray,
    *,
    step: float,
    horizon: float,
    start_negative: bool = True,
    chunk: int = 32,
    n_bisect: int = 24,
    n_newton: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """Smallest ``t >= 0`` where ``fn(o + t u)`` changes sign, for a batch of rays.

    ``start_negative`` states the sign of ``fn`` at the origins.  Returns
    ``(t, ok)``; ``t`` is NaN where no crossing lies within ``horizon``.
    """
    origins = np.asarray(origins, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    n = len(origins)
    sgn = 1.0 if start_negative else -1.0

    hi = np.full(n, np.nan)
    active = np.arange(n)
    offsets = step * np.arange(1, chunk + 1)
    t0 = 0.0
    while active.size and t0 < horizon:
        ts = t0 + offsets
        pts = origins[active, None, :] + ts[None, :, None] * dirs[active, None, :]
        crossed = (sgn * fn(pts) >= 0) & (ts <= horizon)[None, :]
        hit = crossed.any(axis=1)
        if hit.any():
            hi[active[hit]] = ts[crossed[hit].argmax(axis=1)]
        active = active[~hit]
        t0 = ts[-1]

    ok = np.isfinite(hi)
    t_out = np.full(n, np.nan)
    if not ok.any():
        return t_out, ok

    o = origins[ok]
    u = dirs[ok]
    hi_ = hi[ok]
    lo_ = hi_ - step

    def h(t):
        return sgn * fn(o + t[:, None] * u)

    for _ in range(n_bisect):
        mid = 0.5 * (lo_ + hi_)
        below = h(mid) < 0
        lo_ = np.where(below, mid, lo_)
        hi_ = np.where(below, hi_, mid)

    t = 0.5 * (lo_ + hi_)
    for _ in range(n_newton):
        p = o + t[:, None] * u
        v = sgn * fn(p)
        dv = sgn * np.sum(grad(p) * u, axis=-1)
        below = v < 0
        lo_ = np.where(below, t, lo_)
        hi_ = np.where(below, hi_, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - v / dv
        # a root sitting on a bracket end lands a rounding error outside it
        slack = 1e-14 * np.maximum(1.0, np.abs(hi_))
        bad = ~np.isfinite(tn) | (tn < lo_ - slack) | (tn > hi_ + slack)
        tn = np.clip(tn, lo_, hi_)
        t = np.where(v == 0, t, np.where(bad, 0.5 * (lo_ + hi_), tn))

    resid = np.abs(fn(o + t[:, None] * u))
    good = (resid <= ROOT_TOL_VALUE) | (hi_ - lo_ <= ROOT_TOL_T)
    t_out[np.flatnonzero(ok)] = t
    ok[np.flatnonzero(ok)] = good
    t_out[~ok] = np.nan
    return t_out, ok


def _march_params(core: ConvexCore, outer: OuterDomain) -> tuple[float, float]:
    return MARCH_FRACTION * core.scale, HORIZON_FACTOR * outer.circumradius


def _batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


def thickness_values(core: ConvexCore, outer: OuterDomain, c: np.ndarray, normals=None):
    """Unchecked batch thickness: returns ``(d, ok)`` for core points ``c`` of shape (n, dim)."""
    nu = _normals(core, c) if normals is None else normals
    step, horizon = _march_params(core, outer)
    inside = outer.implicit(c) < 0
    d, ok = first_root(
        outer.implicit, outer.implicit_grad, c, nu, step=step, horizon=horizon, start_negative=True
    )
    ok &= inside
    d[~ok] = np.nan
    return d, ok


def reciprocal_values(core: ConvexCore, outer: OuterDomain, x: np.ndarray):
    """Unchecked batch reciprocal map: returns ``(t, landing, ok)``."""
    n = inward_normal(outer, x, check=False)
    step, horizon = _march_params(core, outer)
    outside = core.implicit(x) > 0
    t, ok = first_root(
        core.implicit, core.implicit_grad, x, n, step=step, horizon=horizon, start_negative=False
    )
    ok &= outside
    t[~ok] = np.nan
    return t, x + t[:, None] * n, ok


def return_values(core: ConvexCore, outer: OuterDomain, c: np.ndarray, d=None, normals=None):
    """Unchecked batch return map ``F(c)``; returns ``(F(c), ok)``."""
    nu = _normals(core, c) if normals is None else normals
    if d is None:
        d, ok_d = thickness_values(core, outer, c, nu)
    else:
        ok_d = np.isfinite(d)
    x = c + np.where(ok_d, d, 0.0)[:, None] * nu
    _, landing, ok = reciprocal_values(core, outer, x)
    ok &= ok_d
    landing[~ok] = np.nan
    return landing, ok


@dataclass(frozen=True)
class ThicknessSample:
    base: np.ndarray
    thickness: np.ndarray | float
    exit_point: np.ndarray


@dataclass(frozen=True)
class ReciprocalResult:
    start: np.ndarray
    return_time: np.ndarray | float
    landing: np.ndarray


def thickness(core: ConvexCore, outer: OuterDomain, c) -> ThicknessSample:
    cb, single = _batch(c)
    _check_on_core(core, cb)
    nu = _normals(core, cb)
    d, ok = thickness_values(core, outer, cb, nu)
    if not ok.all():
        raise OuterBoundaryNotReached(cb[~ok])
    exit_point = cb + d[:, None] * nu
    if single:
        return ThicknessSample(cb[0], float(d[0]), exit_point[0])
    return ThicknessSample(cb, d, exit_point)


def radial_map(core: ConvexCore, outer: OuterDomain, c) -> np.ndarray:
    return thickness(core, outer, c).exit_point


def reciprocal_map(core: ConvexCore, outer: OuterDomain, x) -> ReciprocalResult:
    xb, single = _batch(x)
    inward_normal(outer, xb)  # on-surface precondition
    t, landing, ok = reciprocal_values(core, outer, xb)
    if not ok.all():
        raise NormalPropertyViolation(xb[~ok])
    if single:
        return ReciprocalResult(xb[0], float(t[0]), landing[0])
    return ReciprocalResult(xb, t, landing)


def return_map(core: ConvexCore, outer: OuterDomain, c) -> np.ndarray:
    """F = reciprocal o radial, evaluated at one or many core points."""
    sample = thickness(core, outer, c)
    return reciprocal_map(core, outer, sample.exit_point).landing


@dataclass
class AdmissibilityReport:
    samples_checked: int
    normal_property_failures: np.ndarray
    connectivity_failures: np.ndarray
    thickness_range: tuple[float, float] = field(default=(np.nan, np.nan))

    @property
    def verdict(self) -> bool:
        return len(self.normal_property_failures) == 0 and len(self.connectivity_failures) == 0

    def to_dict(self) -> dict:
        return {
            "samples_checked": self.samples_checked,
            "normal_property_failures": len(self.normal_property_failures),
            "connectivity_failures": len(self.connectivity_failures),
            "d_min": self.thickness_range[0],
            "d_max": self.thickness_range[1],
            "verdict": self.verdict,
        }


def outer_boundary_points(core: ConvexCore, outer: OuterDomain, w: np.ndarray) -> np.ndarray:
    """Points of the outer boundary hit by centroid rays along unit directions ``w``."""
    if isinstance(outer, RadialGraphOuter):
        return outer.boundary_point(w)
    step, horizon = _march_params(core, outer)
    origins = np.zeros_like(w)
    t, ok = first_root(
        outer.implicit, outer.implicit_grad, origins, w, step=step, horizon=horizon
    )
    return t[:, None] * w if ok.all() else (t[:, None] * w)[ok]


def _interval_count(core, outer, c, nu, block: int = 256) -> np.ndarray:
    """Number of disjoint runs of {t >= 0 : c + t nu in Omega} seen by a fine march."""
    step, horizon = _march_params(core, outer)
    reach = outer.circumradius + float(np.max(np.linalg.norm(c, axis=-1))) + 2 * step
    ts = np.arange(0.0, min(horizon, reach) + step, step)
    runs = np.empty(len(c), dtype=int)
    for s in range(0, len(c), block):
        pts = c[s : s + block, None, :] + ts[None, :, None] * nu[s : s + block, None, :]
        inside = outer.implicit(pts) < 0
        starts = inside[:, 1:] & ~inside[:, :-1]
        count = 1 + starts.sum(axis=1)
        runs[s : s + block] = np.where(inside[:, 0], count, 0)
    return runs


def check_admissibility(
    core: ConvexCore, outer: OuterDomain, n_boundary_samples: int = 1000, n_core_samples: int = 1000
) -> AdmissibilityReport:
    """Sampled check of the normal property and of ray connectivity.

    Boundary samples: the inward normal ray from every sampled outer boundary
    point must reach the core.  Core samples: the core point must lie in Omega
    and the outward normal ray must meet Omega in a single interval.
    """
    if n_boundary_samples < 1 or n_core_samples < 1:
        raise ValueError("sample counts must be at least 1")
    dim = core.ambient_dim

    x = outer_boundary_points(core, outer, directions(dim, n_boundary_samples))
    _, _, ok = reciprocal_values(core, outer, x)
    normal_failures = x[~ok]

    c = project_to_core(core, directions(dim, n_core_samples))
    nu = _normals(core, c)
    runs = _interval_count(core, outer, c, nu)
    conn_failures = c[runs != 1]

    d, d_ok = thickness_values(core, outer, c, nu)
    d_range = (float(np.min(d[d_ok])), float(np.max(d[d_ok]))) if d_ok.any() else (np.nan, np.nan)
    return AdmissibilityReport(
        samples_checked=n_boundary_samples + n_core_samples,
        normal_property_failures=normal_failures,
        connectivity_failures=conn_failures,
        thickness_range=d_range,
    )
