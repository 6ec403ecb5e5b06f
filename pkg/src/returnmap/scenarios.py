"""Named, parameterised scenarios with closed-form oracles where they exist.

On circle and sphere cores the outward normal is radial, so the outward ray
from ``c = a omega`` leaves a radial-graph domain exactly at radius
``rho (1 + eps f(omega))`` and the thickness is known in closed form:

    d(omega) = rho (1 + eps f(omega)) - a

``perturbed_circle_cosine`` is parameterised by the amplitude of d itself:
with ``rho`` and ``amplitude`` it realises d(theta) = rho - 1 + amplitude cos(theta),
so the defaults give d(theta) = 0.5 + 0.1 cos(theta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import ScenarioError
from .geometry import ConvexCore, EllipsoidOuter, OuterDomain, RadialGraphOuter, project_to_core
from .maps import AdmissibilityReport, check_admissibility, thickness_values
from .profiles import AxisCosine, Constant, GaussianBump, Profile, make_profile
from .sampling import directions

ORACLE_TOL = 1e-8
CONSTRUCTION_SAMPLES = 1000

__all__ = ["Scenario", "RadialOracle", "CATALOG", "build_scenario", "scenario_names"]


@dataclass(frozen=True)
class RadialOracle:
    """Closed forms for a radial graph over a round core of radius ``a``."""

    a: float
    rho: float
    eps: float
    profile: Profile
    critical: tuple[tuple[tuple[float, ...], str], ...] = ()

    def _w(self, c):
        c = np.asarray(c, dtype=float)
        return c / np.linalg.norm(c, axis=-1, keepdims=True)

    def thickness(self, c):
        return self.rho * (1.0 + self.eps * self.profile.value(self._w(c))) - self.a

    def gradient(self, c):
        """Ambient tangential gradient of d (arc length on the core)."""
        w = self._w(c)
        gf = self.profile.grad(w)
        tang = gf - np.sum(gf * w, axis=-1, keepdims=True) * w
        return (self.rho * self.eps / self.a) * tang

    @property
    def critical_points(self) -> list[tuple[np.ndarray, str]]:
        return [(self.a * np.asarray(p), kind) for p, kind in self.critical]


@dataclass(frozen=True)
class Scenario:
    name: str
    core: ConvexCore
    outer: OuterDomain
    params: dict[str, Any]
    provenance_notes: str
    oracle: RadialOracle | None = None
    admissibility: AdmissibilityReport | None = field(default=None, compare=False)

    def describe(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "params": self.params,
            "core": self.core.to_dict(),
            "outer": self.outer.to_dict(),
            "notes": self.provenance_notes,
        }


def _concentric_circle(rho: float = 2.0):
    core = ConvexCore.circle()
    outer = RadialGraphOuter(rho, 0.0, Constant(0.0), 2)
    note = f"concentric circles 1 -> {rho}; d = {rho - 1} everywhere, F = identity"
    return core, outer, note, RadialOracle(1.0, rho, 0.0, Constant(0.0))


def _concentric_sphere(rho: float = 2.0):
    core = ConvexCore.sphere()
    outer = RadialGraphOuter(rho, 0.0, Constant(0.0), 3)
    note = f"concentric spheres 1 -> {rho}; d = {rho - 1} everywhere, F = identity"
    return core, outer, note, RadialOracle(1.0, rho, 0.0, Constant(0.0))


def _perturbed_circle_cosine(rho: float = 1.5, amplitude: float | None = None, eps: float | None = None):
    if amplitude is None:
        amplitude = 0.1 if eps is None else rho * eps
    elif eps is not None and not np.isclose(rho * eps, amplitude):
        raise ScenarioError("give either amplitude (in d) or eps, not both")
    core = ConvexCore.circle()
    prof = AxisCosine(0)
    outer = RadialGraphOuter(rho, amplitude / rho, prof, 2)
    note = (
        f"unit circle inside r(theta) = {rho} + {amplitude} cos(theta); "
        f"d(theta) = {rho - 1:g} + {amplitude:g} cos(theta), max at theta=0, min at theta=pi"
    )
    crit = (((1.0, 0.0), "max"), ((-1.0, 0.0), "min"))
    return core, outer, note, RadialOracle(1.0, rho, amplitude / rho, prof, crit)


def _perturbed_sphere_height(rho: float = 1.4, eps: float = 0.05):
    core = ConvexCore.sphere()
    prof = AxisCosine(2)
    outer = RadialGraphOuter(rho, eps, prof, 3)
    note = f"unit sphere inside r = {rho}(1 + {eps} z); d has its max at the north pole, min at the south pole"
    crit = (((0.0, 0.0, 1.0), "max"), ((0.0, 0.0, -1.0), "min"))
    return core, outer, note, RadialOracle(1.0, rho, eps, prof, crit)


def _perturbed_sphere_single_bump(rho: float = 1.4, eps: float = 0.05, kappa: float = 1.0, center=(0.0, 0.0, 1.0)):
    core = ConvexCore.sphere()
    prof = GaussianBump(tuple(center), kappa, -1.0)
    outer = RadialGraphOuter(rho, eps, prof, 3)
    c = np.asarray(prof.center)
    note = (
        f"unit sphere inside r = {rho}(1 - {eps} exp(-{kappa}|w - w0|^2)), w0 = {list(prof.center)}; "
        "single nondegenerate min of d at w0, max at -w0"
    )
    crit = ((tuple(c), "min"), (tuple(-c), "max"))
    return core, outer, note, RadialOracle(1.0, rho, eps, prof, crit)


def _perturbed_sphere_two_bumps(
    rho: float = 1.4, eps: float = 0.05, kappa: float = 2.0, half_angle_deg: float = 50.0,
    second_depth: float = 0.8, tilt: float = 0.3,
):
    core = ConvexCore.sphere()
    a = np.deg2rad(half_angle_deg)
    prof = (
        GaussianBump((np.sin(a), 0.0, np.cos(a)), kappa, -1.0)
        + GaussianBump((-np.sin(a), 0.0, np.cos(a)), kappa, -second_depth)
        + AxisCosine(2, -tilt)
    )
    outer = RadialGraphOuter(rho, eps, prof, 3)
    note = (
        f"unit sphere inside a radial graph with two dips {2 * half_angle_deg:g} deg apart "
        f"(depths 1, {second_depth}) and a -{tilt} z tilt; d has two minima, one saddle between "
        "them and one maximum near the south pole"
    )
    return core, outer, note, RadialOracle(1.0, rho, eps, prof)


def _pathological_fold(rho: float = 2.0, eps: float = 0.6, kappa: float = 40.0):
    core = ConvexCore.circle()
    prof = GaussianBump((1.0, 0.0), kappa, 1.0)
    outer = RadialGraphOuter(rho, eps, prof, 2)
    note = (
        f"unit circle inside a radial graph with a narrow spike (eps={eps}, kappa={kappa}); "
        "the spike flanks are so steep that their inward normals pass beside the core"
    )
    return core, outer, note, RadialOracle(1.0, rho, eps, prof)


def _custom(shape: str = "ellipse", semi_axes=(1.2, 1.0), outer: str = "radial_graph", rho: float = 1.6,
            eps: float = 0.0, profile: Mapping[str, Any] | None = None, outer_axes=None, outer_center=None):
    core = ConvexCore(shape, tuple(float(a) for a in semi_axes))
    dim = core.ambient_dim
    if outer == "radial_graph":
        prof = make_profile(profile) if profile else Constant(0.0)
        dom: OuterDomain = RadialGraphOuter(rho, eps, prof, dim)
    elif outer == "ellipsoid":
        dom = EllipsoidOuter(tuple(outer_axes), tuple(outer_center or (0.0,) * dim))
    else:
        raise ScenarioError(f"unknown outer representation {outer!r}")
    return core, dom, f"custom {shape} core with {outer} outer domain", None


CATALOG: dict[str, Callable[..., tuple]] = {
    "concentric_circle": _concentric_circle,
    "concentric_sphere": _concentric_sphere,
    "perturbed_circle_cosine": _perturbed_circle_cosine,
    "perturbed_sphere_height": _perturbed_sphere_height,
    "perturbed_sphere_single_bump": _perturbed_sphere_single_bump,
    "perturbed_sphere_two_bumps": _perturbed_sphere_two_bumps,
    "pathological_fold": _pathological_fold,
    "custom": _custom,
}

EXPECTED_INADMISSIBLE = {"pathological_fold"}


def scenario_names() -> list[str]:
    return list(CATALOG)


def build_scenario(
    name: str, params: Mapping[str, Any] | None = None, *, samples: int = CONSTRUCTION_SAMPLES
) -> Scenario:
    """Build and validate a catalog scenario.

    Validation runs the sampled admissibility check and, when a closed-form
    thickness exists, compares it with the ray-cast thickness on 100 points.
    """
    if name not in CATALOG:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {', '.join(CATALOG)}")
    params = dict(params or {})
    try:
        core, outer, note, oracle = CATALOG[name](**params)
    except TypeError as exc:
        raise ScenarioError(f"bad parameters for {name}: {exc}") from exc

    report = check_admissibility(core, outer, samples, samples)
    if name in EXPECTED_INADMISSIBLE:
        note += (
            f"; admissibility verdict {report.verdict} "
            f"({len(report.normal_property_failures)} normal-property failures, "
            f"{len(report.connectivity_failures)} connectivity failures in {report.samples_checked} samples)"
        )
    elif not report.verdict:
        raise ScenarioError(
            f"{name} with {params} is not admissible: {len(report.normal_property_failures)} "
            f"normal-property failures, {len(report.connectivity_failures)} connectivity failures"
        )

    if oracle is not None and name not in EXPECTED_INADMISSIBLE:
        c = project_to_core(core, directions(core.ambient_dim, 100))
        d, ok = thickness_values(core, outer, c)
        err = np.max(np.abs(d - oracle.thickness(c))) if ok.all() else np.inf
        if not err <= ORACLE_TOL:
            raise ScenarioError(f"{name}: ray-cast thickness disagrees with closed form by {err:.3e}")

    return Scenario(name, core, outer, params, note, oracle, report)
