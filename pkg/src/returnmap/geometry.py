"""Convex cores, outer domains, normals, tangent frames and core projection.

Points are plain numpy arrays.  Every function accepts a single point of shape
``(dim,)`` or a batch of shape ``(n, dim)`` and returns the matching shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import OffSurfaceError, ProjectionError, ScenarioError, SingularPointError
from .profiles import Profile, make_profile

SURFACE_TOL = 1e-10
_SINGULAR = 1e-12

__all__ = [
    "SURFACE_TOL",
    "ConvexCore",
    "OuterDomain",
    "RadialGraphOuter",
    "ImplicitOuter",
    "EllipsoidOuter",
    "TangentFrame",
    "outward_normal",
    "tangent_frame",
    "tangent_frames",
    "project_to_core",
    "inward_normal",
    "outer_from_dict",
]


def _unit(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(v, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return v / n[..., None], n


@dataclass(frozen=True)
class ConvexCore:
    """Axis-aligned ellipsoidal core centred at the origin.

    ``g(x) = sum (x_i / a_i)^2 - 1`` is negative inside.
    """

    shape_kind: str
    semi_axes: tuple[float, ...]

    def __post_init__(self):
        axes = tuple(float(a) for a in self.semi_axes)
        object.__setattr__(self, "semi_axes", axes)
        expected = {"circle": 2, "ellipse": 2, "sphere": 3, "ellipsoid": 3}
        if self.shape_kind not in expected:
            raise ScenarioError(f"unknown core shape {self.shape_kind!r}")
        if len(axes) != expected[self.shape_kind]:
            raise ScenarioError(
                f"{self.shape_kind} needs {expected[self.shape_kind]} semi-axes, got {len(axes)}"
            )
        if not all(np.isfinite(a) and a > 0 for a in axes):
            raise ScenarioError("semi-axes must be positive")
        if self.shape_kind in ("circle", "sphere") and len(set(axes)) != 1:
            raise ScenarioError(f"a {self.shape_kind} needs equal semi-axes")

    @classmethod
    def circle(cls, radius: float = 1.0) -> "ConvexCore":
        return cls("circle", (radius, radius))

    @classmethod
    def sphere(cls, radius: float = 1.0) -> "ConvexCore":
        return cls("sphere", (radius,) * 3)

    @classmethod
    def ellipse(cls, a: float, b: float) -> "ConvexCore":
        return cls("ellipse", (a, b))

    @classmethod
    def ellipsoid(cls, a: float, b: float, c: float) -> "ConvexCore":
        return cls("ellipsoid", (a, b, c))

    @property
    def ambient_dim(self) -> int:
        return len(self.semi_axes)

    @property
    def centroid(self) -> np.ndarray:
        return np.zeros(self.ambient_dim)

    @property
    def scale(self) -> float:
        return max(self.semi_axes)

    def implicit(self, x):
        return np.sum((np.asarray(x) / np.asarray(self.semi_axes)) ** 2, axis=-1) - 1.0

    def implicit_grad(self, x):
        a = np.asarray(self.semi_axes)
        return 2.0 * np.asarray(x) / a**2

    def support_radius(self, w):
        """Distance from the centroid to the boundary along unit directions ``w``."""
        return 1.0 / np.sqrt(np.sum((np.asarray(w) / np.asarray(self.semi_axes)) ** 2, axis=-1))

    def to_dict(self) -> dict[str, Any]:
        return {"shape": self.shape_kind, "semi_axes": list(self.semi_axes)}


class OuterDomain:
    """The open set Omega = {g < 0}; subclasses supply g and its gradient."""

    representation: str
    dim: int

    def implicit(self, x):
        raise NotImplementedError

    def implicit_grad(self, x):
        raise NotImplementedError

    @property
    def circumradius(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class RadialGraphOuter(OuterDomain):
    """Omega = {r omega : r < rho (1 + eps f(omega))}."""

    rho: float
    eps: float
    profile: Profile
    dim: int

    representation = "radial_graph"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ScenarioError("ambient dimension must be 2 or 3")
        if not self.rho > 0:
            raise ScenarioError("base radius rho must be positive")
        if abs(self.eps) * self.profile.bound() >= 1.0:
            raise ScenarioError("|eps * f| must stay below 1 for a well-defined radial graph")

    def radius(self, w):
        return self.rho * (1.0 + self.eps * self.profile.value(w))

    def implicit(self, x):
        x = np.asarray(x)
        w, r = _unit(x)
        return r - self.radius(w)

    def implicit_grad(self, x):
        x = np.asarray(x)
        w, r = _unit(x)
        gf = self.profile.grad(w)
        tangential = gf - np.sum(gf * w, axis=-1)[..., None] * w
        return w - (self.rho * self.eps / r)[..., None] * tangential

    def boundary_point(self, w):
        w, _ = _unit(np.asarray(w, dtype=float))
        return self.radius(w)[..., None] * w

    @property
    def circumradius(self) -> float:
        return self.rho * (1.0 + abs(self.eps) * self.profile.bound())

    def to_dict(self):
        return {
            "representation": self.representation,
            "rho": self.rho,
            "eps": self.eps,
            "profile": self.profile.to_dict(),
            "dim": self.dim,
        }


@dataclass(frozen=True)
class ImplicitOuter(OuterDomain):
    """Omega given by a user implicit function with Omega = {fn < 0}.

    ``bound_radius`` must enclose the whole domain.  Use module-level functions
    (not lambdas) if the domain is to be shipped to worker processes.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    bound_radius: float
    dim: int

    representation = "implicit"

    def implicit(self, x):
        return self.fn(np.asarray(x))

    def implicit_grad(self, x):
        return self.grad(np.asarray(x))

    @property
    def circumradius(self) -> float:
        return self.bound_radius

    def to_dict(self):
        return {
            "representation": self.representation,
            "fn": getattr(self.fn, "__qualname__", repr(self.fn)),
            "bound_radius": self.bound_radius,
            "dim": self.dim,
        }


@dataclass(frozen=True)
class EllipsoidOuter(OuterDomain):
    """Axis-aligned ellipsoid (or ellipse), possibly shifted off the origin."""

    semi_axes: tuple[float, ...]
    center: tuple[float, ...]

    representation = "implicit"

    def __post_init__(self):
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.semi_axes) != len(self.center) or len(self.center) not in (2, 3):
            raise ScenarioError("ellipsoid outer needs matching 2D or 3D axes and center")
        if not all(a > 0 for a in self.semi_axes):
            raise ScenarioError("semi-axes must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def implicit(self, x):
        y = (np.asarray(x) - np.asarray(self.center)) / np.asarray(self.semi_axes)
        return np.sum(y * y, axis=-1) - 1.0

    def implicit_grad(self, x):
        a = np.asarray(self.semi_axes)
        return 2.0 * (np.asarray(x) - np.asarray(self.center)) / a**2

    @property
    def circumradius(self) -> float:
        return float(np.linalg.norm(self.center) + max(self.semi_axes))

    def to_dict(self):
        return {
            "representation": "ellipsoid",
            "semi_axes": list(self.semi_axes),
            "center": list(self.center),
        }


def outer_from_dict(spec: dict[str, Any]) -> OuterDomain:
    rep = spec.get("representation")
    if rep == "radial_graph":
        return RadialGraphOuter(
            float(spec["rho"]), float(spec["eps"]), make_profile(spec["profile"]), int(spec["dim"])
        )
    if rep == "ellipsoid":
        return EllipsoidOuter(tuple(spec["semi_axes"]), tuple(spec["center"]))
    raise ScenarioError(f"cannot rebuild outer domain of representation {rep!r}")


@dataclass(frozen=True)
class TangentFrame:
    base: np.ndarray
    normal: np.ndarray
    tangents: np.ndarray  # (dim - 1, dim)

    def embed(self, coefficients) -> np.ndarray:
        return np.asarray(coefficients) @ self.tangents

    def coordinates(self, v) -> np.ndarray:
        return self.tangents @ np.asarray(v)


def _check_on_core(core: ConvexCore, c: np.ndarray) -> None:
    resid = np.abs(core.implicit(c))
    if np.any(~(resid <= SURFACE_TOL)):
        raise OffSurfaceError(
            f"point not on the core boundary (|g_C| = {float(np.max(resid)):.3e} > {SURFACE_TOL})"
        )


def _normals(core: ConvexCore, c: np.ndarray) -> np.ndarray:
    n, size = _unit(core.implicit_grad(c))
    if np.any(~(size >= _SINGULAR)):
        raise SingularPointError("singular surface point")
    return n


def outward_normal(core: ConvexCore, c, *, check: bool = True) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if check:
        _check_on_core(core, c)
    return _normals(core, c)


def tangent_frames(core: ConvexCore, c, *, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Batch form of :func:`tangent_frame`: returns normals and tangents ``(..., dim-1, dim)``.

    2D: tangent is the normal rotated by +90 degrees.  3D: Gram-Schmidt seeded
    with the coordinate axis least aligned with the normal (ties go to x, then
    y, then z), completed by ``normal x t1``.
    """
    n = outward_normal(core, c, check=check)
    if n.shape[-1] == 2:
        t = np.stack([-n[..., 1], n[..., 0]], axis=-1)
        return n, t[..., None, :]
    axis = np.argmin(np.abs(n), axis=-1)
    seed = np.eye(3)[axis]
    t1 = seed - np.sum(seed * n, axis=-1)[..., None] * n
    t1 /= np.linalg.norm(t1, axis=-1)[..., None]
    t2 = np.cross(n, t1)
    return n, np.stack([t1, t2], axis=-2)


def tangent_frame(core: ConvexCore, c) -> TangentFrame:
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise ValueError("tangent_frame takes a single point; use tangent_frames for batches")
    n, t = tangent_frames(core, c)
    return TangentFrame(c.copy(), n, t)


def project_to_core(core: ConvexCore, p) -> np.ndarray:
    """Scale ``p`` along the ray from the centroid until it lies on the core boundary."""
    p = np.asarray(p, dtype=float)
    q = np.sqrt(np.sum((p / np.asarray(core.semi_axes)) ** 2, axis=-1))
    if np.any(~(q > 0)):
        raise ProjectionError("undefined projection direction")
    return p / q[..., None]


def inward_normal(outer: OuterDomain, x, *, check: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) == 0):
        raise SingularPointError("undefined direction")
    if check:
        resid = np.abs(outer.implicit(x))
        if np.any(~(resid <= SURFACE_TOL)):
            raise OffSurfaceError(
                f"point not on the outer boundary (|g_Omega| = {float(np.max(resid)):.3e})"
            )
    n, size = _unit(-outer.implicit_grad(x))
    if np.any(~(size >= _SINGULAR)):
        raise SingularPointError("singular outer boundary point")
    return n
