"""Bump profiles f(omega) for radial-graph outer boundaries.

A profile is a smooth function of a unit direction ``omega``.  Every entry is
evaluated on arrays of shape ``(..., dim)`` and provides a closed-form ambient
gradient; the tangential part is taken by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ScenarioError

__all__ = [
    "Profile",
    "Constant",
    "AxisCosine",
    "GaussianBump",
    "Polynomial",
    "ProfileSum",
    "make_profile",
]


class Profile:
    def value(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bound(self) -> float:
        """Upper bound of |f| on the unit sphere."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def __add__(self, other: "Profile") -> "ProfileSum":
        left = self.terms if isinstance(self, ProfileSum) else (self,)
        right = other.terms if isinstance(other, ProfileSum) else (other,)
        return ProfileSum(tuple(left) + tuple(right))


@dataclass(frozen=True)
class Constant(Profile):
    level: float = 0.0

    def value(self, w):
        return np.full(np.shape(w)[:-1], float(self.level))

    def grad(self, w):
        return np.zeros(np.shape(w))

    def bound(self):
        return abs(self.level)

    def to_dict(self):
        return {"kind": "constant", "level": self.level}


@dataclass(frozen=True)
class AxisCosine(Profile):
    """f(omega) = amplitude * omega[axis].

    On the circle with axis 0 this is cos(theta); on the sphere with axis 2 it
    is the height function cos(polar angle).
    """

    axis: int = 0
    amplitude: float = 1.0

    def value(self, w):
        return self.amplitude * np.asarray(w)[..., self.axis]

    def grad(self, w):
        g = np.zeros(np.shape(w))
        g[..., self.axis] = self.amplitude
        return g

    def bound(self):
        return abs(self.amplitude)

    def to_dict(self):
        return {"kind": "axis_cosine", "axis": self.axis, "amplitude": self.amplitude}


@dataclass(frozen=True)
class GaussianBump(Profile):
    """f(omega) = amplitude * exp(-kappa |omega - center|^2).

    A negative amplitude makes a dip, i.e. a minimum of the thickness.
    """

    center: tuple[float, ...]
    kappa: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        n = np.linalg.norm(c)
        if n == 0:
            raise ScenarioError("bump center must be a nonzero direction")
        object.__setattr__(self, "center", tuple((c / n).tolist()))
        if self.kappa <= 0:
            raise ScenarioError("bump kappa must be positive")

    def _e(self, w):
        diff = np.asarray(w) - np.asarray(self.center)
        return diff, np.exp(-self.kappa * np.sum(diff * diff, axis=-1))

    def value(self, w):
        return self.amplitude * self._e(w)[1]

    def grad(self, w):
        diff, e = self._e(w)
        return (-2.0 * self.kappa * self.amplitude * e)[..., None] * diff

    def bound(self):
        return abs(self.amplitude)

    def to_dict(self):
        return {
            "kind": "gaussian_bump",
            "center": list(self.center),
            "kappa": self.kappa,
            "amplitude": self.amplitude,
        }


@dataclass(frozen=True)
class Polynomial(Profile):
    """Sum of monomials coeff * prod_i omega_i^p_i in the direction components."""

    terms: tuple[tuple[tuple[int, ...], float], ...] = field(default=())

    def __post_init__(self):
        for powers, _ in self.terms:
            if any(p < 0 for p in powers):
                raise ScenarioError("polynomial exponents must be nonnegative")

    def value(self, w):
        w = np.asarray(w)
        out = np.zeros(w.shape[:-1])
        for powers, coeff in self.terms:
            out = out + coeff * np.prod(w[..., : len(powers)] ** np.asarray(powers), axis=-1)
        return out

    def grad(self, w):
        w = np.asarray(w)
        g = np.zeros(w.shape)
        for powers, coeff in self.terms:
            for i, p in enumerate(powers):
                if p == 0:
                    continue
                lowered = list(powers)
                lowered[i] -= 1
                g[..., i] += coeff * p * np.prod(w[..., : len(powers)] ** np.asarray(lowered), axis=-1)
        return g

    def bound(self):
        return float(sum(abs(c) for _, c in self.terms))

    def to_dict(self):
        return {"kind": "polynomial", "terms": [[list(p), c] for p, c in self.terms]}


@dataclass(frozen=True)
class ProfileSum(Profile):
    terms: tuple[Profile, ...]

    def value(self, w):
        return sum(t.value(w) for t in self.terms)

    def grad(self, w):
        return sum(t.grad(w) for t in self.terms)

    def bound(self):
        return float(sum(t.bound() for t in self.terms))

    def to_dict(self):
        return {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}


def make_profile(spec: Mapping[str, Any]) -> Profile:
    """Build a profile from its dictionary form (the inverse of ``to_dict``)."""
    kind = spec.get("kind")
    try:
        if kind == "constant":
            return Constant(float(spec.get("level", 0.0)))
        if kind == "axis_cosine":
            return AxisCosine(int(spec.get("axis", 0)), float(spec.get("amplitude", 1.0)))
        if kind == "gaussian_bump":
            return GaussianBump(
                tuple(float(v) for v in spec["center"]),
                float(spec.get("kappa", 1.0)),
                float(spec.get("amplitude", 1.0)),
            )
        if kind == "polynomial":
            return Polynomial(
                tuple((tuple(int(p) for p in powers), float(c)) for powers, c in spec["terms"])
            )
        if kind == "sum":
            return ProfileSum(tuple(make_profile(t) for t in spec["terms"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad parameters for profile {kind!r}: {exc}") from exc
    raise ScenarioError(f"unknown profile kind {kind!r}")
