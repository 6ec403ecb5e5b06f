"""Exception types raised by the return-map toolkit."""

from __future__ import annotations

import numpy as np


class ReturnMapError(Exception):
    """Base class for all errors raised by this package."""


class SingularPointError(ReturnMapError):
    pass


class ProjectionError(ReturnMapError):
    pass


class OffSurfaceError(ReturnMapError):
    pass


class OuterBoundaryNotReached(ReturnMapError):
    """The outward ray never left the outer domain within the ray horizon."""

    def __init__(self, points: np.ndarray):
        self.points = np.atleast_2d(points)
        super().__init__(
            f"outer boundary not reached from {len(self.points)} core point(s), "
            f"first at {self.points[0].tolist()}"
        )


class NormalPropertyViolation(ReturnMapError):
    """The inward normal ray from a boundary point misses the core."""

    def __init__(self, points: np.ndarray):
        self.points = np.atleast_2d(points)
        super().__init__(
            f"geometric normal property violated at x = {self.points[0].tolist()}"
            + (f" (and {len(self.points) - 1} more)" if len(self.points) > 1 else "")
        )


class GloballyCriticalError(ReturnMapError):
    pass


class ScenarioError(ReturnMapError):
    pass


class ConfigError(ReturnMapError):
    pass
