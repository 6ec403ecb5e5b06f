"""Boundary return map between a convex core and an outer domain.

A point c on the core boundary travels out along the outward normal to the
outer boundary (the radial map), then back along that boundary's inward normal
until it meets the core again (the reciprocal map).  Iterating the round trip
F gives a discrete dynamical system on the core boundary.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    GloballyCriticalError,
    NormalPropertyViolation,
    OffSurfaceError,
    OuterBoundaryNotReached,
    ProjectionError,
    ReturnMapError,
    ScenarioError,
    SingularPointError,
)
from .geometry import (  # noqa: E402
    ConvexCore,
    EllipsoidOuter,
    ImplicitOuter,
    RadialGraphOuter,
    TangentFrame,
    inward_normal,
    outward_normal,
    project_to_core,
    tangent_frame,
)
from .maps import check_admissibility, radial_map, reciprocal_map, return_map, thickness  # noqa: E402
from .calculus import numerical_jacobian_F, tangential_gradient, tangential_hessian  # noqa: E402
from .dynamics import detect_cycles, estimate_descent_constants, iterate, iterate_many  # noqa: E402
from .analysis import classify, compute_basins, find_critical_points, verify_expansion  # noqa: E402
from .scenarios import build_scenario, scenario_names  # noqa: E402
