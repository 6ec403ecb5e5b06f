import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from returnmap.errors import OffSurfaceError, ProjectionError, SingularPointError
from returnmap.geometry import (
    ConvexCore,
    EllipsoidOuter,
    RadialGraphOuter,
    inward_normal,
    outward_normal,
    project_to_core,
    tangent_frame,
    tangent_frames,
)
from returnmap.profiles import AxisCosine, GaussianBump

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)
polar = st.floats(0.01, np.pi - 0.01)
axes3 = st.tuples(*[st.floats(0.5, 2.0)] * 3)


def test_circle_normal_is_radial():
    core = ConvexCore.circle()
    c = np.array([0.6, 0.8])
    np.testing.assert_allclose(outward_normal(core, c), c)


def test_ellipse_normal_closed_form():
    core = ConvexCore.ellipse(2.0, 1.0)
    t = 0.7
    c = np.array([2 * np.cos(t), np.sin(t)])
    expected = np.array([np.cos(t) / 2, np.sin(t)])
    np.testing.assert_allclose(outward_normal(core, c), expected / np.linalg.norm(expected))


@given(axes3, polar, angles)
def test_tangent_frame_orthonormal(axes, u, v):
    core = ConvexCore.ellipsoid(*axes)
    w = np.array([np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)])
    c = project_to_core(core, w)
    fr = tangent_frame(core, c)
    basis = np.vstack([fr.normal, fr.tangents])
    np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
    # right-handed: t1 x t2 = n
    np.testing.assert_allclose(np.cross(fr.tangents[0], fr.tangents[1]), fr.normal, atol=1e-12)


@given(angles)
def test_2d_tangent_is_ccw_rotation(theta):
    core = ConvexCore.circle()
    c = np.array([np.cos(theta), np.sin(theta)])
    n, t = tangent_frames(core, c)
    np.testing.assert_allclose(t[0], [-np.sin(theta), np.cos(theta)], atol=1e-15)


def test_frame_embed_coordinates_roundtrip():
    core = ConvexCore.sphere()
    fr = tangent_frame(core, np.array([0.0, 0.6, 0.8]))
    v = fr.embed([0.3, -1.2])
    np.testing.assert_allclose(fr.coordinates(v), [0.3, -1.2])


@given(axes3, st.tuples(*[st.floats(-3, 3)] * 3).filter(lambda p: np.linalg.norm(p) > 1e-3))
def test_projection_lands_on_core(axes, p):
    core = ConvexCore.ellipsoid(*axes)
    c = project_to_core(core, np.array(p))
    assert abs(core.implicit(c)) < 1e-12
    # same ray from the centroid
    assert np.allclose(np.cross(c, p), 0, atol=1e-9 * np.linalg.norm(p))


def test_projection_of_centroid_raises():
    with pytest.raises(ProjectionError, match="undefined projection direction"):
        project_to_core(ConvexCore.sphere(), np.zeros(3))


def test_off_surface_rejected():
    with pytest.raises(OffSurfaceError):
        outward_normal(ConvexCore.circle(), np.array([1.1, 0.0]))


def test_inward_normal_at_origin_raises():
    outer = EllipsoidOuter((2.0, 2.0), (0.0, 0.0))
    with pytest.raises(SingularPointError, match="undefined direction"):
        inward_normal(outer, np.zeros(2), check=False)


def test_inward_normal_of_offset_ball_points_to_center():
    outer = EllipsoidOuter((2.0, 2.0), (0.3, -0.2))
    x = np.array([0.3, -0.2]) + 2.0 * np.array([0.6, 0.8])
    np.testing.assert_allclose(inward_normal(outer, x), [-0.6, -0.8], atol=1e-14)


@given(angles, st.floats(-0.3, 0.3))
def test_radial_graph_gradient_matches_finite_differences(theta, eps):
    outer = RadialGraphOuter(1.5, eps, AxisCosine(0) + GaussianBump((0.2, 1.0), 3.0, 0.5), 2)
    x = np.array([1.7 * np.cos(theta), 1.7 * np.sin(theta)])
    h = 1e-6
    fd = np.array([(outer.implicit(x + h * e) - outer.implicit(x - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(outer.implicit_grad(x), fd, atol=1e-8)


def test_radial_graph_rejects_nonpositive_radius():
    from returnmap.errors import ScenarioError

    with pytest.raises(ScenarioError):
        RadialGraphOuter(1.0, 1.5, AxisCosine(0), 2)


def test_core_validation():
    with pytest.raises(Exception):
        ConvexCore("ellipse", (1.0, -1.0))
