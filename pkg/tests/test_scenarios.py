import numpy as np
import pytest

import oracles
from returnmap.errors import ScenarioError
from returnmap.geometry import ConvexCore, project_to_core
from returnmap.maps import check_admissibility, thickness
from returnmap.sampling import directions
from returnmap.scenarios import build_scenario, scenario_names

CATALOG = [
    "concentric_circle",
    "concentric_sphere",
    "perturbed_circle_cosine",
    "perturbed_sphere_height",
    "perturbed_sphere_single_bump",
    "perturbed_sphere_two_bumps",
    "pathological_fold",
]


def test_catalog_names():
    assert set(CATALOG) <= set(scenario_names())


@pytest.mark.parametrize("name", [n for n in CATALOG if n != "pathological_fold"])
def test_admissible_at_ten_thousand_samples(name):
    s = build_scenario(name)
    rep = check_admissibility(s.core, s.outer, 10_000, 10_000)
    assert rep.verdict, rep.to_dict()


def test_pathological_fold_notes_verdict():
    s = build_scenario("pathological_fold")
    assert not s.admissibility.verdict
    assert "admissibility verdict False" in s.provenance_notes
    assert "normal-property failures" in s.provenance_notes


def test_concentric_sphere_oracle():
    s = build_scenario("concentric_sphere", {"rho": 2.0})
    c = project_to_core(s.core, directions(3, 100))
    np.testing.assert_allclose(s.oracle.thickness(c), 1.0)
    np.testing.assert_allclose(thickness(s.core, s.outer, c).thickness, 1.0, atol=1e-14)


def test_circle_cosine_default_is_amplitude_point_one():
    s = build_scenario("perturbed_circle_cosine")
    th = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    c = np.stack([np.cos(th), np.sin(th)], axis=1)
    np.testing.assert_allclose(s.oracle.thickness(c), oracles.cosine_circle_d(th), atol=1e-15)
    assert "0.5 + 0.1 cos(theta)" in s.provenance_notes


def test_circle_cosine_eps_convention():
    # eps multiplies rho: d = rho (1 + eps cos) - 1
    a = build_scenario("perturbed_circle_cosine", {"rho": 1.5, "eps": 0.1})
    b = build_scenario("perturbed_circle_cosine", {"rho": 1.5, "amplitude": 0.15})
    c = np.array([[1.0, 0.0]])
    assert a.oracle.thickness(c)[0] == pytest.approx(0.65)
    assert b.oracle.thickness(c)[0] == pytest.approx(0.65)
    with pytest.raises(ScenarioError):
        build_scenario("perturbed_circle_cosine", {"amplitude": 0.1, "eps": 0.5})


@pytest.mark.parametrize("name", ["perturbed_sphere_height", "perturbed_sphere_single_bump", "perturbed_sphere_two_bumps"])
def test_sphere_oracle_gradient_is_tangent(name):
    s = build_scenario(name)
    c = project_to_core(s.core, directions(3, 50))
    g = s.oracle.gradient(c)
    np.testing.assert_allclose(np.sum(g * c, axis=1), 0.0, atol=1e-15)


def test_known_critical_points_listed():
    s = build_scenario("perturbed_sphere_height")
    kinds = {k for _, k in s.oracle.critical_points}
    assert kinds == {"max", "min"}


def test_unknown_scenario():
    with pytest.raises(ScenarioError, match="unknown scenario"):
        build_scenario("flat_torus")


def test_bad_parameter_name():
    with pytest.raises(ScenarioError, match="bad parameters"):
        build_scenario("concentric_circle", {"radius": 3})


def test_inadmissible_parameters_rejected():
    # a core that pokes out of Omega
    with pytest.raises(ScenarioError):
        build_scenario("perturbed_circle_cosine", {"rho": 1.05, "amplitude": 0.2})


def test_custom_ellipse_in_ball():
    s = build_scenario("custom", {"shape": "ellipse", "semi_axes": (1.2, 0.8), "outer": "ellipsoid",
                                   "outer_axes": (2.5, 2.5), "outer_center": (0.1, 0.0)})
    assert isinstance(s.core, ConvexCore) and s.admissibility.verdict
    c = np.array([1.2, 0.0])
    assert thickness(s.core, s.outer, c).thickness == pytest.approx(
        oracles.ball_thickness((1.2, 0.8), (0.1, 0.0), 2.5, c), abs=1e-12
    )


def test_custom_profile_from_dict():
    s = build_scenario("custom", {"shape": "sphere", "semi_axes": (1.0, 1.0, 1.0), "rho": 1.5, "eps": 0.05,
                                   "profile": {"kind": "axis_cosine", "axis": 1, "amplitude": 1.0}})
    assert s.describe()["outer"]["profile"]["axis"] == 1


def test_scenarios_are_immutable():
    s = build_scenario("concentric_circle")
    with pytest.raises(Exception):
        s.name = "other"
