import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from returnmap.calculus import (
    eigenvalues_2x2,
    gradient_values,
    numerical_jacobian_F,
    symmetric_eigenvalues,
    tangential_gradient,
    tangential_hessian,
)
from returnmap.errors import OffSurfaceError
from returnmap.geometry import project_to_core, tangent_frame
from returnmap.sampling import circle_directions

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)
entries = st.floats(-5, 5, allow_nan=False)


def on_circle(theta):
    return np.array([np.cos(theta), np.sin(theta)])


@given(angles)
def test_gradient_matches_closed_form_on_circle(scenario, theta):
    s = scenario("perturbed_circle_cosine")
    g = tangential_gradient(s.core, s.outer, on_circle(theta))
    assert g.coefficients[0] == pytest.approx(oracles.cosine_circle_dprime(theta), abs=1e-9)


@given(st.floats(0.05, np.pi - 0.05), angles)
def test_gradient_of_height_function_on_sphere(scenario, u, v):
    s = scenario("perturbed_sphere_height")
    c = oracles.sphere_point(u, v)
    g = tangential_gradient(s.core, s.outer, c)
    # d = rho (1 + eps z) - 1, grad_S z = e_z - z c
    exact = 1.4 * 0.05 * (np.array([0.0, 0.0, 1.0]) - c[2] * c)
    np.testing.assert_allclose(g.ambient, exact, atol=1e-9)


def test_gradient_is_second_order(scenario):
    s = scenario("perturbed_circle_cosine")
    c = project_to_core(s.core, circle_directions(16, 0.3))
    errs = []
    for h in (2e-3, 1e-3):
        coeffs, _, _ = gradient_values(s.core, s.outer, c, h)
        th = np.arctan2(c[:, 1], c[:, 0])
        errs.append(np.max(np.abs(coeffs[:, 0] - oracles.cosine_circle_dprime(th))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


@given(angles)
def test_hessian_matches_closed_form_on_circle(scenario, theta):
    s = scenario("perturbed_circle_cosine")
    H = tangential_hessian(s.core, s.outer, on_circle(theta))
    assert H.entries[0, 0] == pytest.approx(oracles.cosine_circle_d2(theta), abs=1e-6)


@pytest.mark.parametrize("pole, sign", [((0, 0, 1), -1.0), ((0, 0, -1), 1.0)])
def test_hessian_of_height_function_at_poles(scenario, pole, sign):
    s = scenario("perturbed_sphere_height")
    H = tangential_hessian(s.core, s.outer, np.array(pole, dtype=float))
    # Hess_S z = -z I at the poles
    np.testing.assert_allclose(H.entries, sign * 1.4 * 0.05 * np.eye(2), atol=1e-6)
    assert H.asymmetry < 1e-5


def test_hessian_at_bump_minimum(scenario):
    s = scenario("perturbed_sphere_single_bump")
    H = tangential_hessian(s.core, s.outer, np.array([0.0, 0.0, 1.0]))
    # f = -exp(-kappa |w - N|^2) ~ -1 + kappa s^2 near N, so Hess d = 2 kappa rho eps I
    np.testing.assert_allclose(H.entries, 2 * 1.0 * 1.4 * 0.05 * np.eye(2), atol=1e-6)


@pytest.mark.parametrize("theta", [0.0, np.pi, 0.4, 2.0, 4.5])
def test_jacobian_matches_mpmath_oracle_on_circle(scenario, theta):
    s = scenario("perturbed_circle_cosine")
    J = numerical_jacobian_F(s.core, s.outer, on_circle(theta))
    assert J.entries[0, 0] == pytest.approx(oracles.circle_DF(theta, oracles.cosine_curve()), abs=1e-7)


def test_jacobian_at_fixed_point_matches_mpmath_oracle_on_sphere(scenario):
    s = scenario("perturbed_sphere_single_bump", center=(1.0, 0.0, 0.0))
    c = oracles.sphere_point(np.pi / 2, 0.0)
    fr = tangent_frame(s.core, c)
    J = numerical_jacobian_F(s.core, s.outer, c, frame=fr)
    dF = oracles.sphere_dF(c, fr.tangents, oracles.bump_radius(center=(1.0, 0.0, 0.0)))
    np.testing.assert_allclose(J.entries, fr.tangents @ dF, atol=1e-7)


@pytest.mark.parametrize("u, v", [(0.7, 0.3), (2.1, -2.5), (1.3, 2.0)])
def test_jacobian_metric_matches_mpmath_oracle_on_sphere(scenario, u, v):
    # away from fixed points the output frame is a choice; J^T J is not
    s = scenario("perturbed_sphere_single_bump", center=(1.0, 0.0, 0.0))
    c = oracles.sphere_point(u, v)
    fr = tangent_frame(s.core, c)
    J = numerical_jacobian_F(s.core, s.outer, c, frame=fr).entries
    dF = oracles.sphere_dF(c, fr.tangents, oracles.bump_radius(center=(1.0, 0.0, 0.0)))
    np.testing.assert_allclose(J.T @ J, dF.T @ dF, atol=1e-7)


def test_jacobian_of_concentric_map_is_identity(scenario):
    s = scenario("concentric_sphere")
    J = numerical_jacobian_F(s.core, s.outer, np.array([0.0, 0.6, 0.8]))
    np.testing.assert_allclose(J.entries, np.eye(2), atol=1e-9)


def test_off_surface_point_rejected(scenario):
    s = scenario("perturbed_circle_cosine")
    with pytest.raises(OffSurfaceError):
        tangential_gradient(s.core, s.outer, np.array([2.0, 0.0]))


@given(entries, entries, entries)
def test_symmetric_eigenvalues_match_numpy(a, b, d):
    M = np.array([[a, b], [b, d]])
    np.testing.assert_allclose(symmetric_eigenvalues(M), np.linalg.eigvalsh(M), atol=1e-9)


@given(entries, entries, entries, entries)
def test_general_eigenvalues_match_numpy(a, b, c, d):
    M = np.array([[a, b], [c, d]])
    ours = np.sort_complex(eigenvalues_2x2(M))
    ref = np.sort_complex(np.linalg.eigvals(M).astype(complex))
    np.testing.assert_allclose(np.sort(np.abs(ours)), np.sort(np.abs(ref)), atol=1e-6)
    np.testing.assert_allclose(ours.sum(), a + d, atol=1e-9)


def test_complex_pair_for_rotation():
    ev = eigenvalues_2x2(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(np.sort(ev.imag), [-1.0, 1.0])
    np.testing.assert_allclose(np.abs(ev), 1.0)
