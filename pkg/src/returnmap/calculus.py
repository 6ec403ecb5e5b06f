"""Finite-difference gradient, Hessian and return-map Jacobian on the core boundary.

Probes ``c +- h t_i`` are pulled back to the core with the centroid-ray
projection.  The realised step is half the arc between the two retracted
probes: the chord is stretched by the angle between the probe normals, which
is exact on circles and spheres and third-order accurate on ellipsoids.  A bare
chord cancels the third-derivative term for cosine-like profiles and hides the
second-order behaviour of the central difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NormalPropertyViolation, OuterBoundaryNotReached
from .geometry import (
    ConvexCore,
    OuterDomain,
    TangentFrame,
    _check_on_core,
    _normals,
    project_to_core,
    tangent_frames,
)
from .maps import return_values, thickness_values

H_GRAD = 1e-5
H_HESS = 1e-3
H_JAC = 1e-4

__all__ = [
    "H_GRAD",
    "H_HESS",
    "H_JAC",
    "TangentVector",
    "TangentMatrix",
    "tangential_gradient",
    "tangential_hessian",
    "numerical_jacobian_F",
    "gradient_values",
    "hessian_values",
    "jacobian_values",
    "symmetric_eigenvalues",
    "eigenvalues_2x2",
]


@dataclass(frozen=True)
class TangentVector:
    frame: TangentFrame
    coefficients: np.ndarray

    @property
    def ambient(self) -> np.ndarray:
        return self.frame.embed(self.coefficients)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


@dataclass(frozen=True)
class TangentMatrix:
    frame: TangentFrame
    entries: np.ndarray
    asymmetry: float = 0.0  # ||M - M^T|| before symmetrisation (Hessians only)


def _probes(core: ConvexCore, c: np.ndarray, tangents: np.ndarray, h: float):
    """Retracted probes of shape (n, m, 2, dim) and realised half-steps (n, m)."""
    signs = np.array([1.0, -1.0])
    raw = c[:, None, None, :] + h * signs[None, None, :, None] * tangents[:, :, None, :]
    p = project_to_core(core, raw)
    chord = np.linalg.norm(p[:, :, 0] - p[:, :, 1], axis=-1)
    nu = _normals(core, p)
    cos_turn = np.clip(np.sum(nu[:, :, 0] * nu[:, :, 1], axis=-1), -1.0, 1.0)
    half_turn = 0.5 * np.arccos(cos_turn)
    stretch = np.ones_like(half_turn)
    bent = half_turn > 0
    stretch[bent] = half_turn[bent] / np.sin(half_turn[bent])
    return p, 0.5 * chord * stretch


def _frames(core, c, tangents):
    if tangents is None:
        _, tangents = tangent_frames(core, c, check=False)
    return tangents


def gradient_values(core: ConvexCore, outer: OuterDomain, c: np.ndarray, h: float = None, tangents=None):
    """Batch tangential gradient.  Returns ``(coefficients (n, m), tangents (n, m, dim), ok)``."""
    h = H_GRAD * core.scale if h is None else h
    tangents = _frames(core, c, tangents)
    p, hp = _probes(core, c, tangents, h)
    n, m = hp.shape
    d, ok = thickness_values(core, outer, p.reshape(-1, c.shape[-1]))
    d = d.reshape(n, m, 2)
    coeffs = (d[..., 0] - d[..., 1]) / (2.0 * hp)
    return coeffs, tangents, ok.reshape(n, m * 2).all(axis=1)


def hessian_values(
    core: ConvexCore, outer: OuterDomain, c: np.ndarray, h: float = None, h_grad: float = None, tangents=None
):
    """Batch tangential Hessian from central differences of the ambient gradient.

    Returns ``(symmetrised (n, m, m), raw (n, m, m), ok)``.
    """
    h = H_HESS * core.scale if h is None else h
    tangents = _frames(core, c, tangents)
    p, hp = _probes(core, c, tangents, h)
    n, m, _, dim = p.shape
    flat = p.reshape(-1, dim)
    coeffs, probe_tangents, ok = gradient_values(core, outer, flat, h_grad)
    ambient = np.einsum("km,kmd->kd", coeffs, probe_tangents).reshape(n, m, 2, dim)
    diff = (ambient[:, :, 0] - ambient[:, :, 1]) / (2.0 * hp[..., None])  # (n, j, dim)
    raw = np.einsum("nid,njd->nij", tangents, diff)
    sym = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    return sym, raw, ok.reshape(n, m * 2).all(axis=1)


def _carry(tangents: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotate tangents by the smallest rotation taking unit normal ``a`` to ``b``."""
    cos = np.sum(a * b, axis=-1)[:, None, None]
    if a.shape[-1] == 2:
        # 2D: rotation by the signed angle between the normals
        sin = (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])[:, None, None]
        perp = np.stack([-tangents[..., 1], tangents[..., 0]], axis=-1)
        return cos * tangents + sin * perp
    v = np.cross(a, b)[:, None, :]
    vt = np.cross(v, tangents)
    return tangents + vt + np.cross(v, vt) / (1.0 + cos)


def jacobian_values(core: ConvexCore, outer: OuterDomain, c: np.ndarray, h: float = None, tangents=None):
    """Batch Jacobian of F; returns ``(J (n, m, m), ok)``.

    Columns are derivatives along the frame at ``c``; rows are components in
    that frame carried to ``F(c)`` by the smallest rotation between the two
    normals.  At a fixed point both frames coincide.
    """
    h = H_JAC * core.scale if h is None else h
    tangents = _frames(core, c, tangents)
    p, hp = _probes(core, c, tangents, h)
    n, m, _, dim = p.shape
    Fp, ok = return_values(core, outer, p.reshape(-1, dim))
    Fc, ok_c = return_values(core, outer, c)
    ok = ok.reshape(n, m * 2).all(axis=1) & ok_c
    Fp = Fp.reshape(n, m, 2, dim)
    diff = (Fp[:, :, 0] - Fp[:, :, 1]) / (2.0 * hp[..., None])
    out_t = tangents
    if ok.any():
        out_t = tangents.copy()
        out_t[ok] = _carry(tangents[ok], _normals(core, c[ok]), _normals(core, Fc[ok]))
    J = np.einsum("nid,njd->nij", out_t, diff)
    return J, ok


def _single_frame(core, c, frame):
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise ValueError("expected a single core point")
    _check_on_core(core, c)
    if frame is None:
        n, t = tangent_frames(core, c)
        frame = TangentFrame(c.copy(), n, t)
    return c, frame


def tangential_gradient(
    core: ConvexCore, outer: OuterDomain, c, h: float = None, frame: TangentFrame = None
) -> TangentVector:
    c, frame = _single_frame(core, c, frame)
    coeffs, _, ok = gradient_values(core, outer, c[None], h, frame.tangents[None])
    if not ok[0]:
        raise OuterBoundaryNotReached(c)
    return TangentVector(frame, coeffs[0])


def tangential_hessian(
    core: ConvexCore, outer: OuterDomain, c, h: float = None, frame: TangentFrame = None
) -> TangentMatrix:
    c, frame = _single_frame(core, c, frame)
    sym, raw, ok = hessian_values(core, outer, c[None], h, tangents=frame.tangents[None])
    if not ok[0]:
        raise OuterBoundaryNotReached(c)
    return TangentMatrix(frame, sym[0], float(np.linalg.norm(raw[0] - raw[0].T)))


def numerical_jacobian_F(
    core: ConvexCore, outer: OuterDomain, c, h: float = None, frame: TangentFrame = None
) -> TangentMatrix:
    c, frame = _single_frame(core, c, frame)
    J, ok = jacobian_values(core, outer, c[None], h, frame.tangents[None])
    if not ok[0]:
        raise NormalPropertyViolation(c)
    return TangentMatrix(frame, J[0])


def symmetric_eigenvalues(M) -> np.ndarray:
    """Ascending eigenvalues of symmetric 1x1 or 2x2 matrices (batched on leading axes)."""
    M = np.asarray(M, dtype=float)
    if M.shape[-1] == 1:
        return M[..., 0, :].copy()
    a, b, d = M[..., 0, 0], 0.5 * (M[..., 0, 1] + M[..., 1, 0]), M[..., 1, 1]
    mean = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    return np.stack([mean - rad, mean + rad], axis=-1)


def eigenvalues_2x2(M) -> np.ndarray:
    """Eigenvalues of general 1x1 or 2x2 matrices via the characteristic polynomial.

    Complex pairs are returned when the discriminant is negative.
    """
    M = np.asarray(M, dtype=float)
    if M.shape[-1] == 1:
        return M[..., 0, :].astype(complex)
    tr = M[..., 0, 0] + M[..., 1, 1]
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    disc = np.sqrt((0.25 * tr * tr - det).astype(complex))
    return np.stack([0.5 * tr - disc, 0.5 * tr + disc], axis=-1)
