"""Deterministic direction sets and grids on circles and spheres."""

from __future__ import annotations

import numpy as np

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def circle_directions(n: int, offset: float = 0.0) -> np.ndarray:
    """``n`` uniformly spaced unit vectors at angles ``2 pi (k + offset) / n``."""
    theta = 2.0 * np.pi * (np.arange(n) + offset) / n
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Fibonacci lattice of ``n`` nearly uniform unit vectors on S^2."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = GOLDEN_ANGLE * np.arange(n)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def directions(dim: int, n: int) -> np.ndarray:
    if dim == 2:
        return circle_directions(n)
    if dim == 3:
        return fibonacci_sphere(n)
    raise ValueError(f"unsupported dimension {dim}")


def equirectangular_grid(n_lat: int, n_lon: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cell-centre directions of an ``n_lat x n_lon`` latitude/longitude grid.

    Returns ``(directions (n_lat*n_lon, 3), lat, lon)``; rows run north to south.
    """
    lat = np.pi / 2 - np.pi * (np.arange(n_lat) + 0.5) / n_lat
    lon = -np.pi + 2.0 * np.pi * (np.arange(n_lon) + 0.5) / n_lon
    la, lo = np.meshgrid(lat, lon, indexing="ij")
    w = np.stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)], axis=-1)
    return w.reshape(-1, 3), lat, lon


def angle_of(points: np.ndarray) -> np.ndarray:
    """Polar angle in [0, 2 pi) of 2D points."""
    p = np.asarray(points)
    return np.mod(np.arctan2(p[..., 1], p[..., 0]), 2.0 * np.pi)


def lat_lon_of(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points)
    r = np.linalg.norm(p, axis=-1)
    return np.arcsin(np.clip(p[..., 2] / r, -1.0, 1.0)), np.arctan2(p[..., 1], p[..., 0])
