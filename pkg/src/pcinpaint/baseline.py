"""Densification baseline: approximate the local surface around every
input point by the eigen-ellipsoid of its 10 nearest neighbors and
sample uniformly inside. Adds density without completing occlusions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, resample
from .errors import TooFewPoints
from .neighbors import k_nearest_excluding_self
from .rng import make_rng

N_NEIGHBORS = 10
RADIUS_FLOOR = 1e-9


@dataclass(frozen=True)
class EllipsoidSpec:
    """Local surface model: center, orthonormal axes, radii sorted
    descending (square roots of neighborhood covariance eigenvalues)."""

    center: np.ndarray
    axes: np.ndarray    # rows are the axis directions
    radii: np.ndarray

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        local = (points - self.center) @ self.axes.T
        return (np.linalg.norm(local / self.radii, axis=-1) <= 1.0 + tol)


def local_ellipsoid(points: np.ndarray, neighbor_idx: np.ndarray) -> EllipsoidSpec:
    neighbors = points[neighbor_idx]
    center = neighbors.mean(axis=0)
    centered = neighbors - center
    cov = centered.T @ centered / len(neighbors)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    radii = np.sqrt(np.maximum(eigvals[order], 0.0))
    radii = np.maximum(radii, RADIUS_FLOOR)
    return EllipsoidSpec(center=center, axes=eigvecs[:, order].T, radii=radii)


def sample_in_ellipsoid(spec: EllipsoidSpec, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Uniform samples inside the ellipsoid volume: uniform ball points
    mapped through the axes and radii."""
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random(n) ** (1.0 / 3.0)
    ball = direction * radius[:, None]
    return spec.center + (ball * spec.radii) @ spec.axes


def densify(cloud: PointCloud, points_per_seed: int, seed: int,
            target: int | None = None) -> PointCloud:
    """Sample points_per_seed points inside each input point's local
    eigen-ellipsoid; optionally resample the concatenation to target."""
    if len(cloud) < N_NEIGHBORS + 1:
        raise TooFewPoints(
            f"densify needs at least {N_NEIGHBORS + 1} points, got {len(cloud)}")
    if points_per_seed < 1:
        raise ValueError("points_per_seed must be positive")
    pts = cloud.points
    neighbor_idx = k_nearest_excluding_self(pts, N_NEIGHBORS)
    chunks = []
    for i in range(len(pts)):
        spec = local_ellipsoid(pts, neighbor_idx[i])
        rng = make_rng(seed, 0xDE45, i)
        chunks.append(sample_in_ellipsoid(spec, points_per_seed, rng))
    dense = PointCloud(np.concatenate(chunks, axis=0))
    if target is not None:
        dense = resample(dense, target, seed)
    return dense
