"""Nearest-neighbor search over 3D points.

Two interchangeable paths: plain O(n*m) brute force and a k-d index
(used automatically once the reference cloud has at least 64 points).
Queries are sequential and ties resolve to the lowest reference index
in the brute path, so results are reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

BRUTE_LIMIT = 64


def _nn_brute(query: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((query[:, None, :] - ref[None, :, :]) ** 2).sum(axis=-1)
    idx = d2.argmin(axis=1)
    dist = np.sqrt(d2[np.arange(len(query)), idx])
    return dist, idx


def _nn_kdtree(query: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dist, idx = cKDTree(ref).query(query, k=1, workers=1)
    return np.atleast_1d(dist), np.atleast_1d(idx)


def nearest_neighbors(query: np.ndarray, ref: np.ndarray,
                      method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Per-query nearest reference point: (distances, indices)."""
    query = np.asarray(query, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if method == "auto":
        method = "brute" if len(ref) < BRUTE_LIMIT else "kdtree"
    if method == "brute":
        return _nn_brute(query, ref)
    if method == "kdtree":
        return _nn_kdtree(query, ref)
    raise ValueError(f"unknown method {method!r}")


def k_nearest_excluding_self(points: np.ndarray, k: int) -> np.ndarray:
    """Indices (n, k) of each point's k nearest other points."""
    points = np.asarray(points, dtype=np.float64)
    _, idx = cKDTree(points).query(points, k=k + 1, workers=1)
    out = np.empty((len(points), k), dtype=np.intp)
    for row in range(len(points)):
        neighbors = idx[row][idx[row] != row]
        out[row] = neighbors[:k]
    return out
