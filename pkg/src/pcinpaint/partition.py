"""Octant partitioning with overlap bands and stochastic region removal.

The eight regions are the octants cut by the coordinate planes of the
canonical frame. Region index i is a 3-bit code: bit0 set when x >= 0,
bit1 when y >= 0, bit2 when z >= 0. A point within `overlap` of a plane
joins both octants along that axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud, resample
from .errors import AllRemoved
from .rng import make_rng

N_REGIONS = 8


@dataclass(frozen=True)
class PartitionConfig:
    overlap: float = 0.02
    presence_threshold: int = 4
    removal_prob: float = 0.20
    seed: int = 0

    def __post_init__(self):
        if self.overlap < 0:
            raise ValueError("overlap must be >= 0")
        if self.presence_threshold < 1:
            raise ValueError("presence_threshold must be positive")
        if not 0.0 <= self.removal_prob <= 1.0:
            raise ValueError("removal_prob must be in [0, 1]")


@dataclass(frozen=True)
class RegionPartition:
    """Assignment of point indices to the 8 octant regions.

    present[i] marks regions holding at least the presence threshold of
    points; kept[i] marks present regions that survived random removal.
    """

    regions: tuple
    present: np.ndarray
    kept: np.ndarray

    def memberships(self, n_points: int) -> np.ndarray:
        """Boolean (n_points, 8) membership matrix."""
        mask = np.zeros((n_points, N_REGIONS), dtype=bool)
        for i, idx in enumerate(self.regions):
            mask[idx, i] = True
        return mask

    def to_json(self) -> str:
        return json.dumps({
            "regions": [idx.tolist() for idx in self.regions],
            "present": self.present.tolist(),
            "kept": self.kept.tolist(),
        })

    @staticmethod
    def from_json(text: str) -> "RegionPartition":
        doc = json.loads(text)
        return RegionPartition(
            regions=tuple(np.array(idx, dtype=np.intp) for idx in doc["regions"]),
            present=np.array(doc["present"], dtype=bool),
            kept=np.array(doc["kept"], dtype=bool),
        )


def membership_mask(points: np.ndarray, overlap: float) -> np.ndarray:
    """(n, 8) bool: point belongs to octant i when, on every axis, it is
    on octant i's side of the plane or within the overlap band.

    The non-negative side is inclusive (p >= -overlap) and the negative
    side strict (p < overlap), so at overlap 0 each point lands in
    exactly one octant and plane points go to the non-negative side.
    """
    n = points.shape[0]
    mask = np.ones((n, N_REGIONS), dtype=bool)
    for axis in range(3):
        coord = points[:, axis]
        pos_ok = coord >= -overlap
        neg_ok = coord < overlap
        for i in range(N_REGIONS):
            mask[:, i] &= pos_ok if (i >> axis) & 1 else neg_ok
    return mask


def draw_removal(present: np.ndarray, removal_prob: float, seed: int,
                 remove_count: int | None = None) -> np.ndarray:
    """kept flags: independent Bernoulli(1 - removal_prob) per present
    region, or exactly `remove_count` present regions dropped when given."""
    kept = np.zeros(N_REGIONS, dtype=bool)
    rng = make_rng(seed, 0x0C7A)
    present_idx = np.flatnonzero(present)
    if remove_count is None:
        kept[present_idx] = rng.random(present_idx.size) >= removal_prob
    else:
        if remove_count > present_idx.size:
            raise ValueError(
                f"cannot remove {remove_count} of {present_idx.size} present regions")
        dropped = rng.choice(present_idx, size=remove_count, replace=False)
        kept[present_idx] = True
        kept[dropped] = False
    return kept


def partition(cloud: PointCloud, cfg: PartitionConfig,
              remove_count: int | None = None) -> RegionPartition:
    """Partition a canonicalized cloud into octant regions and draw the
    removal mask. Indices within each region keep input order."""
    mask = membership_mask(cloud.points, cfg.overlap)
    regions = tuple(np.flatnonzero(mask[:, i]) for i in range(N_REGIONS))
    present = np.array([idx.size >= cfg.presence_threshold for idx in regions])
    kept = draw_removal(present, cfg.removal_prob, cfg.seed, remove_count)
    return RegionPartition(regions=regions, present=present, kept=kept)


def synthetic_occlude(cloud: PointCloud, part: RegionPartition) -> PointCloud:
    """Drop every point whose region memberships were all removed.

    A point in an overlap band survives if any of its regions is kept.
    Raises AllRemoved when nothing survives; the caller redraws with the
    next seed.
    """
    if not part.kept.any():
        raise AllRemoved("all regions dropped; redraw the removal mask")
    keep_point = np.zeros(len(cloud), dtype=bool)
    for i in np.flatnonzero(part.kept):
        keep_point[part.regions[i]] = True
    if not keep_point.any():
        raise AllRemoved("no point survived region removal")
    return PointCloud(cloud.points[keep_point])


def region_points(cloud: PointCloud, part: RegionPartition, i: int) -> PointCloud:
    """Points of region i in input order (possibly empty)."""
    return PointCloud(cloud.points[part.regions[i]])


def pad_region(region: PointCloud, n: int, presence_threshold: int = 4,
               seed: int = 0) -> PointCloud:
    """Fixed-size local-encoder input for one region.

    Regions below the presence threshold are replaced by zero points;
    others are resampled to exactly n points.
    """
    if len(region) < presence_threshold:
        return PointCloud(np.zeros((n, 3)))
    return resample(region, n, seed)
