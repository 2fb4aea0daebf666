"""Training losses: the asymmetric weighted Chamfer distance and its
global, local, and multi-view variants.

The first cloud of every loss is pseudo-ground-truth: gradients flow
only into the prediction side. Unsquared Euclidean norms throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, constant
from .cloud import PointCloud
from .errors import EmptyCloud
from .neighbors import nearest_neighbors
from .partition import N_REGIONS, region_points


@dataclass(frozen=True)
class LossConfig:
    beta: float = 0.25
    views: int = 4

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.views < 1:
            raise ValueError("views must be positive")


@dataclass(frozen=True)
class LossReport:
    global_term: float
    local_term: float
    total: float
    per_region: tuple

    def to_json(self) -> str:
        return json.dumps({
            "global_term": self.global_term,
            "local_term": self.local_term,
            "total": self.total,
            "per_region": list(self.per_region),
        })


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    return np.asarray(cloud, dtype=np.float64)


def weighted_chamfer(x, y, beta: float, method: str = "auto") -> Tensor:
    """(1-beta)/|X| * sum_x min_y ||x-y|| + beta/|Y| * sum_y min_x ||y-x||.

    x is constant; y may be a Tensor, in which case gradients flow into
    it through the selected nearest-neighbor pairs (subgradient 0 at
    coincident points).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    xpts = _as_points(x)
    yt = y if isinstance(y, Tensor) else constant(_as_points(y))
    ypts = yt.data
    n, m = len(xpts), len(ypts)
    if n == 0 or m == 0:
        raise EmptyCloud(f"chamfer needs non-empty clouds, got {n} and {m}")

    d_xy, i_xy = nearest_neighbors(xpts, ypts, method)
    d_yx, i_yx = nearest_neighbors(ypts, xpts, method)
    value = (1.0 - beta) * d_xy.mean() + beta * d_yx.mean()

    def back(g):
        g = float(g)
        grad_y = np.zeros_like(ypts)
        if beta < 1.0:
            diff = ypts[i_xy] - xpts
            unit = np.zeros_like(diff)
            hit = d_xy > 0
            unit[hit] = diff[hit] / d_xy[hit, None]
            np.add.at(grad_y, i_xy, (g * (1.0 - beta) / n) * unit)
        if beta > 0.0:
            diff = ypts - xpts[i_yx]
            unit = np.zeros_like(diff)
            hit = d_yx > 0
            unit[hit] = diff[hit] / d_yx[hit, None]
            grad_y += (g * beta / m) * unit
        yt._accum(grad_y)

    return Tensor._node(value, (yt,), back)


def inpainting_global_loss(x, y_global, beta: float) -> Tensor:
    """Weighted Chamfer between the original partial cloud and the
    global decoder output."""
    return weighted_chamfer(x, y_global, beta)


def inpainting_local_loss(x_regions, present, y_regions, beta: float) -> Tensor:
    """Sum of per-region weighted Chamfer terms over present regions.

    Absent regions contribute exactly zero and build no graph, so their
    outputs receive no gradient at all.
    """
    total = None
    for i in range(N_REGIONS):
        if not present[i]:
            continue
        term = weighted_chamfer(x_regions[i], y_regions[i], beta)
        total = term if total is None else total + term
    return total if total is not None else constant(0.0)


def multiview_loss(views, y_global, y_regions, beta: float) -> tuple[Tensor, LossReport]:
    """Consistency loss of one view's completion against all views.

    views is a sequence of (PointCloud, RegionPartition) pairs; region
    presence is evaluated per view. Returns the differentiable total and
    a float report with per-region local sums.
    """
    if not views:
        raise EmptyCloud("multiview_loss needs at least one view")
    global_total = None
    local_total = None
    per_region = [0.0] * N_REGIONS
    for view_cloud, view_part in views:
        term = weighted_chamfer(view_cloud, y_global, beta)
        global_total = term if global_total is None else global_total + term
        for i in range(N_REGIONS):
            if not view_part.present[i]:
                continue
            x_i = region_points(view_cloud, view_part, i)
            local = weighted_chamfer(x_i, y_regions[i], beta)
            per_region[i] += local.item()
            local_total = local if local_total is None else local_total + local
    if local_total is None:
        local_total = constant(0.0)
    total = global_total + local_total
    report = LossReport(
        global_term=global_total.item(),
        local_term=local_total.item(),
        total=total.item(),
        per_region=tuple(per_region),
    )
    return total, report
