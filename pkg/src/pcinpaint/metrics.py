"""Evaluation-only metric suite.

Chamfer components (precision / coverage), exact Earth Mover's distance
via optimal assignment, F-score at a distance threshold, a uniformity
statistic, and the observed/unobserved split of a completion against
its input view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .errors import CapExceeded, EmptyCloud, SizeMismatch
from .neighbors import nearest_neighbors

DEFAULT_EMD_CAP = 1024
DEFAULT_UNIFORMITY_P = (0.4, 0.6, 0.8, 1.0, 1.2)


def _require_points(*clouds: PointCloud) -> None:
    for c in clouds:
        if len(c) == 0:
            raise EmptyCloud("metric requires non-empty clouds")


def eval_cd(pred: PointCloud, gt: PointCloud) -> tuple[float, float, float]:
    """(cd, precision, coverage): precision is the mean distance from
    each predicted point to its nearest true point, coverage the
    reverse, cd their equal-weight mean."""
    _require_points(pred, gt)
    d_pg, _ = nearest_neighbors(pred.points, gt.points)
    d_gp, _ = nearest_neighbors(gt.points, pred.points)
    precision = float(d_pg.mean())
    coverage = float(d_gp.mean())
    return 0.5 * precision + 0.5 * coverage, precision, coverage


def eval_emd(pred: PointCloud, gt: PointCloud, cap: int = DEFAULT_EMD_CAP) -> float:
    """Minimum mean pairwise distance over bijections, solved exactly.

    Clouds must already be resampled to a common size <= cap.
    """
    _require_points(pred, gt)
    if len(pred) != len(gt):
        raise SizeMismatch(f"EMD needs equal sizes, got {len(pred)} vs {len(gt)}")
    if len(pred) > cap:
        raise CapExceeded(f"{len(pred)} points exceeds exact-EMD cap {cap}")
    cost = np.sqrt(((pred.points[:, None, :] - gt.points[None, :, :]) ** 2).sum(-1))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def eval_fscore(pred: PointCloud, gt: PointCloud, d: float | None = None) -> float:
    """F-score at threshold d (default 1% of the prediction's longest
    bounding-box edge)."""
    _require_points(pred, gt)
    if d is None:
        lo, hi = pred.bounds()
        d = 0.01 * float((hi - lo).max())
    if d <= 0:
        raise ValueError("threshold d must be positive")
    d_pg, _ = nearest_neighbors(pred.points, gt.points)
    d_gp, _ = nearest_neighbors(gt.points, pred.points)
    p = float((d_pg <= d).mean())
    r = float((d_gp <= d).mean())
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def farthest_point_sample(points: np.ndarray, m: int) -> np.ndarray:
    """Indices of m points chosen greedily for maximal spread, starting
    from index 0; deterministic."""
    n = len(points)
    m = min(m, n)
    chosen = np.empty(m, dtype=np.intp)
    chosen[0] = 0
    dist = np.linalg.norm(points - points[0], axis=1)
    for k in range(1, m):
        chosen[k] = int(dist.argmax())
        dist = np.minimum(dist, np.linalg.norm(points - points[chosen[k]], axis=1))
    return chosen


def eval_uniformity(pred: PointCloud,
                    p_values: tuple = DEFAULT_UNIFORMITY_P) -> dict:
    """Normalized variance of neighbor counts in disks covering p% of a
    bounding-box surface-area proxy; lower is more uniform.

    For each p: 1000 seed points are placed by farthest-point sampling,
    neighbors (seed included) are counted within radius sqrt(p*A/pi)
    where A is the bbox surface area, and the result is
    mean((count - expected)^2) / expected^2 with expected = |pred| * p.
    """
    _require_points(pred)
    if len(pred) == 1:
        return {p: 0.0 for p in p_values}
    pts = pred.points
    lo, hi = pred.bounds()
    ex, ey, ez = hi - lo
    area = 2.0 * (ex * ey + ey * ez + ez * ex)
    seeds = farthest_point_sample(pts, 1000)
    tree = cKDTree(pts)
    out = {}
    for p in p_values:
        frac = p / 100.0
        radius = math.sqrt(frac * area / math.pi)
        counts = tree.query_ball_point(pts[seeds], radius, return_length=True, workers=1)
        expected = len(pred) * frac
        out[p] = float(((counts - expected) ** 2).mean() / expected ** 2)
    return out


def split_observed(pred: PointCloud, input_partial: PointCloud) -> tuple[np.ndarray, np.ndarray]:
    """Partition prediction indices into (observed, unobserved) by
    nearest-neighbor distance to the input view: unobserved points lie
    more than one standard deviation above the mean distance."""
    _require_points(pred, input_partial)
    dist, _ = nearest_neighbors(pred.points, input_partial.points)
    threshold = dist.mean() + dist.std()
    unobserved = np.flatnonzero(dist > threshold)
    observed = np.flatnonzero(dist <= threshold)
    return observed, unobserved


@dataclass(frozen=True)
class EvalReport:
    cd: float
    precision: float
    coverage: float
    emd: float | None
    fscore_1pct: float
    uniformity: dict = field(default_factory=dict)
    obs_precision: float = math.nan
    unobs_precision: float = math.nan
    obs_coverage: float = math.nan
    unobs_coverage: float = math.nan

    def columns(self) -> list[str]:
        cols = ["cd", "precision", "coverage", "emd", "fscore_1pct",
                "obs_precision", "unobs_precision", "obs_coverage", "unobs_coverage"]
        cols += [f"uniformity@{p}" for p in sorted(self.uniformity)]
        return cols

    def values(self) -> list[float]:
        vals = [self.cd, self.precision, self.coverage,
                math.nan if self.emd is None else self.emd,
                self.fscore_1pct, self.obs_precision, self.unobs_precision,
                self.obs_coverage, self.unobs_coverage]
        vals += [self.uniformity[p] for p in sorted(self.uniformity)]
        return vals

    def to_json(self) -> str:
        doc = {k: (None if isinstance(v, float) and math.isnan(v) else v)
               for k, v in zip(self.columns(), self.values())}
        return json.dumps(doc)


def evaluate_completion(pred: PointCloud, gt: PointCloud,
                        input_partial: PointCloud | None = None,
                        emd_points: int | None = 512,
                        uniformity_p: tuple = DEFAULT_UNIFORMITY_P,
                        seed: int = 0) -> EvalReport:
    """Full metric report for one completion against its ground truth.

    EMD is computed on a common resampling of emd_points (skipped when
    None); the observed/unobserved split needs the input view.
    """
    from .cloud import resample

    cd, precision, coverage = eval_cd(pred, gt)
    emd = None
    if emd_points is not None:
        n = min(emd_points, DEFAULT_EMD_CAP)
        emd = eval_emd(resample(pred, n, seed), resample(gt, n, seed + 1))
    fscore = eval_fscore(pred, gt)
    uniformity = eval_uniformity(pred, uniformity_p)

    obs_p = unobs_p = obs_c = unobs_c = math.nan
    if input_partial is not None and len(input_partial) > 0:
        observed, unobserved = split_observed(pred, input_partial)
        d_pg, _ = nearest_neighbors(pred.points, gt.points)
        if observed.size:
            obs_p = float(d_pg[observed].mean())
            d_go, _ = nearest_neighbors(gt.points, pred.points[observed])
            obs_c = float(d_go.mean())
        if unobserved.size:
            unobs_p = float(d_pg[unobserved].mean())
            d_gu, _ = nearest_neighbors(gt.points, pred.points[unobserved])
            unobs_c = float(d_gu.mean())
    return EvalReport(cd=cd, precision=precision, coverage=coverage, emd=emd,
                      fscore_1pct=fscore, uniformity=uniformity,
                      obs_precision=obs_p, unobs_precision=unobs_p,
                      obs_coverage=obs_c, unobs_coverage=unobs_c)
