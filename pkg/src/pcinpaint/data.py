"""Procedural multi-view toy datasets.

Stands in for large scan datasets: each instance is a parametric shape
sampled densely for evaluation ground truth, with partial views cut by
a positive-dot-product hemisphere cull from random directions, then
optionally perturbed by pose noise to mimic imperfect canonicalization.
Ground truth is never used for training.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloud import NoiseSpec, PointCloud, apply_pose, load_cloud, resample, sample_pose_noise, save_cloud
from .errors import InvalidSpec
from .rng import make_rng

KNOWN_SHAPES = ("box", "cylinder", "ellipsoid", "composite")


@dataclass(frozen=True)
class DatasetSpec:
    n_instances: int = 20
    shapes: tuple = KNOWN_SHAPES
    views_per_instance: int = 4
    points_per_view: int = 1024
    gt_points: int = 4096
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def __post_init__(self):
        if self.n_instances < 1 or self.views_per_instance < 1:
            raise InvalidSpec("need at least one instance and one view")
        if self.points_per_view < 1 or self.gt_points < 1:
            raise InvalidSpec("point counts must be positive")
        if not self.shapes:
            raise InvalidSpec("no shapes given")
        for s in self.shapes:
            if s not in KNOWN_SHAPES:
                raise InvalidSpec(f"unknown shape {s!r}")
        object.__setattr__(self, "shapes", tuple(self.shapes))


@dataclass(frozen=True)
class ToyInstance:
    name: str
    gt: PointCloud          # dense surface sampling, evaluation only
    views: tuple            # training views
    heldout: PointCloud     # one extra view, never trained on


@dataclass(frozen=True)
class ToyDataset:
    spec: DatasetSpec
    instances: tuple


# -- parametric shapes --------------------------------------------------------

@dataclass(frozen=True)
class ShapeParams:
    kind: str
    values: tuple
    offset: tuple = (0.0, 0.0, 0.0)


def _draw_shape(rng: np.random.Generator, kind: str) -> ShapeParams:
    if kind == "box":
        return ShapeParams("box", tuple(rng.uniform(0.15, 0.5, size=3)))
    if kind == "cylinder":
        return ShapeParams("cylinder", (rng.uniform(0.1, 0.35), rng.uniform(0.2, 0.5)))
    if kind == "ellipsoid":
        return ShapeParams("ellipsoid", tuple(rng.uniform(0.15, 0.5, size=3)))
    if kind == "composite":
        box = ShapeParams("box", tuple(rng.uniform(0.1, 0.3, size=3)),
                          offset=tuple(rng.uniform(-0.2, 0.2, size=3)))
        cyl = ShapeParams("cylinder", (rng.uniform(0.05, 0.2), rng.uniform(0.2, 0.5)))
        return ShapeParams("composite", (box, cyl))
    raise InvalidSpec(f"unknown shape {kind!r}")


def _sample_box(rng: np.random.Generator, n: int, half) -> np.ndarray:
    a, b, c = half
    face_areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b]) * 4.0
    faces = rng.choice(6, size=n, p=face_areas / face_areas.sum())
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    for f in range(6):
        sel = faces == f
        axis = f // 2
        sign = 1.0 if f % 2 == 0 else -1.0
        others = [i for i in range(3) if i != axis]
        pts[sel, axis] = sign * half[axis]
        pts[sel, others[0]] = u[sel, 0] * half[others[0]]
        pts[sel, others[1]] = u[sel, 1] * half[others[1]]
    return pts


def _sample_cylinder(rng: np.random.Generator, n: int, radius: float,
                     half_height: float) -> np.ndarray:
    lateral = 2.0 * np.pi * radius * 2.0 * half_height
    caps = 2.0 * np.pi * radius ** 2
    on_side = rng.random(n) < lateral / (lateral + caps)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.empty((n, 3))
    pts[on_side, 0] = radius * np.cos(theta[on_side])
    pts[on_side, 1] = radius * np.sin(theta[on_side])
    pts[on_side, 2] = rng.uniform(-half_height, half_height, size=on_side.sum())
    cap = ~on_side
    r = radius * np.sqrt(rng.random(cap.sum()))
    pts[cap, 0] = r * np.cos(theta[cap])
    pts[cap, 1] = r * np.sin(theta[cap])
    pts[cap, 2] = np.where(rng.random(cap.sum()) < 0.5, half_height, -half_height)
    return pts


def _sample_ellipsoid(rng: np.random.Generator, n: int, axes) -> np.ndarray:
    """Uniform surface sampling by rejection against the area element."""
    a, b, c = axes
    out = np.empty((n, 3))
    filled = 0
    gmax = max(b * c, a * c, a * b)
    while filled < n:
        batch = max(2 * (n - filled), 64)
        u = rng.standard_normal((batch, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        density = np.sqrt((b * c * u[:, 0]) ** 2 + (a * c * u[:, 1]) ** 2
                          + (a * b * u[:, 2]) ** 2)
        accept = rng.random(batch) * gmax <= density
        pts = u[accept] * np.asarray(axes)
        take = min(len(pts), n - filled)
        out[filled:filled + take] = pts[:take]
        filled += take
    return out


def _sample_shape(rng: np.random.Generator, shape: ShapeParams, n: int) -> np.ndarray:
    if shape.kind == "box":
        pts = _sample_box(rng, n, shape.values)
    elif shape.kind == "cylinder":
        pts = _sample_cylinder(rng, n, *shape.values)
    elif shape.kind == "ellipsoid":
        pts = _sample_ellipsoid(rng, n, shape.values)
    elif shape.kind == "composite":
        box, cyl = shape.values
        n_box = n // 2
        pts = np.concatenate([_sample_shape(rng, box, n_box),
                              _sample_shape(rng, cyl, n - n_box)], axis=0)
    else:
        raise InvalidSpec(f"unknown shape {shape.kind!r}")
    return pts + np.asarray(shape.offset)


# -- dataset generation --------------------------------------------------------

def _make_view(shape: ShapeParams, spec: DatasetSpec, seed: int, tag: tuple) -> PointCloud:
    rng = make_rng(seed, 0x71E1, *tag)
    dense = _sample_shape(rng, shape, 4 * spec.points_per_view)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    visible = dense[dense @ direction > 0]
    if len(visible) == 0:
        visible = dense  # degenerate cull; keep the view usable
    view_seed = int(rng.integers(2 ** 31))
    view = resample(PointCloud(visible), spec.points_per_view, view_seed)
    if spec.noise.max_rotation_deg > 0 or spec.noise.max_translation > 0:
        pose = sample_pose_noise(dataclasses.replace(spec.noise, seed=view_seed))
        view = apply_pose(view, pose)
    return view


def make_toy_dataset(spec: DatasetSpec) -> ToyDataset:
    """Generate instances deterministically from spec.seed. Each
    instance carries views_per_instance training views plus one held-out
    view for evaluation."""
    instances = []
    for i in range(spec.n_instances):
        kind = spec.shapes[i % len(spec.shapes)]
        shape = _draw_shape(make_rng(spec.seed, 0xDA7A, i), kind)
        gt = PointCloud(_sample_shape(make_rng(spec.seed, 0x067, i), shape, spec.gt_points))
        views = tuple(_make_view(shape, spec, spec.seed, (i, v))
                      for v in range(spec.views_per_instance))
        heldout = _make_view(shape, spec, spec.seed, (i, spec.views_per_instance))
        instances.append(ToyInstance(name=f"inst_{i:03d}_{kind}", gt=gt,
                                     views=views, heldout=heldout))
    return ToyDataset(spec=spec, instances=tuple(instances))


# -- disk layout ---------------------------------------------------------------

def save_dataset(dataset: ToyDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec_doc = dataclasses.asdict(dataset.spec)
    spec_doc["shapes"] = list(dataset.spec.shapes)
    manifest = {"spec": spec_doc,
                "instances": [inst.name for inst in dataset.instances]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    for inst in dataset.instances:
        inst_dir = out / inst.name
        inst_dir.mkdir(exist_ok=True)
        save_cloud(inst.gt, inst_dir / "gt.ply")
        for v, view in enumerate(inst.views):
            save_cloud(view, inst_dir / f"view_{v}.ply")
        save_cloud(inst.heldout, inst_dir / "heldout.ply")


def load_dataset(path) -> ToyDataset:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    spec_doc = dict(manifest["spec"])
    spec_doc["noise"] = NoiseSpec(**spec_doc["noise"])
    spec_doc["shapes"] = tuple(spec_doc["shapes"])
    spec = DatasetSpec(**spec_doc)
    instances = []
    for name in manifest["instances"]:
        inst_dir = root / name
        views = tuple(load_cloud(inst_dir / f"view_{v}.ply")
                      for v in range(spec.views_per_instance))
        instances.append(ToyInstance(
            name=name, gt=load_cloud(inst_dir / "gt.ply"), views=views,
            heldout=load_cloud(inst_dir / "heldout.ply")))
    return ToyDataset(spec=spec, instances=tuple(instances))
