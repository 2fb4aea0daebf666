"""The completion network: parallel global/local point encoders, an
attention-weighted fusion of local region embeddings, and fixed-size
fully-connected decoders.

The global encoder sees the whole (synthetically occluded) cloud; one
shared local encoder sees each octant region. Region embeddings are
combined as a weighted sum over regions that are present and not
removed, lifted to the global width, and fused with the global
embedding by channel-wise max. Decoders emit a fixed number of points:
one global set plus one set per region conditioned on a one-hot region
code.
"""

from __future__ import annotations

import dataclasses
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, concat, constant, maximum
from .cloud import PointCloud, resample
from .errors import CheckpointMismatch, ShapeMismatch
from .partition import (N_REGIONS, PartitionConfig, RegionPartition,
                        partition, region_points, pad_region, synthetic_occlude)
from .rng import make_rng

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture sizes. Local widths are exactly 1/8 of global ones."""

    embed_dim: int = 256
    global_input: int = 3096
    local_input: int = 387
    global_out: int = 4096
    local_out: int = 512
    use_global: bool = True
    use_local: bool = True
    vector_attention: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.embed_dim % 8 != 0:
            raise ValueError("embed_dim must be divisible by 8")
        if not (self.use_global or self.use_local):
            raise ValueError("at least one of use_global/use_local")

    @property
    def local_dim(self) -> int:
        return self.embed_dim // 8

    @property
    def fused_dim(self) -> int:
        """Width of the embedding the decoders consume. Without the
        global branch there is no lift, so it stays at local width."""
        return self.embed_dim if self.use_global else self.local_dim

    @property
    def output_points(self) -> int:
        total = 0
        if self.use_global:
            total += self.global_out
        if self.use_local:
            total += N_REGIONS * self.local_out
        return total


def _he_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)


def _linear_shapes(cfg: ModelConfig) -> dict:
    """name -> (fan_in, fan_out) for every linear layer in the model."""
    c = cfg.embed_dim
    cl = cfg.local_dim
    hg, hl = c // 2, max(c // 16, 1)  # first per-point widths, local = 1/8
    shapes = {}
    if cfg.use_global:
        shapes["eg.point0"] = (3, hg)
        shapes["eg.point1"] = (hg, c)
        shapes["eg.head0"] = (c, c)
        shapes["eg.head1"] = (c, c)
        shapes["dg.hidden"] = (c, 2 * c)
        shapes["dg.out"] = (2 * c, 3 * cfg.global_out)
    if cfg.use_local:
        shapes["el.point0"] = (3, hl)
        shapes["el.point1"] = (hl, cl)
        shapes["el.head0"] = (cl, cl)
        shapes["el.head1"] = (cl, cl)
        shapes["attn"] = (cl, cl if cfg.vector_attention else 1)
        shapes["dl.hidden"] = (cfg.fused_dim + N_REGIONS, max(2 * c // 8, 1))
        shapes["dl.out"] = (max(2 * c // 8, 1), 3 * cfg.local_out)
        if cfg.use_global:
            shapes["lift"] = (cl, c)
    return shapes


class ModelParams:
    """All learnable tensors, addressable by name."""

    def __init__(self, cfg: ModelConfig, tensors: dict):
        self.cfg = cfg
        self.tensors = tensors

    @staticmethod
    def init(cfg: ModelConfig, seed: int | None = None) -> "ModelParams":
        rng = make_rng(cfg.seed if seed is None else seed, 0x111717)
        tensors = {}
        for name, (fan_in, fan_out) in _linear_shapes(cfg).items():
            tensors[f"{name}.w"] = Tensor(_he_init(rng, fan_in, fan_out),
                                          requires_grad=True)
            if name != "lift":  # the lift is linear so empty fusions stay zero
                tensors[f"{name}.b"] = Tensor(np.zeros((1, fan_out)),
                                              requires_grad=True)
        return ModelParams(cfg, tensors)

    def named(self) -> list:
        return sorted(self.tensors.items())

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def n_parameters(self) -> int:
        return sum(t.data.size for _, t in self.named())

    def zero_grad(self) -> None:
        for _, t in self.named():
            t.grad = None


def _affine(params: ModelParams, name: str, x: Tensor) -> Tensor:
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


@dataclass
class ForwardOutputs:
    e_global: Tensor | None
    e_local: list
    weights: list
    p_local: Tensor | None   # pre-lift aggregate, width C/8
    p_fused: Tensor
    y_global: Tensor | None
    y_local: list
    y: Tensor
    part: RegionPartition
    occluded: PointCloud

    def completion(self) -> PointCloud:
        return PointCloud(self.y.data)


def encode_global(params: ModelParams, points: np.ndarray) -> Tensor:
    """Shared per-point MLP, channel-wise max over points, MLP head."""
    cfg = params.cfg
    if points.shape != (cfg.global_input, 3):
        raise ShapeMismatch(
            f"global encoder expects ({cfg.global_input}, 3), got {points.shape}")
    h = _affine(params, "eg.point0", constant(points)).relu()
    h = _affine(params, "eg.point1", h).relu()
    pooled = h.max(axis=0)
    h = _affine(params, "eg.head0", pooled).relu()
    return _affine(params, "eg.head1", h)


def _encode_one_region(params: ModelParams, points: np.ndarray) -> Tensor:
    cfg = params.cfg
    if points.shape != (cfg.local_input, 3):
        raise ShapeMismatch(
            f"local encoder expects ({cfg.local_input}, 3), got {points.shape}")
    h = _affine(params, "el.point0", constant(points)).relu()
    h = _affine(params, "el.point1", h).relu()
    pooled = h.max(axis=0)
    h = _affine(params, "el.head0", pooled).relu()
    return _affine(params, "el.head1", h)


def encode_local(params: ModelParams, padded_regions: list,
                 included: np.ndarray) -> tuple[list, list, Tensor]:
    """Per-region embeddings, attention weights, and the aggregate
    sum over included (present and kept) regions.

    Excluded regions are still embedded for inspection but contribute
    nothing to the aggregate and so get no gradient.
    """
    e_local, weights = [], []
    p_local = None
    for i in range(N_REGIONS):
        e_i = _encode_one_region(params, padded_regions[i])
        w_i = e_i @ params["attn.w"] + params["attn.b"]
        e_local.append(e_i)
        weights.append(w_i)
        if included[i]:
            term = w_i * e_i
            p_local = term if p_local is None else p_local + term
    if p_local is None:
        p_local = constant(np.zeros((1, params.cfg.local_dim)))
    return e_local, weights, p_local


def fuse(e_global: Tensor, p_local_lifted: Tensor) -> Tensor:
    """Channel-wise max; ties route the gradient to the global side."""
    return maximum(e_global, p_local_lifted)


def decode(params: ModelParams, p_fused: Tensor) -> tuple:
    """(y_global, y_local, y): fixed-size point sets from the fused
    embedding; the local decoder is conditioned on a one-hot region
    code and always emits all 8 regions."""
    cfg = params.cfg
    if p_fused.shape != (1, cfg.fused_dim):
        raise ShapeMismatch(f"decoder expects (1, {cfg.fused_dim}), got {p_fused.shape}")
    y_global = None
    parts = []
    if cfg.use_global:
        h = _affine(params, "dg.hidden", p_fused).relu()
        y_global = _affine(params, "dg.out", h).reshape(cfg.global_out, 3)
        parts.append(y_global)
    y_local = []
    if cfg.use_local:
        eye = np.eye(N_REGIONS)
        for i in range(N_REGIONS):
            code = constant(eye[i:i + 1])
            h = _affine(params, "dl.hidden", concat([p_fused, code], axis=1)).relu()
            y_i = _affine(params, "dl.out", h).reshape(cfg.local_out, 3)
            y_local.append(y_i)
            parts.append(y_i)
    y = parts[0] if len(parts) == 1 else concat(parts, axis=0)
    return y_global, y_local, y


def forward(params: ModelParams, cloud: PointCloud, part_cfg: PartitionConfig,
            mode: str = "infer", seed: int = 0,
            remove_count: int | None = None) -> ForwardOutputs:
    """Full pipeline on one canonicalized view.

    Training mode partitions, removes regions (raising AllRemoved when
    nothing survives), and feeds the occluded cloud; inference skips
    removal entirely.
    """
    cfg = params.cfg
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    part = partition(cloud, replace(part_cfg, seed=seed), remove_count)
    if mode == "infer":
        part = RegionPartition(regions=part.regions, present=part.present,
                               kept=part.present.copy())
        occluded = cloud
    else:
        occluded = synthetic_occlude(cloud, part)

    e_global = None
    if cfg.use_global:
        enc_points = resample(occluded, cfg.global_input, seed).points
        e_global = encode_global(params, enc_points)

    e_local, weights = [], []
    p_local = None
    p_fused = e_global
    if cfg.use_local:
        included = part.present & part.kept
        padded = [
            pad_region(region_points(cloud, part, i), cfg.local_input,
                       part_cfg.presence_threshold, seed=seed + i).points
            for i in range(N_REGIONS)
        ]
        e_local, weights, p_local = encode_local(params, padded, included)
        if cfg.use_global:
            p_fused = fuse(e_global, p_local @ params["lift.w"])
        else:
            p_fused = p_local

    y_global, y_local, y = decode(params, p_fused)
    return ForwardOutputs(e_global=e_global, e_local=e_local, weights=weights,
                          p_local=p_local, p_fused=p_fused, y_global=y_global,
                          y_local=y_local, y=y, part=part, occluded=occluded)


def save_checkpoint(params: ModelParams, path) -> None:
    meta = {"version": CHECKPOINT_VERSION,
            "config": dataclasses.asdict(params.cfg)}
    arrays = {name: t.data for name, t in params.named()}
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> ModelParams:
    try:
        with np.load(path) as archive:
            if "__meta__" not in archive:
                raise CheckpointMismatch(f"{path}: missing metadata")
            meta = json.loads(bytes(archive["__meta__"]).decode())
            arrays = {k: archive[k] for k in archive.files if k != "__meta__"}
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointMismatch(f"{path}: unreadable checkpoint: {exc}") from exc
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"{path}: version {meta.get('version')} unsupported")
    try:
        cfg = ModelConfig(**meta["config"])
    except (TypeError, ValueError) as exc:
        raise CheckpointMismatch(f"{path}: bad config: {exc}") from exc
    expected = {}
    for name, (fan_in, fan_out) in _linear_shapes(cfg).items():
        expected[f"{name}.w"] = (fan_in, fan_out)
        if name != "lift":
            expected[f"{name}.b"] = (1, fan_out)
    if set(expected) != set(arrays):
        raise CheckpointMismatch(
            f"{path}: tensor names do not match config "
            f"(missing {sorted(set(expected) - set(arrays))}, "
            f"unexpected {sorted(set(arrays) - set(expected))})")
    tensors = {}
    for name, shape in expected.items():
        if tuple(arrays[name].shape) != shape:
            raise CheckpointMismatch(
                f"{path}: {name} has shape {arrays[name].shape}, expected {shape}")
        tensors[name] = Tensor(arrays[name], requires_grad=True)
    return ModelParams(cfg, tensors)
