"""Training loop: Adam over the multi-view inpainting losses, with the
four ablation toggles and a step-decayed learning rate."""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import ToyDataset
from .errors import AllRemoved, ConfigError, ShapeMismatch, TrainingDiverged
from .losses import multiview_loss
from .metrics import EvalReport, evaluate_completion
from .model import ModelConfig, ModelParams, forward
from .partition import N_REGIONS, PartitionConfig, partition
from .rng import make_rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class Ablations:
    inpainting: bool = True
    multiview: bool = True
    global_branch: bool = True
    local_branch: bool = True


@dataclass(frozen=True)
class TrainConfig:
    iters: int = 2000
    lr: float = 5e-4
    decay_factor: float = 0.5
    decay_steps: int | None = None  # None: a quarter of iters
    batch_size: int = 32
    beta: float = 0.25
    removal_prob: float = 0.20
    views: int = 4
    overlap: float = 0.02
    presence_threshold: int = 4
    ablations: Ablations = field(default_factory=Ablations)
    model: ModelConfig = field(default_factory=ModelConfig)
    seed: int = 0

    def __post_init__(self):
        if not (self.ablations.global_branch or self.ablations.local_branch):
            raise ConfigError("at least one of global/local branch must stay on")
        if self.iters < 1 or self.batch_size < 1 or self.views < 1:
            raise ConfigError("iters, batch_size, and views must be positive")

    def effective_decay_steps(self) -> int:
        return self.decay_steps if self.decay_steps else max(1, self.iters // 4)

    def resolved_model(self) -> ModelConfig:
        """Model config with branch ablations applied; the total output
        size stays that of the full method."""
        m = self.model
        total = m.global_out + N_REGIONS * m.local_out
        if not self.ablations.global_branch:
            m = replace(m, use_global=False, local_out=total // N_REGIONS)
        if not self.ablations.local_branch:
            m = replace(m, use_local=False, global_out=total)
        return m

    def partition_config(self) -> PartitionConfig:
        prob = self.removal_prob if self.ablations.inpainting else 0.0
        return PartitionConfig(overlap=self.overlap,
                               presence_threshold=self.presence_threshold,
                               removal_prob=prob, seed=0)


def load_train_config(path) -> TrainConfig:
    """Read a TrainConfig from TOML or JSON. Unknown keys are errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
    else:
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return train_config_from_dict(doc, source=str(path))


def train_config_from_dict(doc: dict, source: str = "<dict>") -> TrainConfig:
    doc = dict(doc)
    doc.pop("dataset", None)  # CLI-level key
    kwargs = {}
    for section, cls in (("ablations", Ablations), ("model", ModelConfig)):
        if section in doc:
            sub = doc.pop(section)
            known = {f.name for f in dataclasses.fields(cls)}
            bad = set(sub) - known
            if bad:
                raise ConfigError(f"{source}: unknown {section} keys {sorted(bad)}")
            kwargs[section] = cls(**sub)
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"{source}: unknown keys {sorted(bad)}")
    try:
        return TrainConfig(**doc, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


@dataclass
class TrainLog:
    entries: list = field(default_factory=list)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry) + "\n")

    @staticmethod
    def read_jsonl(path) -> "TrainLog":
        entries = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
        return TrainLog(entries=entries)

    def deterministic_view(self) -> list:
        """Entries without wall-clock fields, for determinism checks."""
        return [{k: v for k, v in e.items() if k != "wall_time"} for e in self.entries]


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: ModelParams, grads: dict, state: AdamState, lr: float,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              eps: float = ADAM_EPS) -> None:
    """One Adam update with bias correction; missing grads count as zero."""
    state.t += 1
    t = state.t
    for name, tensor in params.named():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        elif g.shape != tensor.data.shape:
            raise ShapeMismatch(f"grad for {name}: {g.shape} vs {tensor.data.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)


def collect_grads(params: ModelParams) -> dict:
    return {name: t.grad for name, t in params.named() if t.grad is not None}


def train(dataset: ToyDataset, cfg: TrainConfig,
          params: ModelParams | None = None,
          checkpoint_every: int = 0, checkpoint_dir=None) -> tuple[ModelParams, TrainLog]:
    """Run the self-supervised loop and return (params, log).

    Per step: sample instances and a view k each, partition and remove
    regions from view k, forward, supervise the completion against all
    training views (just view k with the multi-view loss ablated),
    average over the batch, and take one Adam step.
    """
    model_cfg = cfg.resolved_model()
    if params is None:
        params = ModelParams.init(model_cfg, seed=cfg.seed)
    part_cfg = cfg.partition_config()
    sup_cfg = replace(part_cfg, removal_prob=0.0)
    state = AdamState()
    log = TrainLog()
    decay_steps = cfg.effective_decay_steps()
    n_inst = len(dataset.instances)

    # supervision-side partitions depend only on geometry; cache them
    sup_parts: dict = {}

    def view_partition(i_inst: int, i_view: int):
        key = (i_inst, i_view)
        if key not in sup_parts:
            cloud = dataset.instances[i_inst].views[i_view]
            sup_parts[key] = partition(cloud, sup_cfg)
        return sup_parts[key]

    t_start = time.perf_counter()
    for step in range(cfg.iters):
        lr = cfg.lr * cfg.decay_factor ** (step // decay_steps)
        rng = make_rng(cfg.seed, 0x57E2, step)
        params.zero_grad()
        batch_total = None
        g_term = l_term = 0.0
        per_region = np.zeros(N_REGIONS)
        for _ in range(cfg.batch_size):
            inst_idx = int(rng.integers(n_inst))
            inst = dataset.instances[inst_idx]
            n_views = min(cfg.views, len(inst.views))
            k = int(rng.integers(n_views))
            fwd_seed = int(rng.integers(2 ** 31))
            for attempt in range(64):
                try:
                    fwd = forward(params, inst.views[k], part_cfg, mode="train",
                                  seed=fwd_seed + attempt)
                    break
                except AllRemoved:
                    continue
            else:
                raise AllRemoved(f"step {step}: removal kept failing")
            if cfg.ablations.multiview:
                loss_views = [(inst.views[j], view_partition(inst_idx, j))
                              for j in range(n_views)]
            else:
                loss_views = [(inst.views[k], view_partition(inst_idx, k))]
            total, report = multiview_loss(
                loss_views,
                fwd.y_global if model_cfg.use_global else None,
                fwd.y_local if model_cfg.use_local else None,
                cfg.beta)
            batch_total = total if batch_total is None else batch_total + total
            g_term += report.global_term
            l_term += report.local_term
            per_region += np.asarray(report.per_region)
        batch_loss = batch_total / cfg.batch_size
        value = batch_loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(f"step {step}: loss {value}")
        batch_loss.backward()
        adam_step(params, collect_grads(params), state, lr)
        log.entries.append({
            "iter": step,
            "lr": lr,
            "global_term": g_term / cfg.batch_size,
            "local_term": l_term / cfg.batch_size,
            "total": value,
            "per_region": (per_region / cfg.batch_size).tolist(),
            "wall_time": time.perf_counter() - t_start,
        })
        if checkpoint_every and checkpoint_dir and (step + 1) % checkpoint_every == 0:
            from .model import save_checkpoint
            save_checkpoint(params, Path(checkpoint_dir) / f"checkpoint_{step + 1}.npz")
    return params, log


def complete_view(params: ModelParams, view, part_cfg: PartitionConfig, seed: int = 0):
    """Single-view inference: the concatenated decoder output."""
    fwd = forward(params, view, part_cfg, mode="infer", seed=seed)
    return fwd.completion()


def evaluate_heldout(params: ModelParams, dataset: ToyDataset,
                     part_cfg: PartitionConfig, emd_points: int | None = None,
                     uniformity_p: tuple = (), seed: int = 0) -> list[tuple[str, EvalReport]]:
    """Complete every instance's held-out view and score it against the
    dense ground truth."""
    reports = []
    for inst in dataset.instances:
        pred = complete_view(params, inst.heldout, part_cfg, seed=seed)
        report = evaluate_completion(pred, inst.gt, input_partial=inst.heldout,
                                     emd_points=emd_points,
                                     uniformity_p=uniformity_p, seed=seed)
        reports.append((inst.name, report))
    return reports


def mean_heldout_cd(params: ModelParams, dataset: ToyDataset,
                    part_cfg: PartitionConfig, seed: int = 0) -> float:
    reports = evaluate_heldout(params, dataset, part_cfg, emd_points=None,
                               uniformity_p=(), seed=seed)
    return float(np.mean([r.cd for _, r in reports]))
