"""Command-line interface.

Subcommands: gen-data, train, eval, complete, partition, noise,
baseline densify, report. Exit codes: 0 success, 1 usage or config
error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import baseline as baseline_mod
from .cloud import NoiseSpec, PointCloud, apply_pose, load_cloud, sample_pose_noise, save_cloud
from .data import DatasetSpec, load_dataset, make_toy_dataset, save_dataset
from .errors import ConfigError, InvalidSpec, PcError
from .metrics import evaluate_completion
from .model import load_checkpoint, save_checkpoint
from .partition import PartitionConfig, partition, region_points, synthetic_occlude
from .train import (TrainConfig, complete_view, evaluate_heldout,
                    load_train_config, train)

USAGE_EXIT = 1
DATA_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_noise_levels(text: str) -> list[tuple[float, float]]:
    levels = []
    for part in text.split(","):
        try:
            deg, trans = part.split(":")
            levels.append((float(deg), float(trans)))
        except ValueError as exc:
            raise ConfigError(f"bad noise level {part!r}, expected DEG:TRANS") from exc
    return levels


# -- commands -----------------------------------------------------------------

def cmd_gen_data(args) -> int:
    spec = DatasetSpec(
        n_instances=args.instances,
        shapes=tuple(args.shapes.split(",")),
        views_per_instance=args.views,
        points_per_view=args.points_per_view,
        gt_points=args.gt_points,
        noise=NoiseSpec(args.noise_deg, args.noise_trans, seed=args.seed),
        seed=args.seed,
    )
    dataset = make_toy_dataset(spec)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset.instances)} instances to {args.out}")
    return 0


def _write_eval_csv(rows: list, path) -> None:
    """One row per instance plus a `mean` summary row of column means."""
    if not rows:
        raise ConfigError("nothing to evaluate")
    columns = rows[0][1].columns()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance"] + columns)
        table = []
        for name, report in rows:
            values = report.values()
            table.append(values)
            writer.writerow([name] + [repr(v) for v in values])
        means = np.asarray(table, dtype=float).mean(axis=0)
        writer.writerow(["mean"] + [repr(float(v)) for v in means])


def cmd_train(args) -> int:
    cfg = load_train_config(args.config)
    doc = json.loads(Path(args.config).read_text()) if str(args.config).endswith(".json") else None
    dataset_path = args.dataset
    if dataset_path is None and doc is not None:
        dataset_path = doc.get("dataset")
    if dataset_path is None:
        dataset_path = _dataset_key_from_toml(args.config)
    if dataset_path is None:
        raise ConfigError("no dataset given (flag --dataset or config key)")
    if not Path(dataset_path).exists():
        raise ConfigError(f"dataset path does not exist: {dataset_path}")
    for name in args.ablate or []:
        cfg = _apply_ablation(cfg, name)
    if args.iters is not None:
        cfg = dataclasses.replace(cfg, iters=args.iters)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)

    dataset = load_dataset(dataset_path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, log = train(dataset, cfg)
    save_checkpoint(params, out / "checkpoint.npz")
    log.write_jsonl(out / "train_log.jsonl")
    meta = dataclasses.asdict(cfg)
    meta["dataset"] = str(dataset_path)
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, default=str))
    reports = evaluate_heldout(params, dataset, cfg.partition_config(),
                               emd_points=args.emd_points, uniformity_p=(),
                               seed=cfg.seed)
    _write_eval_csv(reports, out / "eval.csv")
    print(f"final loss {log.entries[-1]['total']:.6f}; run artifacts in {out}")
    return 0


def _dataset_key_from_toml(path) -> str | None:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    try:
        doc = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError):
        return None
    return doc.get("dataset")


def _apply_ablation(cfg: TrainConfig, name: str) -> TrainConfig:
    ab = cfg.ablations
    if name == "inpainting":
        ab = dataclasses.replace(ab, inpainting=False)
    elif name == "multiview":
        ab = dataclasses.replace(ab, multiview=False)
    elif name == "global":
        ab = dataclasses.replace(ab, global_branch=False)
    elif name == "local":
        ab = dataclasses.replace(ab, local_branch=False)
    else:
        raise ConfigError(f"unknown ablation {name!r}")
    return dataclasses.replace(cfg, ablations=ab)


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    part_cfg = PartitionConfig(overlap=args.overlap, removal_prob=0.0, seed=0)
    levels = [(0.0, 0.0)] if args.noise is None else _parse_noise_levels(args.noise)
    out = Path(args.out)
    for deg, trans in levels:
        rows = []
        for idx, inst in enumerate(dataset.instances):
            view = inst.heldout
            if deg > 0 or trans > 0:
                pose = sample_pose_noise(NoiseSpec(deg, trans, seed=args.seed + idx))
                view = apply_pose(view, pose)
            pred = complete_view(params, view, part_cfg, seed=args.seed)
            rows.append((inst.name, evaluate_completion(
                pred, inst.gt, input_partial=view, emd_points=args.emd_points,
                seed=args.seed)))
        if args.noise is None:
            path = out
        else:
            path = out.with_name(f"{out.stem}_rot{deg:g}_t{trans:g}{out.suffix}")
        _write_eval_csv(rows, path)
        print(f"wrote {path}")
    return 0


def cmd_complete(args) -> int:
    params = load_checkpoint(args.checkpoint)
    cloud = load_cloud(args.infile)
    part_cfg = PartitionConfig(overlap=args.overlap, removal_prob=0.0, seed=0)
    pred = complete_view(params, cloud, part_cfg, seed=args.seed)
    save_cloud(pred, args.outfile)
    print(f"wrote {len(pred)} points to {args.outfile}")
    return 0


def cmd_partition(args) -> int:
    cloud = load_cloud(args.infile)
    cfg = PartitionConfig(overlap=args.overlap,
                          presence_threshold=args.threshold,
                          removal_prob=args.remove_prob, seed=args.seed)
    part = partition(cloud, cfg, remove_count=args.remove_count)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(8):
        save_cloud(region_points(cloud, part, i), out / f"region_{i}.ply")
    try:
        occluded = synthetic_occlude(cloud, part)
        save_cloud(occluded, out / "occluded.ply")
        occluded_n = len(occluded)
    except PcError:
        occluded_n = 0
    summary = {
        "counts": [int(idx.size) for idx in part.regions],
        "present": part.present.tolist(),
        "kept": part.kept.tolist(),
        "occluded_points": occluded_n,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"wrote regions to {out}")
    return 0


def cmd_noise(args) -> int:
    cloud = load_cloud(args.infile)
    pose = sample_pose_noise(NoiseSpec(args.max_deg, args.max_trans, seed=args.seed))
    save_cloud(apply_pose(cloud, pose), args.outfile)
    print(f"wrote noisy cloud to {args.outfile}")
    return 0


def cmd_baseline_densify(args) -> int:
    cloud = load_cloud(args.infile)
    dense = baseline_mod.densify(cloud, points_per_seed=args.points_per_seed,
                                 seed=args.seed, target=args.target)
    save_cloud(dense, args.outfile)
    print(f"wrote {len(dense)} points to {args.outfile}")
    return 0


def cmd_report(args) -> int:
    """Aggregate existing run artifacts into one summary CSV; no metric
    is recomputed."""
    rows = []
    for run_dir in args.run:
        run = Path(run_dir)
        meta = json.loads((run / "run_meta.json").read_text())
        log_lines = (run / "train_log.jsonl").read_text().splitlines()
        final = json.loads(log_lines[-1]) if log_lines else {}
        mean_row = None
        eval_path = run / "eval.csv"
        header = []
        if eval_path.exists():
            with open(eval_path, newline="") as fh:
                table = list(csv.reader(fh))
            header = table[0][1:]
            for row in table[1:]:
                if row and row[0] == "mean":
                    mean_row = [float(v) for v in row[1:]]
        rows.append({
            "run": str(run),
            "iters": meta.get("iters"),
            "seed": meta.get("seed"),
            "ablations": json.dumps(meta.get("ablations")),
            "final_loss": final.get("total"),
            **({h: v for h, v in zip(header, mean_row)} if mean_row else {}),
        })
    if not rows:
        raise ConfigError("no runs given")
    columns: list = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out}")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcinpaint",
                     description="Self-supervised point cloud completion via "
                                 "octant-region inpainting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a procedural multi-view dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--views", type=int, default=4)
    p.add_argument("--points-per-view", type=int, default=1024)
    p.add_argument("--gt-points", type=int, default=4096)
    p.add_argument("--shapes", default="box,cylinder,ellipsoid,composite")
    p.add_argument("--noise-deg", type=float, default=0.0)
    p.add_argument("--noise-trans", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a completion model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default=None,
                   help="dataset directory (overrides the config key)")
    p.add_argument("--ablate", action="append",
                   choices=["inpainting", "multiview", "global", "local"])
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--emd-points", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on held-out views")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", default=None,
                   help="comma list of DEG:TRANS levels, e.g. 5:0.01,10:0.05")
    p.add_argument("--emd-points", type=int, default=512)
    p.add_argument("--overlap", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("complete", help="complete one partial cloud file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("infile")
    p.add_argument("outfile")
    p.add_argument("--overlap", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("partition", help="write octant regions of a cloud")
    p.add_argument("infile")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--overlap", type=float, default=0.02)
    p.add_argument("--threshold", type=int, default=4)
    p.add_argument("--remove-prob", type=float, default=0.2)
    p.add_argument("--remove-count", type=int, default=None,
                   help="drop exactly this many present regions instead of "
                        "Bernoulli removal")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("noise", help="apply sampled pose noise to a cloud file")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.add_argument("--max-deg", type=float, required=True)
    p.add_argument("--max-trans", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("baseline", help="reference baselines")
    bsub = p.add_subparsers(dest="baseline_command", required=True)
    b = bsub.add_parser("densify", help="densify by local eigen-ellipsoids")
    b.add_argument("infile")
    b.add_argument("outfile")
    b.add_argument("--points-per-seed", type=int, default=8)
    b.add_argument("--target", type=int, default=None)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_baseline_densify)

    p = sub.add_parser("report", help="summarize run directories into a CSV")
    p.add_argument("--run", action="append", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        return args.func(args)
    except (ConfigError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except PcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
