"""Self-supervised point cloud completion via octant-region inpainting."""

from .cloud import NoiseSpec, PointCloud, RigidPose, apply_pose, load_cloud, resample, sample_pose_noise, save_cloud
from .data import DatasetSpec, ToyDataset, make_toy_dataset
from .losses import LossConfig, LossReport, inpainting_global_loss, inpainting_local_loss, multiview_loss, weighted_chamfer
from .metrics import EvalReport, eval_cd, eval_emd, eval_fscore, eval_uniformity, split_observed
from .model import ForwardOutputs, ModelConfig, ModelParams, forward, load_checkpoint, save_checkpoint
from .partition import PartitionConfig, RegionPartition, pad_region, partition, region_points, synthetic_occlude
from .train import Ablations, TrainConfig, TrainLog, adam_step, train

__version__ = "0.1.0"

__all__ = [
    "Ablations", "DatasetSpec", "EvalReport", "ForwardOutputs", "LossConfig",
    "LossReport", "ModelConfig", "ModelParams", "NoiseSpec", "PartitionConfig",
    "PointCloud", "RegionPartition", "RigidPose", "ToyDataset", "TrainConfig",
    "TrainLog", "adam_step", "apply_pose", "eval_cd", "eval_emd", "eval_fscore",
    "eval_uniformity", "forward", "inpainting_global_loss",
    "inpainting_local_loss", "load_checkpoint", "load_cloud", "make_toy_dataset",
    "multiview_loss", "pad_region", "partition", "region_points", "resample",
    "sample_pose_noise", "save_checkpoint", "save_cloud", "split_observed",
    "synthetic_occlude", "train", "weighted_chamfer",
]
