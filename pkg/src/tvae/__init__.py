"""Trajectory VAEs for MAP-based anomaly detection in periodic video."""

from .anomaly import (
    AnomalyResult,
    anomaly_score,
    map_restore,
    map_restore_batch,
    perturbation_heatmap,
    score_reconstruction,
    tv_norm,
)
from .checkpoint import LoadedCheckpoint, load_checkpoint, save_checkpoint
from .config import AugmentConfig, MapConfig, ModelConfig, PreprocessParams
from .errors import ConfigError, DataError, NumericError, TvaeError
from .metrics import (
    DetectionMetrics,
    ReconMetrics,
    auroc,
    average_precision,
    detection_metrics,
    mse,
    psnr,
    reconstruction_metrics,
    ssim,
)
from .model import (
    ElboTerms,
    TrajectoryLatent,
    TrajectoryVae,
    decode_frame,
    encode,
    frame_times,
    generate,
    reconstruct,
    train,
)
from .model.tvae import elbo
from .trajectory import TrajectoryParams, eval_circular, eval_rot, eval_spiral

__version__ = "0.1.0"

__all__ = [
    "AnomalyResult",
    "anomaly_score",
    "map_restore",
    "map_restore_batch",
    "perturbation_heatmap",
    "score_reconstruction",
    "tv_norm",
    "LoadedCheckpoint",
    "load_checkpoint",
    "save_checkpoint",
    "AugmentConfig",
    "MapConfig",
    "ModelConfig",
    "PreprocessParams",
    "ConfigError",
    "DataError",
    "NumericError",
    "TvaeError",
    "DetectionMetrics",
    "ReconMetrics",
    "auroc",
    "average_precision",
    "detection_metrics",
    "mse",
    "psnr",
    "reconstruction_metrics",
    "ssim",
    "ElboTerms",
    "TrajectoryLatent",
    "TrajectoryVae",
    "decode_frame",
    "elbo",
    "encode",
    "frame_times",
    "generate",
    "reconstruct",
    "train",
    "TrajectoryParams",
    "eval_circular",
    "eval_rot",
    "eval_spiral",
    "__version__",
]
