"""Encoder/decoder networks, the trajectory VAE, and training."""

from .tvae import (
    ElboTerms,
    TrajectoryLatent,
    TrajectoryVae,
    decode_frame,
    encode,
    frame_times,
    generate,
    reconstruct,
)
from .train import TrainInfo, train

__all__ = [
    "ElboTerms",
    "TrajectoryLatent",
    "TrajectoryVae",
    "decode_frame",
    "encode",
    "frame_times",
    "generate",
    "reconstruct",
    "TrainInfo",
    "train",
]
