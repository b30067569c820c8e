"""Training loop for the trajectory VAE family.

Sampling is reproducible by construction: the shuffle order for epoch e
comes from a generator keyed by (seed, e), and the window position and
augmentation draws for sample i of epoch e come from one keyed by
(seed, e, i).  A given seed therefore fixes the whole data stream
independently of timing, and reruns produce identical weights on the same
platform.  Trajectory variants train on random fixed-length windows of
whole videos; the frame-wise baseline trains on individually augmented
single frames.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from ..config import ModelConfig, PreprocessParams
from ..data.preprocess import augment, extract_clip, frame_stride
from ..data.video import EchoClip, RawVideo
from ..errors import ConfigError, DataError, NumericError
from .tvae import TrajectoryVae


@dataclass
class TrainInfo:
    steps: int
    history: list[tuple[int, float]] = field(default_factory=list)
    val_history: list[tuple[int, float]] = field(default_factory=list)
    param_ranges: dict = field(default_factory=dict)
    duration_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "history": [[s, l] for s, l in self.history],
            "val_history": [[s, l] for s, l in self.val_history],
            "param_ranges": self.param_ranges,
            "duration_s": self.duration_s,
        }


def _window_params(config: ModelConfig) -> PreprocessParams:
    return PreprocessParams(
        target_size=config.height, target_fps=config.fps, clip_frames=config.frames
    )


def _check_videos(videos: list[RawVideo], config: ModelConfig) -> None:
    if not videos:
        raise DataError("training set is empty")
    params = _window_params(config)
    for v in videos:
        if v.is_anomalous:
            raise DataError(f"anomalous video {v.identifier!r} (label {v.label!r}) in the training set")
        if not np.issubdtype(v.frames.dtype, np.floating):
            raise DataError(f"video {v.identifier!r} is not preprocessed (expected float frames)")
        if (v.height, v.width) != (config.height, config.width):
            raise DataError(
                f"video {v.identifier!r} is {v.height}x{v.width}, model expects "
                f"{config.height}x{config.width}"
            )
        stride = frame_stride(v.fps, params.target_fps)
        if v.n_frames < (config.frames - 1) * stride + 1:
            raise DataError(f"video {v.identifier!r} is too short for a {config.frames}-frame window")


def _sample_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _random_window(video: RawVideo, rng: np.random.Generator, config: ModelConfig,
                   params: PreprocessParams) -> EchoClip:
    stride = frame_stride(video.fps, params.target_fps)
    last_start = video.n_frames - (config.frames - 1) * stride - 1
    start = int(rng.integers(0, last_start + 1))
    clip = extract_clip(video, start, params)
    return augment(clip, rng, config.augment)


def _clip_stream(videos, config: ModelConfig, params: PreprocessParams):
    """Yield augmented training clips in a seed-determined order, forever."""
    epoch = 0
    while True:
        order = _sample_rng(config.seed, epoch).permutation(len(videos))
        for idx in order:
            rng = _sample_rng(config.seed, epoch, int(idx))
            yield _random_window(videos[int(idx)], rng, config, params)
        epoch += 1


def _frame_batch(videos, config: ModelConfig, params: PreprocessParams, step: int) -> torch.Tensor:
    """A batch of independently augmented single frames for the frame-wise baseline."""
    rng = _sample_rng(config.seed, step)
    frames = []
    for _ in range(config.resolved_batch_size):
        video = videos[int(rng.integers(len(videos)))]
        j = int(rng.integers(video.n_frames))
        one = EchoClip(
            frames=np.ascontiguousarray(video.frames[j : j + 1], dtype=np.float32),
            timestamps=np.zeros(1),
            fps=params.target_fps,
            identifier=video.identifier,
        )
        frames.append(augment(one, rng, config.augment).frames)
    return torch.from_numpy(np.stack(frames))


def _validation_batch(videos, config: ModelConfig, params: PreprocessParams) -> torch.Tensor:
    clips = [extract_clip(v, 0, params) for v in videos[:16]]
    return torch.from_numpy(np.stack([c.frames for c in clips]))


def _loss(model: TrajectoryVae, x: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
    terms = model.elbo_tensors(x, generator=generator)
    return (-terms.recon_term + model.config.kl_weight * terms.kl).mean()


def _empirical_ranges(model: TrajectoryVae, videos, config: ModelConfig,
                      params: PreprocessParams) -> dict:
    """Min/max of the temporal parameters over first windows of the training set."""
    if config.is_framewise:
        return {}
    model.eval()
    values = {"f": [], "omega": [], "v": []}
    with torch.no_grad():
        for chunk_start in range(0, len(videos), 32):
            clips = [extract_clip(v, 0, params) for v in videos[chunk_start : chunk_start + 32]]
            lat = model.encode_tensors(torch.from_numpy(np.stack([c.frames for c in clips])))
            values["f"].append(lat.f)
            values["omega"].append(lat.omega)
            if lat.v is not None:
                values["v"].append(lat.v)
    ranges = {}
    for name, parts in values.items():
        if parts:
            cat = torch.cat(parts)
            ranges[name] = [float(cat.min()), float(cat.max())]
    return ranges


def train(videos: list[RawVideo], config: ModelConfig, out_dir=None, log=None):
    """Train a model on preprocessed normal videos.

    Returns ``(model, TrainInfo)``.  ``out_dir``, when given, receives the
    final checkpoint plus one snapshot per validation point.  Training on
    any video not labelled normal is refused.
    """
    config.validate()
    if config.seed is None:
        raise ConfigError("training requires an explicit seed")
    _check_videos(videos, config)
    params = _window_params(config)

    torch.manual_seed(config.seed)
    model = TrajectoryVae(config)
    if config.warm_start:
        from ..checkpoint import load_checkpoint

        loaded = load_checkpoint(config.warm_start)
        ours, theirs = config.to_dict(), loaded.model.config.to_dict()
        arch_keys = ("variant", "latent_dim", "frames", "height", "width", "enc_widths")
        mismatched = [k for k in arch_keys if ours[k] != theirs[k]]
        if mismatched:
            raise ConfigError(f"warm-start checkpoint architecture differs on {mismatched}")
        model.load_state_dict(loaded.model.state_dict())

    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    temporal_frozen = model.heads.temporal is not None and config.temporal_warmup > 0
    if temporal_frozen:
        model.heads.temporal.requires_grad_(False)
    noise_generator = torch.Generator().manual_seed(config.seed)
    val_x = _validation_batch(videos, config, params)
    stream = None if config.is_framewise else _clip_stream(videos, config, params)

    info = TrainInfo(steps=config.steps)
    started = time.monotonic()
    model.train()
    for step in range(1, config.steps + 1):
        if temporal_frozen and step > config.temporal_warmup:
            model.heads.temporal.requires_grad_(True)
            temporal_frozen = False
        if config.is_framewise:
            x = _frame_batch(videos, config, params, step)
        else:
            x = torch.from_numpy(np.stack([next(stream).frames for _ in range(config.resolved_batch_size)]))
        loss = _loss(model, x, generator=noise_generator)
        loss_value = float(loss.detach())
        if not np.isfinite(loss_value):
            raise NumericError(
                f"non-finite training loss at step {step}", trace=[v for _, v in info.history[-20:]]
            )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        info.history.append((step, loss_value))

        if step % config.snapshot_every == 0 or step == config.steps:
            model.eval()
            with torch.no_grad():
                val_loss = float(_loss(model, val_x, generator=torch.Generator().manual_seed(config.seed)))
            model.train()
            info.val_history.append((step, val_loss))
            if log is not None:
                log(f"step {step}/{config.steps}  train loss {loss_value:.4f}  val loss {val_loss:.4f}")
            if out_dir is not None:
                from ..checkpoint import save_checkpoint

                model.param_ranges = _empirical_ranges(model, videos, config, params)
                save_checkpoint(f"{out_dir}/snapshot-{step:06d}.ckpt", model, step=step)
                model.train()

    model.eval()
    model.param_ranges = _empirical_ranges(model, videos, config, params)
    info.duration_s = time.monotonic() - started
    info.param_ranges = model.param_ranges
    if out_dir is not None:
        from ..checkpoint import save_checkpoint

        save_checkpoint(f"{out_dir}/model.ckpt", model, step=config.steps)
    return model, info
