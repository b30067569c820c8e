"""Frame preprocessing, clip extraction, and training-time augmentation.

Preprocessing turns a raw uint8 video into model-ready float frames:
bilinear resize to a square target, per-frame histogram equalization over
256 bins, then scaling to [0, 1].  Clip extraction subsamples the frame
axis to a target rate with stride ``max(1, round(fps / target_fps))`` and
cuts fixed-length windows; videos too short for a full window are
rejected, never padded.  Timestamps restart at zero on the resampled axis,
frame j sitting at ``j / target_fps`` seconds.
"""

from __future__ import annotations

import math

import cv2
import numpy as np

from ..config import AugmentConfig, PreprocessParams
from ..errors import DataError
from .video import EchoClip, RawVideo


def equalize_frame(frame: np.ndarray) -> np.ndarray:
    """Histogram-equalize one uint8 frame over 256 bins.

    Uses the integer transfer function ``lut[v] = (cdf[v] * 255) // n``,
    which maps a constant frame to the constant 255 and is exactly
    reproducible across platforms.
    """
    if frame.dtype != np.uint8:
        raise DataError(f"equalization expects uint8 frames, got {frame.dtype}")
    hist = np.bincount(frame.ravel(), minlength=256).astype(np.int64)
    cdf = np.cumsum(hist)
    lut = ((cdf * 255) // frame.size).astype(np.uint8)
    return lut[frame]


def preprocess(video: RawVideo, params: PreprocessParams | None = None) -> RawVideo:
    """Resize, equalize, and scale a raw uint8 video to float32 [0, 1].

    The mask, if present, is resized with nearest-neighbour interpolation
    so it stays binary.  Label, fps, and identifier are preserved.
    """
    params = (params or PreprocessParams()).validate()
    if video.frames.dtype != np.uint8:
        raise DataError("preprocess expects a raw uint8 video")
    size = (params.target_size, params.target_size)
    frames = np.empty((video.n_frames, params.target_size, params.target_size), dtype=np.float32)
    for i, frame in enumerate(video.frames):
        resized = cv2.resize(frame, size, interpolation=cv2.INTER_LINEAR)
        if params.equalize:
            resized = equalize_frame(resized)
        frames[i] = resized.astype(np.float32) / 255.0
    mask = None
    if video.mask is not None:
        mask = np.stack(
            [cv2.resize(m, size, interpolation=cv2.INTER_NEAREST) for m in video.mask]
        ).astype(np.uint8)
    return RawVideo(frames=frames, fps=video.fps, identifier=video.identifier, label=video.label, mask=mask)


def frame_stride(source_fps: float, target_fps: float) -> int:
    """Subsampling stride: ``max(1, round(source_fps / target_fps))``.

    Rounding is half-up so the stride is a deterministic function of the
    rates (25 -> 12 gives 2; rates at or below the target give 1).
    """
    if source_fps <= 0 or target_fps <= 0:
        raise DataError("frame rates must be > 0")
    return max(1, int(math.floor(source_fps / target_fps + 0.5)))


def clip_frame_indices(n_frames: int, source_fps: float, start: int, params: PreprocessParams) -> np.ndarray:
    """Source-frame indices selected for the clip starting at ``start``."""
    stride = frame_stride(source_fps, params.target_fps)
    indices = start + stride * np.arange(params.clip_frames)
    if start < 0 or indices[-1] >= n_frames:
        raise DataError(
            f"clip of {params.clip_frames} frames at stride {stride} starting at "
            f"{start} does not fit in a {n_frames}-frame video"
        )
    return indices


def extract_clip(video: RawVideo, start: int = 0, params: PreprocessParams | None = None) -> EchoClip:
    """Cut a fixed-length clip from a preprocessed video.

    The video's frames must already be float (run ``preprocess`` first);
    the clip inherits identifier, label, and the subsampled mask.
    """
    params = (params or PreprocessParams()).validate()
    if not np.issubdtype(video.frames.dtype, np.floating):
        raise DataError("extract_clip expects a preprocessed (float) video")
    indices = clip_frame_indices(video.n_frames, video.fps, start, params)
    frames = np.ascontiguousarray(video.frames[indices], dtype=np.float32)
    timestamps = np.arange(params.clip_frames, dtype=np.float64) / params.target_fps
    mask = video.mask[indices].copy() if video.mask is not None else None
    return EchoClip(
        frames=frames,
        timestamps=timestamps,
        fps=params.target_fps,
        identifier=video.identifier,
        label=video.label,
        mask=mask,
    )


def extract_mask_clip(video: RawVideo, start: int = 0, params: PreprocessParams | None = None) -> np.ndarray | None:
    """The mask frames matching ``extract_clip`` with the same arguments."""
    params = (params or PreprocessParams()).validate()
    if video.mask is None:
        return None
    indices = clip_frame_indices(video.n_frames, video.fps, start, params)
    return video.mask[indices].copy()


def augment(clip: EchoClip, rng: np.random.Generator, cfg: AugmentConfig) -> EchoClip:
    """Apply one random draw of the training augmentations to a clip.

    A single affine map (rotation, translation, isotropic scale) is drawn
    and applied to every frame so motion patterns survive; gamma,
    brightness, blur, and salt-and-pepper noise follow, then values are
    clamped to [0, 1].  With ``cfg.enabled`` false the clip is returned
    unchanged.  All randomness comes from ``rng``, drawn in a fixed order,
    so a given generator state fixes the result.
    """
    if not cfg.enabled:
        return clip
    t, h, w = clip.frames.shape
    angle = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
    tx = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * w
    ty = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * h
    scale = rng.uniform(*cfg.scale_range)
    gamma = rng.uniform(*cfg.gamma_range)
    brightness = rng.uniform(-cfg.brightness, cfg.brightness)
    sigma = rng.uniform(*cfg.blur_sigma)
    sp_rate = rng.uniform(0.0, cfg.salt_pepper)

    matrix = cv2.getRotationMatrix2D((w / 2.0 - 0.5, h / 2.0 - 0.5), angle, scale)
    matrix[0, 2] += tx
    matrix[1, 2] += ty

    frames = np.empty_like(clip.frames)
    for i in range(t):
        frames[i] = cv2.warpAffine(
            clip.frames[i], matrix, (w, h),
            flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE,
        )
    np.clip(frames, 0.0, 1.0, out=frames)
    frames **= np.float32(gamma)
    frames += np.float32(brightness)
    if sigma > 0:
        for i in range(t):
            frames[i] = cv2.GaussianBlur(frames[i], (0, 0), sigmaX=sigma, sigmaY=sigma)
    if sp_rate > 0:
        hit = rng.random(frames.shape) < sp_rate
        salt = rng.random(frames.shape) < 0.5
        frames[hit & salt] = 1.0
        frames[hit & ~salt] = 0.0
    np.clip(frames, 0.0, 1.0, out=frames)

    mask = None
    if clip.mask is not None:
        mask = np.stack(
            [
                cv2.warpAffine(m, matrix, (w, h), flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_CONSTANT)
                for m in clip.mask
            ]
        ).astype(clip.mask.dtype)
    return EchoClip(
        frames=frames,
        timestamps=clip.timestamps.copy(),
        fps=clip.fps,
        identifier=clip.identifier,
        label=clip.label,
        mask=mask,
    )
