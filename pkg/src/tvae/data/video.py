"""Video and clip types plus the binary container formats.

Raw videos are stacks of uint8 grayscale frames at a known frame rate,
optionally with a per-frame binary anomaly mask.  They are stored in a
little-endian container:

    magic ``TVAEVID1`` | u32 frame count | u32 height | u32 width |
    u16 fps | u8 has_mask | u8 frame payload (N*H*W bytes) |
    mask payload (N*H*W bytes, present iff has_mask)

Float-valued stacks (perturbations, heatmaps) use the sibling format
``TVAEFLT1`` with the same header followed by a float32 payload instead of
bytes; it has no mask.  Both round-trip bit-exactly.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError

VIDEO_MAGIC = b"TVAEVID1"
FLOAT_MAGIC = b"TVAEFLT1"

_HEADER = struct.Struct("<III H B")


@dataclass
class RawVideo:
    """A grayscale video with metadata.

    ``frames`` is (N, H, W), either uint8 or float32 in [0, 1] (the latter
    after preprocessing; only uint8 videos can be written to containers).
    ``mask`` marks anomalous pixels per frame with values in {0, 1}.
    """

    frames: np.ndarray
    fps: float
    identifier: str
    label: str = "normal"
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> "RawVideo":
        f = self.frames
        if not isinstance(f, np.ndarray) or f.ndim != 3 or 0 in f.shape:
            raise DataError(f"frames must be a non-empty (N, H, W) array, got {getattr(f, 'shape', None)}")
        if f.dtype == np.uint8:
            pass
        elif np.issubdtype(f.dtype, np.floating):
            if f.size and (float(f.min()) < 0.0 or float(f.max()) > 1.0):
                raise DataError("float frames must lie in [0, 1]")
        else:
            raise DataError(f"frames must be uint8 or float, got dtype {f.dtype}")
        if self.fps <= 0:
            raise DataError(f"fps must be > 0, got {self.fps}")
        if not self.identifier:
            raise DataError("identifier must be non-empty")
        if self.mask is not None:
            m = self.mask
            if m.shape != f.shape:
                raise DataError(f"mask shape {m.shape} must match frames {f.shape}")
            if m.dtype != np.uint8 or (m.size and int(m.max()) > 1):
                raise DataError("mask must be uint8 with values in {0, 1}")
        return self

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def is_anomalous(self) -> bool:
        return self.label != "normal"


@dataclass
class EchoClip:
    """A fixed-length float32 clip cut from a preprocessed video.

    ``frames`` is (T, H, W) float32 in [0, 1]; ``timestamps`` holds the
    frame times in seconds on the resampled time axis.
    """

    frames: np.ndarray
    timestamps: np.ndarray
    fps: float
    identifier: str = ""
    label: str = "normal"
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> "EchoClip":
        f = self.frames
        if not isinstance(f, np.ndarray) or f.ndim != 3 or 0 in f.shape:
            raise DataError(f"clip frames must be (T, H, W), got {getattr(f, 'shape', None)}")
        if f.dtype != np.float32:
            raise DataError(f"clip frames must be float32, got {f.dtype}")
        if f.size and (float(f.min()) < -1e-6 or float(f.max()) > 1.0 + 1e-6):
            raise DataError("clip frames must lie in [0, 1]")
        t = np.asarray(self.timestamps, dtype=np.float64)
        if t.shape != (f.shape[0],):
            raise DataError("timestamps must have one entry per frame")
        self.timestamps = t
        if self.fps <= 0:
            raise DataError("clip fps must be > 0")
        if self.mask is not None and self.mask.shape != f.shape:
            raise DataError("clip mask shape must match frames")
        return self

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


# --- uint8 container ---------------------------------------------------------


def write_video(path, video: RawVideo) -> None:
    """Write a uint8 video (and optional mask) to the TVAEVID1 container."""
    video.validate()
    if video.frames.dtype != np.uint8:
        raise DataError("only uint8 videos can be written to containers")
    fps = int(round(video.fps))
    if abs(fps - video.fps) > 1e-9 or not (0 < fps < 2**16):
        raise DataError(f"container fps must be a positive integer < 65536, got {video.fps}")
    n, h, w = video.frames.shape
    has_mask = 1 if video.mask is not None else 0
    with open(path, "wb") as fh:
        fh.write(VIDEO_MAGIC)
        fh.write(_HEADER.pack(n, h, w, fps, has_mask))
        fh.write(np.ascontiguousarray(video.frames).tobytes())
        if has_mask:
            fh.write(np.ascontiguousarray(video.mask).tobytes())


def read_video(path, identifier: str | None = None, label: str = "normal") -> RawVideo:
    """Read a TVAEVID1 container back into a RawVideo."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8 + _HEADER.size or raw[:8] != VIDEO_MAGIC:
        raise DataError(f"{path}: not a TVAEVID1 container")
    n, h, w, fps, has_mask = _HEADER.unpack_from(raw, 8)
    offset = 8 + _HEADER.size
    size = n * h * w
    expected = offset + size * (2 if has_mask else 1)
    if len(raw) != expected:
        raise DataError(f"{path}: truncated container ({len(raw)} bytes, expected {expected})")
    frames = np.frombuffer(raw, dtype=np.uint8, count=size, offset=offset).reshape(n, h, w).copy()
    mask = None
    if has_mask:
        mask = np.frombuffer(raw, dtype=np.uint8, count=size, offset=offset + size).reshape(n, h, w).copy()
    return RawVideo(
        frames=frames,
        fps=float(fps),
        identifier=identifier if identifier is not None else path.stem,
        label=label,
        mask=mask,
    )


# --- float32 container --------------------------------------------------------


def write_float_stack(path, frames: np.ndarray, fps: float = 12.0) -> None:
    """Write a float32 (T, H, W) stack to the TVAEFLT1 container."""
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3 or 0 in frames.shape:
        raise DataError(f"float stack must be (T, H, W), got shape {frames.shape}")
    fps_i = int(round(fps))
    if not (0 < fps_i < 2**16):
        raise DataError(f"container fps must be a positive integer < 65536, got {fps}")
    n, h, w = frames.shape
    with open(path, "wb") as fh:
        fh.write(FLOAT_MAGIC)
        fh.write(_HEADER.pack(n, h, w, fps_i, 0))
        fh.write(np.ascontiguousarray(frames).tobytes())


def read_float_stack(path) -> tuple[np.ndarray, float]:
    """Read a TVAEFLT1 container; returns (frames, fps)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8 + _HEADER.size or raw[:8] != FLOAT_MAGIC:
        raise DataError(f"{path}: not a TVAEFLT1 container")
    n, h, w, fps, _ = _HEADER.unpack_from(raw, 8)
    offset = 8 + _HEADER.size
    size = n * h * w
    if len(raw) != offset + 4 * size:
        raise DataError(f"{path}: truncated container")
    frames = np.frombuffer(raw, dtype="<f4", count=size, offset=offset).reshape(n, h, w).copy()
    return frames, float(fps)


# --- PGM import ----------------------------------------------------------------


def _read_pgm(path: Path) -> np.ndarray:
    """Read a single binary (P5) 8-bit PGM frame."""
    data = path.read_bytes()
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; pixel data starts after the single
    # whitespace byte following maxval.
    if not data.startswith(b"P5"):
        raise DataError(f"{path}: only binary (P5) PGM frames are supported")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)").match(data, pos)
        if m is None:
            raise DataError(f"{path}: malformed PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise DataError(f"{path}: only 8-bit PGM supported (maxval 255, got {maxval})")
    pos += 1  # single whitespace separator before the raster
    size = width * height
    if len(data) - pos < size:
        raise DataError(f"{path}: truncated PGM raster")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=pos).reshape(height, width).copy()


def import_pgm_dir(directory, fps: float, identifier: str | None = None, label: str = "normal") -> RawVideo:
    """Assemble a RawVideo from a directory of P5 PGM frames.

    Frames are ordered by sorted filename and must share one size.
    """
    directory = Path(directory)
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise DataError(f"{directory}: no .pgm frames found")
    frames = [_read_pgm(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DataError(f"{directory}: PGM frames disagree on size: {sorted(shapes)}")
    return RawVideo(
        frames=np.stack(frames),
        fps=fps,
        identifier=identifier if identifier is not None else directory.name,
        label=label,
    )
