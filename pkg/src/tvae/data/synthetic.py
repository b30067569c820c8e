"""Synthetic periodic grayscale videos with ground-truth anomaly masks.

Each video shows 2-4 dark elliptical chambers over brighter textured
tissue.  Chamber radii oscillate at a shared scene frequency (the two
ventricle-like chambers in phase, the atrium-like ones in anti-phase), the
whole scene may drift linearly, and frames are corrupted with Gaussian
noise before uint8 quantization.

Three anomaly types perturb the clean scene, each scaled by a severity in
[0, 1] that degenerates to the normal scene at 0:

* ``wall-gap``: the tissue wall between the first two chambers is erased
  inside a capsule whose width grows with severity.
* ``dilation``: the second chamber's semi-axes grow by up to 50%.
* ``displacement``: the chamber content jumps by a random direction
  mid-video and stays shifted.

Masks are computed by differencing the clean anomalous rendering against
the clean normal rendering of the same scene, so they are correct by
construction for every anomaly type.  Randomness is split into three
child streams per video (scene, anomaly, noise), which makes a severity-0
anomaly byte-identical to the normal video generated with the same seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .manifest import DatasetManifest, ManifestEntry
from .video import RawVideo, write_video

ANOMALY_TYPES = ("none", "wall-gap", "dilation", "displacement")

# Chamber layout in scene coordinates ([-1, 1]^2): center, semi-axes, and
# radial oscillation amplitude.  The first two are the large in-phase pair;
# the last two oscillate in anti-phase with smaller amplitude.
_LAYOUT = (
    ((-0.40, 0.32), (0.30, 0.38), +0.22),
    ((+0.40, 0.30), (0.26, 0.34), +0.22),
    ((-0.34, -0.42), (0.22, 0.20), -0.12),
    ((+0.36, -0.44), (0.20, 0.18), -0.12),
)

_TISSUE = 0.60
_VIGNETTE = 0.12
_BLOOD = 0.10
_TEXTURE_AMP = 0.18
_N_TEXTURE_WAVES = 6
_EDGE_WIDTH = 0.08
_MASK_THRESHOLD = 0.02


@dataclass
class SyntheticSpec:
    """Parameters of one homogeneous batch of synthetic videos."""

    count: int = 1
    width: int = 40
    height: int = 40
    fps: int = 25
    num_frames: int = 75
    heart_rate: tuple[float, float] = (0.9, 1.8)
    phase: tuple[float, float] = (0.0, 2.0 * np.pi)
    drift_speed: tuple[float, float] = (0.0, 0.04)
    num_chambers: tuple[int, int] = (2, 4)
    chamber_scale: tuple[float, float] = (0.85, 1.15)
    noise: float = 0.04
    anomaly: str = "none"
    severity: tuple[float, float] = (1.0, 1.0)
    anomaly_fraction: float = 1.0

    def validate(self) -> "SyntheticSpec":
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if self.width < 8 or self.height < 8:
            raise ConfigError("frames must be at least 8x8")
        if not (0 < self.fps < 2**16):
            raise ConfigError("fps must be a positive integer below 65536")
        if self.num_frames < 1:
            raise ConfigError("num_frames must be >= 1")
        if self.anomaly not in ANOMALY_TYPES:
            raise ConfigError(f"unknown anomaly type {self.anomaly!r}; expected one of {ANOMALY_TYPES}")
        lo, hi = self.num_chambers
        if not (2 <= lo <= hi <= len(_LAYOUT)):
            raise ConfigError(f"num_chambers must lie within [2, {len(_LAYOUT)}]")
        for name in ("heart_rate", "phase", "drift_speed", "chamber_scale", "severity"):
            a, b = getattr(self, name)
            if not (np.isfinite(a) and np.isfinite(b) and a <= b):
                raise ConfigError(f"{name} must be a finite (low, high) pair")
        if self.heart_rate[0] <= 0:
            raise ConfigError("heart_rate must be positive")
        if not (0.0 <= self.severity[0] and self.severity[1] <= 1.0):
            raise ConfigError("severity must lie in [0, 1]")
        if not (0.0 <= self.anomaly_fraction <= 1.0):
            raise ConfigError("anomaly_fraction must lie in [0, 1]")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        return self

    @property
    def n_anomalous(self) -> int:
        if self.anomaly == "none":
            return 0
        return int(round(self.count * self.anomaly_fraction))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        for key in ("heart_rate", "phase", "drift_speed", "num_chambers", "chamber_scale", "severity"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise ConfigError(f"bad synthetic spec: {exc}") from exc


@dataclass
class _Scene:
    """One sampled scene: frequency, phase, drift, texture, chambers."""

    f: float
    phase: float
    drift: np.ndarray  # (2,) scene units per second
    waves: np.ndarray  # (k, 4): amplitude, wx, wy, psi
    centers: np.ndarray  # (n, 2)
    axes: np.ndarray  # (n, 2)
    osc: np.ndarray  # (n,)


def _sample_scene(spec: SyntheticSpec, rng: np.random.Generator) -> _Scene:
    f = rng.uniform(*spec.heart_rate)
    phase = rng.uniform(*spec.phase)
    speed = rng.uniform(*spec.drift_speed)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    n = int(rng.integers(spec.num_chambers[0], spec.num_chambers[1] + 1))
    waves = np.column_stack(
        [
            rng.uniform(0.5, 1.0, _N_TEXTURE_WAVES),
            rng.uniform(3.0, 12.0, _N_TEXTURE_WAVES),
            rng.uniform(3.0, 12.0, _N_TEXTURE_WAVES),
            rng.uniform(0.0, 2.0 * np.pi, _N_TEXTURE_WAVES),
        ]
    )
    centers, axes, osc = [], [], []
    # Draw for every layout slot so the stream advances identically no
    # matter how many chambers the scene keeps.
    for (cx, cy), (ax, ay), amp in _LAYOUT:
        jx, jy = rng.uniform(-0.05, 0.05, 2)
        scale = rng.uniform(*spec.chamber_scale)
        sx, sy = rng.uniform(0.9, 1.1, 2)
        osc_jitter = rng.uniform(0.8, 1.2)
        centers.append((cx + jx, cy + jy))
        axes.append((ax * scale * sx, ay * scale * sy))
        osc.append(amp * osc_jitter)
    return _Scene(
        f=f,
        phase=phase,
        drift=speed * np.array([np.cos(angle), np.sin(angle)]),
        waves=waves,
        centers=np.array(centers[:n]),
        axes=np.array(axes[:n]),
        osc=np.array(osc[:n]),
    )


@dataclass
class _AnomalyState:
    kind: str
    severity: float
    jump: np.ndarray  # (2,) displacement offset, zero unless kind == displacement


def _sample_anomaly(spec: SyntheticSpec, rng: np.random.Generator) -> _AnomalyState:
    severity = rng.uniform(*spec.severity)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    jump = np.zeros(2)
    if spec.anomaly == "displacement":
        jump = 0.25 * severity * np.array([np.cos(angle), np.sin(angle)])
    return _AnomalyState(kind=spec.anomaly, severity=severity, jump=jump)


def _grid(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    ys = np.linspace(-1.0, 1.0, spec.height)
    xs = np.linspace(-1.0, 1.0, spec.width)
    return np.meshgrid(xs, ys)


def _texture(scene: _Scene, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for a, wx, wy, psi in scene.waves:
        out += a * np.sin(wx * x + wy * y + psi)
    return out / scene.waves[:, 0].sum()


def _ellipse_alpha(x, y, center, axes) -> np.ndarray:
    s = np.sqrt(((x - center[0]) / axes[0]) ** 2 + ((y - center[1]) / axes[1]) ** 2)
    return np.clip((1.0 + _EDGE_WIDTH / 2.0 - s) / _EDGE_WIDTH, 0.0, 1.0)


def _capsule_alpha(x, y, p0, p1, radius) -> np.ndarray:
    if radius <= 0.0:
        return np.zeros_like(x)
    d = p1 - p0
    denom = float(d @ d)
    if denom == 0.0:
        t = np.zeros_like(x)
    else:
        t = np.clip(((x - p0[0]) * d[0] + (y - p0[1]) * d[1]) / denom, 0.0, 1.0)
    dist = np.sqrt((x - (p0[0] + t * d[0])) ** 2 + (y - (p0[1] + t * d[1])) ** 2)
    return np.clip((radius + _EDGE_WIDTH / 2.0 - dist) / _EDGE_WIDTH, 0.0, 1.0)


def _render_frame(
    spec: SyntheticSpec,
    scene: _Scene,
    x: np.ndarray,
    y: np.ndarray,
    t: float,
    anom: _AnomalyState | None,
) -> np.ndarray:
    """Clean (noise-free) float frame at time ``t`` seconds."""
    offset = scene.drift * t
    if anom is not None and anom.kind == "displacement" and t >= 0.5 * (spec.num_frames - 1) / spec.fps:
        offset = offset + anom.jump
    xs, ys = x - offset[0], y - offset[1]
    frame = (_TISSUE - _VIGNETTE * (x**2 + y**2)) * (1.0 + _TEXTURE_AMP * _texture(scene, xs, ys))
    pulse = np.sin(2.0 * np.pi * scene.f * t + scene.phase)
    centers = scene.centers + offset
    axes = scene.axes * (1.0 + scene.osc * pulse)[:, None]
    if anom is not None and anom.kind == "dilation":
        axes = axes.copy()
        axes[1] *= 1.0 + 0.5 * anom.severity
    for center, ax in zip(centers, axes):
        alpha = _ellipse_alpha(x, y, center, ax)
        frame = frame * (1.0 - alpha) + _BLOOD * alpha
    if anom is not None and anom.kind == "wall-gap":
        alpha = _capsule_alpha(x, y, centers[0], centers[1], 0.2 * anom.severity)
        frame = frame * (1.0 - alpha) + _BLOOD * alpha
    return np.clip(frame, 0.0, 1.0)


def _render_video(spec: SyntheticSpec, scene: _Scene, anom: _AnomalyState | None) -> tuple[np.ndarray, np.ndarray]:
    """Render clean anomalous frames plus the ground-truth mask stack."""
    x, y = _grid(spec)
    frames = np.empty((spec.num_frames, spec.height, spec.width))
    masks = np.zeros((spec.num_frames, spec.height, spec.width), dtype=np.uint8)
    for j in range(spec.num_frames):
        t = j / spec.fps
        frame = _render_frame(spec, scene, x, y, t, anom)
        frames[j] = frame
        if anom is not None:
            clean = _render_frame(spec, scene, x, y, t, None)
            masks[j] = (np.abs(frame - clean) > _MASK_THRESHOLD).astype(np.uint8)
    return frames, masks


def generate_synthetic(spec: SyntheticSpec, rng: np.random.Generator, name_prefix: str = "synth") -> list[RawVideo]:
    """Generate ``spec.count`` videos, the first ``n_anomalous`` perturbed.

    Each video consumes three child streams spawned from ``rng`` (scene,
    anomaly, noise), so the normal content of an anomalous video matches
    the normal video generated at the same position with the same seed.
    """
    spec.validate()
    videos = []
    n_anom = spec.n_anomalous
    for i in range(spec.count):
        g_scene, g_anom, g_noise = rng.spawn(3)
        scene = _sample_scene(spec, g_scene)
        anomalous = i < n_anom
        anom = _sample_anomaly(spec, g_anom) if anomalous else None
        frames, masks = _render_video(spec, scene, anom)
        if spec.noise > 0:
            frames = frames + g_noise.normal(0.0, spec.noise, frames.shape)
        frames_u8 = np.clip(np.rint(np.clip(frames, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
        videos.append(
            RawVideo(
                frames=frames_u8,
                fps=float(spec.fps),
                identifier=f"{name_prefix}-{i:04d}",
                label=spec.anomaly if anomalous else "normal",
                mask=masks if anomalous else None,
            )
        )
    return videos


def build_dataset(sections: list[tuple[str, SyntheticSpec]], out_dir, seed: int) -> DatasetManifest:
    """Generate a full benchmark dataset and write it to ``out_dir``.

    ``sections`` pairs a split name with a spec.  Videos are written as
    TVAEVID1 containers named after their identifiers, and a validated
    manifest is saved alongside.  The output is a pure function of
    ``sections`` and ``seed``: rerunning produces byte-identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for section_idx, (split, spec) in enumerate(sections):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(section_idx,)))
        prefix = f"{split}-{section_idx:02d}"
        for video in generate_synthetic(spec, rng, name_prefix=prefix):
            filename = f"{video.identifier}.tvv"
            write_video(out_dir / filename, video)
            entries.append(
                ManifestEntry(path=filename, identifier=video.identifier, label=video.label, split=split)
            )
    manifest = DatasetManifest(entries=entries, seed=seed)
    manifest.save(out_dir)
    spec_record = {
        "seed": seed,
        "sections": [{"split": split, **spec.to_dict()} for split, spec in sections],
    }
    (out_dir / "synth_spec.json").write_text(json.dumps(spec_record, indent=2, sort_keys=True) + "\n")
    return manifest


def sections_from_dict(raw: dict) -> tuple[list[tuple[str, SyntheticSpec]], int | None]:
    """Parse the JSON dataset description used by the command line.

    An optional top-level ``defaults`` object supplies spec fields shared
    by every section; section entries override.
    """
    if "sections" not in raw or not isinstance(raw["sections"], list) or not raw["sections"]:
        raise ConfigError("dataset spec needs a non-empty 'sections' list")
    defaults = raw.get("defaults", {})
    if not isinstance(defaults, dict) or "split" in defaults:
        raise ConfigError("'defaults' must be an object of spec fields (without a 'split')")
    sections = []
    for entry in raw["sections"]:
        entry = {**defaults, **entry}
        split = entry.pop("split", None)
        if not split:
            raise ConfigError("each section needs a 'split' name")
        sections.append((split, SyntheticSpec.from_dict(entry)))
    seed = raw.get("seed")
    return sections, seed
