"""Configuration dataclasses for training, preprocessing, and restoration.

All configs serialize to plain JSON dicts (``to_dict``/``from_dict``) so
they can be embedded in checkpoints and run metadata and round-trip
exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from .errors import ConfigError

VARIANTS = ("tvae-c", "tvae-r", "tvae-s", "tae-c", "tae-r", "tae-s", "vae")

_TRAJECTORY_OF = {"c": "circular", "r": "rotated", "s": "spiral"}


@dataclass
class AugmentConfig:
    """Ranges for the stochastic training augmentations.

    The affine component (rotation, translation, isotropic scale) is drawn
    once per clip and shared by all frames so temporal structure is
    preserved; the photometric components likewise use a single draw per
    clip.  All magnitudes are half-ranges around identity.
    """

    enabled: bool = True
    rotation_deg: float = 10.0
    translate_frac: float = 0.05
    scale_range: tuple[float, float] = (0.9, 1.1)
    brightness: float = 0.1
    gamma_range: tuple[float, float] = (0.8, 1.25)
    blur_sigma: tuple[float, float] = (0.0, 1.0)
    salt_pepper: float = 0.01

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentConfig":
        d = dict(d)
        for key in ("scale_range", "gamma_range", "blur_sigma"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class ModelConfig:
    """Architecture and optimization settings for one model.

    The literal defaults are the reference values for the full-size
    clinical setting: latent dimension 64, 25 frames at 128x128, Adam at
    learning rate 1e-4, batch size 64 for trajectory variants and 128
    frames for the frame-wise baseline, unit KL weight.  The ``desk`` and
    ``mini`` presets shrink the spatial and latent sizes for CPU-scale
    experiments without touching the loss definition.

    ``temporal_warmup`` freezes the frequency/phase/drift head for the
    first N steps so the decoder and spatial code settle on the static
    content before the trajectory parameters move; otherwise the easiest
    way to explain a misphased oscillation is to freeze it (f -> 0) and
    absorb it into the spatial code, which kills the temporal model.
    """

    variant: str = "tvae-s"
    latent_dim: int = 64
    frames: int = 25
    height: int = 128
    width: int = 128
    fps: float = 12.0
    enc_widths: tuple[int, ...] = (32, 64, 128, 256)
    beta: float = 1.0
    learning_rate: float = 1e-4
    batch_size: int | None = None
    steps: int = 5000
    snapshot_every: int = 1000
    temporal_warmup: int = 0
    seed: int | None = None
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    warm_start: str | None = None

    # --- derived properties -------------------------------------------------

    @property
    def is_framewise(self) -> bool:
        return self.variant == "vae"

    @property
    def is_stochastic(self) -> bool:
        """Whether the posterior over the spatial code is sampled.

        The tae-* variants share the tvae code path but use the posterior
        mean as a point mass and drop the KL term from the loss.
        """
        return not self.variant.startswith("tae-")

    @property
    def trajectory_variant(self) -> str | None:
        """circular / rotated / spiral, or None for the frame-wise baseline."""
        if self.is_framewise:
            return None
        return _TRAJECTORY_OF[self.variant[-1]]

    @property
    def has_drift(self) -> bool:
        return self.trajectory_variant == "spiral"

    @property
    def resolved_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 128 if self.is_framewise else 64

    @property
    def latent_parameter_count(self) -> int:
        """Number of scalar latent parameters inferred per clip.

        Trajectory variants use d for the spatial code plus f and omega
        (plus v for the spiral); the frame-wise baseline uses d per frame.
        """
        if self.is_framewise:
            return self.frames * self.latent_dim
        return self.latent_dim + (3 if self.has_drift else 2)

    @property
    def kl_weight(self) -> float:
        return self.beta if self.is_stochastic else 0.0

    # --- validation ---------------------------------------------------------

    def validate(self) -> "ModelConfig":
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        if not self.is_framewise and self.trajectory_variant == "circular" and self.latent_dim < 2:
            raise ConfigError("circular variants need latent_dim >= 2")
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if self.height != self.width:
            raise ConfigError("only square frames are supported")
        divisor = 2 ** len(self.enc_widths)
        if self.height % divisor != 0 or self.height // divisor < 2:
            raise ConfigError(
                f"frame size {self.height} incompatible with {len(self.enc_widths)} "
                f"stride-2 stages (must be a multiple of {divisor}, quotient >= 2)"
            )
        if len(self.enc_widths) < 1 or any(w < 1 for w in self.enc_widths):
            raise ConfigError("enc_widths must be a non-empty tuple of positive ints")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if self.learning_rate <= 0 or not math.isfinite(self.learning_rate):
            raise ConfigError("learning_rate must be finite and > 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.temporal_warmup < 0:
            raise ConfigError("temporal_warmup must be >= 0")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if self.fps <= 0:
            raise ConfigError("fps must be > 0")
        return self

    # --- presets ------------------------------------------------------------

    @classmethod
    def full(cls, variant: str = "tvae-s", **overrides) -> "ModelConfig":
        """Reference full-size configuration."""
        return replace(cls(variant=variant), **overrides).validate()

    @classmethod
    def desk(cls, variant: str = "tvae-s", **overrides) -> "ModelConfig":
        """CPU-scale configuration used by the synthetic benchmark."""
        cfg = cls(
            variant=variant,
            latent_dim=16,
            height=32,
            width=32,
            enc_widths=(16, 32, 64),
            learning_rate=1e-3,
            batch_size=64 if variant == "vae" else 4,
            steps=5000,
            snapshot_every=500,
            temporal_warmup=500,
        )
        return replace(cfg, **overrides).validate()

    @classmethod
    def mini(cls, variant: str = "tvae-s", **overrides) -> "ModelConfig":
        """Tiny configuration for numerical tests (gradient checks)."""
        cfg = cls(
            variant=variant,
            latent_dim=4,
            frames=5,
            height=16,
            width=16,
            enc_widths=(8, 16),
            learning_rate=1e-3,
            batch_size=2,
            steps=50,
            snapshot_every=25,
        )
        return replace(cfg, **overrides).validate()

    # --- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enc_widths"] = list(self.enc_widths)
        d["augment"] = self.augment.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "enc_widths" in d:
            d["enc_widths"] = tuple(d["enc_widths"])
        if "augment" in d:
            d["augment"] = AugmentConfig.from_dict(d["augment"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad model config: {exc}") from exc


PRESETS = {"full": ModelConfig.full, "desk": ModelConfig.desk, "mini": ModelConfig.mini}


@dataclass
class MapConfig:
    """Settings for MAP restoration of a clip toward the healthy manifold.

    ``variant`` selects the objective. The default ``full_elbo`` maximizes
    the evidence bound minus a total-variation penalty on the perturbation
    (reparameterization noise is drawn once, shared across the batch, and
    held fixed across steps so the objective is deterministic);
    restorations stay anchored to what the decoder can actually produce,
    which is what separates anomalous clips. ``fast_kl`` drops the
    reconstruction term — maximizing ``-tv_weight * TV(Y - X) - KL`` — and
    never touches the decoder inside the loop, trading anchoring for
    speed. ``threshold`` is an optional decision threshold on the anomaly
    score and is unset by default.
    """

    variant: str = "full_elbo"
    steps: int = 100
    step_size: float = 0.01
    tv_weight: float = 0.001
    threshold: float | None = None

    def validate(self) -> "MapConfig":
        if self.variant not in ("fast_kl", "full_elbo"):
            raise ConfigError(f"unknown MAP variant {self.variant!r}")
        if self.steps < 0:
            raise ConfigError("MAP steps must be >= 0")
        if self.step_size <= 0:
            raise ConfigError("MAP step_size must be > 0")
        if self.tv_weight < 0:
            raise ConfigError("MAP tv_weight must be >= 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MapConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad MAP config: {exc}") from exc


@dataclass
class PreprocessParams:
    """Frame-level preprocessing applied before clip extraction.

    Frames are resized to ``target_size`` square with bilinear
    interpolation, histogram-equalized per frame over 256 bins, and scaled
    to [0, 1].  Clip extraction subsamples to ``target_fps`` and cuts
    windows of ``clip_frames`` frames.
    """

    target_size: int = 128
    equalize: bool = True
    target_fps: float = 12.0
    clip_frames: int = 25

    def validate(self) -> "PreprocessParams":
        if self.target_size < 2:
            raise ConfigError("target_size must be >= 2")
        if self.target_fps <= 0:
            raise ConfigError("target_fps must be > 0")
        if self.clip_frames < 1:
            raise ConfigError("clip_frames must be >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessParams":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad preprocessing params: {exc}") from exc
