"""The trajectory VAE model family and its clip-level operations.

A clip X = (x_1..x_T) is encoded as a whole (frames stacked as input
channels) into a posterior over a spatial code b plus point estimates of
the temporal parameters (frequency f, phase omega, and drift v for the
spiral variant).  The latent trajectory l(t) built from these parameters
is evaluated at the frame times t_j = j / fps and decoded frame by frame,
so a clip costs d + 2 (or d + 3) latent parameters instead of T * d.

The ELBO with a unit-variance Gaussian likelihood and standard normal
prior over b is

    E_q[log p(X | b, f, omega, v)] - KL(q(b|X) || p(b))
      = -1/2 * sum_j ||x_j - xhat_j||^2  - KL + const,

estimated with a single reparameterization sample.  The additive constant
is dropped throughout.  The ``vae`` variant is the frame-wise baseline:
each frame is encoded and decoded independently with its own code, which
costs T * d latent parameters per clip.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from ..config import ModelConfig
from ..data.video import EchoClip
from ..errors import ConfigError, DataError
from .networks import DeconvDecoder, LatentHeads, ResidualEncoder


class LatentTensors(NamedTuple):
    """Batched posterior parameters.

    ``mu``/``sigma`` are (B, d) for trajectory variants and (B, T, d) for
    the frame-wise baseline; ``f``/``omega``/``v`` are (B,) or None.
    """

    mu: torch.Tensor
    sigma: torch.Tensor
    f: torch.Tensor | None
    omega: torch.Tensor | None
    v: torch.Tensor | None


class ElboTensors(NamedTuple):
    recon_term: torch.Tensor  # (B,) expected log-likelihood up to a constant
    kl: torch.Tensor  # (B,) KL(q(b|X) || N(0, I))
    reconstruction: torch.Tensor  # (B, T, H, W)


@dataclass
class TrajectoryLatent:
    """Latent description of one clip, in numpy form."""

    variant: str  # circular | rotated | spiral | framewise
    mu_b: np.ndarray
    sigma_b: np.ndarray
    f: float | None = None
    omega: float | None = None
    v: float | None = None


@dataclass
class ElboTerms:
    recon_term: float
    kl: float

    @property
    def elbo(self) -> float:
        return self.recon_term - self.kl


def frame_times(config: ModelConfig, dtype=torch.float32, device=None) -> torch.Tensor:
    """Frame timestamps t_j = j / fps for a clip of the configured length."""
    return torch.arange(config.frames, dtype=dtype, device=device) / config.fps


class TrajectoryVae(nn.Module):
    """Encoder, latent heads, and decoder for one configuration.

    ``param_ranges`` holds the empirical min/max of the temporal
    parameters over the training set once the model has been trained (or
    loaded from a checkpoint); it drives prior sampling in ``generate``.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        in_channels = 1 if config.is_framewise else config.frames
        self.encoder = ResidualEncoder(in_channels, config.enc_widths, config.height)
        if config.is_framewise:
            n_temporal = 0
        else:
            n_temporal = 3 if config.has_drift else 2
        self.heads = LatentHeads(self.encoder.out_dim, config.latent_dim, n_temporal)
        self.decoder = DeconvDecoder(config.latent_dim, config.enc_widths, config.height)
        self.param_ranges: dict | None = None

    # --- tensor-level pieces -------------------------------------------------

    def _check_input(self, x: torch.Tensor) -> None:
        c = self.config
        if c.is_framewise:
            # frames are encoded independently, so any clip length works
            ok = x.ndim == 4 and x.shape[1] >= 1 and x.shape[2:] == (c.height, c.width)
            expected = f"(B, T, {c.height}, {c.width})"
        else:
            ok = x.ndim == 4 and x.shape[1:] == (c.frames, c.height, c.width)
            expected = f"(B, {c.frames}, {c.height}, {c.width})"
        if not ok:
            raise DataError(f"expected clips of shape {expected}, got {tuple(x.shape)}")

    def encode_tensors(self, x: torch.Tensor) -> LatentTensors:
        self._check_input(x)
        b, t = x.shape[:2]
        if self.config.is_framewise:
            feats = self.encoder(x.reshape(b * t, 1, *x.shape[2:]))
            mu, sigma, *_ = self.heads(feats)
            d = self.config.latent_dim
            return LatentTensors(mu.view(b, t, d), sigma.view(b, t, d), None, None, None)
        feats = self.encoder(x)
        return LatentTensors(*self.heads(feats))

    def sample_code(self, lat: LatentTensors, noise: torch.Tensor | None = None,
                    generator: torch.Generator | None = None) -> torch.Tensor:
        """One reparameterized sample of b (the posterior mean for tae-*)."""
        if not self.config.is_stochastic:
            return lat.mu
        if noise is None:
            noise = torch.randn(lat.mu.shape, generator=generator, dtype=lat.mu.dtype, device=lat.mu.device)
        return lat.mu + lat.sigma * noise

    def trajectory_points(self, lat: LatentTensors, code: torch.Tensor,
                          times: torch.Tensor | None = None) -> torch.Tensor:
        """Latent points z of shape (B, T, d) at the frame times."""
        if self.config.is_framewise:
            return code
        if times is None:
            times = frame_times(self.config, dtype=code.dtype, device=code.device)
        phase = 2.0 * torch.pi * lat.f[:, None] * times[None, :] - lat.omega[:, None]  # (B, T)
        cos, sin = torch.cos(phase), torch.sin(phase)
        variant = self.config.trajectory_variant
        if variant == "circular":
            z = code[:, None, :].expand(-1, times.numel(), -1).clone()
            z[..., 0] = z[..., 0] + cos
            z[..., 1] = z[..., 1] + sin
            return z
        first = (cos - sin)[..., None] + code[:, None, :1]
        rest = (cos + sin)[..., None] + code[:, None, 1:]
        z = torch.cat([first, rest], dim=-1)
        if variant == "spiral":
            z = z + (times[None, :] * lat.v[:, None])[..., None]
        return z

    def decode_frames(self, z: torch.Tensor) -> torch.Tensor:
        """Decode latent points (B, T, d) to frames (B, T, H, W) in one pass."""
        b, t, d = z.shape
        frames = self.decoder(z.reshape(b * t, d))
        return frames.view(b, t, self.config.height, self.config.width)

    def reconstruct_tensors(self, x: torch.Tensor, sample: bool = False,
                            noise: torch.Tensor | None = None,
                            generator: torch.Generator | None = None) -> tuple[torch.Tensor, LatentTensors]:
        lat = self.encode_tensors(x)
        code = self.sample_code(lat, noise, generator) if sample else lat.mu
        return self.decode_frames(self.trajectory_points(lat, code)), lat

    def kl_tensors(self, lat: LatentTensors) -> torch.Tensor:
        """Closed-form KL(q(b|X) || N(0, I)) per clip, shape (B,)."""
        per_dim = 0.5 * (lat.mu**2 + lat.sigma**2 - 1.0 - 2.0 * torch.log(lat.sigma))
        dims = tuple(range(1, per_dim.ndim))
        return per_dim.sum(dim=dims)

    def elbo_tensors(self, x: torch.Tensor, noise: torch.Tensor | None = None,
                     generator: torch.Generator | None = None) -> ElboTensors:
        """Single-sample ELBO terms per clip (constants dropped)."""
        lat = self.encode_tensors(x)
        code = self.sample_code(lat, noise, generator)
        recon = self.decode_frames(self.trajectory_points(lat, code))
        recon_term = -0.5 * ((x - recon) ** 2).sum(dim=(1, 2, 3))
        return ElboTensors(recon_term, self.kl_tensors(lat), recon)


# --- clip-level operations ---------------------------------------------------


def _clip_tensor(clip: EchoClip, model: TrajectoryVae) -> torch.Tensor:
    c = model.config
    if clip.frames.shape != (c.frames, c.height, c.width):
        raise DataError(
            f"clip shape {clip.frames.shape} does not match model ({c.frames}, {c.height}, {c.width})"
        )
    dtype = next(model.parameters()).dtype
    return torch.from_numpy(np.ascontiguousarray(clip.frames)).to(dtype)[None]


def _as_clip(frames: torch.Tensor, model: TrajectoryVae, identifier: str, label: str = "normal") -> EchoClip:
    arr = frames.detach().cpu().numpy().astype(np.float32)
    arr = np.clip(arr, 0.0, 1.0)
    t = model.config.frames
    return EchoClip(
        frames=arr,
        timestamps=np.arange(t, dtype=np.float64) / model.config.fps,
        fps=model.config.fps,
        identifier=identifier,
        label=label,
    )


def encode(clip: EchoClip, model: TrajectoryVae) -> TrajectoryLatent:
    """Posterior parameters for one clip (deterministic)."""
    model.eval()
    with torch.no_grad():
        lat = model.encode_tensors(_clip_tensor(clip, model))
    if model.config.is_framewise:
        return TrajectoryLatent(
            variant="framewise",
            mu_b=lat.mu[0].numpy().copy(),
            sigma_b=lat.sigma[0].numpy().copy(),
        )
    return TrajectoryLatent(
        variant=model.config.trajectory_variant,
        mu_b=lat.mu[0].numpy().copy(),
        sigma_b=lat.sigma[0].numpy().copy(),
        f=float(lat.f[0]),
        omega=float(lat.omega[0]),
        v=float(lat.v[0]) if lat.v is not None else None,
    )


def decode_frame(z: np.ndarray, model: TrajectoryVae) -> np.ndarray:
    """Decode a single latent point to one frame."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.config.latent_dim,):
        raise DataError(f"latent point must have shape ({model.config.latent_dim},), got {z.shape}")
    model.eval()
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        frame = model.decoder(torch.from_numpy(z).to(dtype)[None])
    return frame[0].numpy().astype(np.float32)


def reconstruct(clip: EchoClip, model: TrajectoryVae, sample: bool = False, seed: int = 0) -> EchoClip:
    """Reconstruct a clip through the latent trajectory.

    With ``sample=False`` the posterior mean code is used, which is the
    deterministic reconstruction every score in this package refers to.
    """
    model.eval()
    with torch.no_grad():
        generator = torch.Generator().manual_seed(seed)
        recon, _ = model.reconstruct_tensors(_clip_tensor(clip, model), sample=sample, generator=generator)
    return _as_clip(recon[0], model, clip.identifier, clip.label)


def elbo(clip: EchoClip, model: TrajectoryVae, seed: int = 0) -> ElboTerms:
    """Single-sample ELBO estimate for one clip.

    The reparameterization noise is drawn from a generator seeded with
    ``seed`` so repeated calls are reproducible.
    """
    model.eval()
    with torch.no_grad():
        generator = torch.Generator().manual_seed(seed)
        terms = model.elbo_tensors(_clip_tensor(clip, model), generator=generator)
    return ElboTerms(recon_term=float(terms.recon_term[0]), kl=float(terms.kl[0]))


def generate(model: TrajectoryVae, count: int, seed: int = 0) -> list[EchoClip]:
    """Sample clips from the model prior.

    The spatial code is drawn from N(0, I); the temporal parameters are
    drawn uniformly from the empirical ranges recorded at training time,
    which must be present on the model (``param_ranges``).
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    c = model.config
    ranges = model.param_ranges
    if not c.is_framewise:
        if not ranges or "f" not in ranges or "omega" not in ranges:
            raise ConfigError("model has no empirical temporal parameter ranges; train or load a trained checkpoint")
        if c.has_drift and "v" not in ranges:
            raise ConfigError("spiral model is missing the empirical drift range")
    model.eval()
    rng = np.random.default_rng(seed)
    dtype = next(model.parameters()).dtype
    clips = []
    with torch.no_grad():
        for i in range(count):
            if c.is_framewise:
                code = torch.from_numpy(rng.standard_normal((1, c.frames, c.latent_dim))).to(dtype)
                lat = LatentTensors(code, torch.ones_like(code), None, None, None)
            else:
                code = torch.from_numpy(rng.standard_normal((1, c.latent_dim))).to(dtype)
                f = torch.tensor([rng.uniform(*ranges["f"])], dtype=dtype)
                omega = torch.tensor([rng.uniform(*ranges["omega"])], dtype=dtype)
                v = torch.tensor([rng.uniform(*ranges["v"])], dtype=dtype) if c.has_drift else None
                lat = LatentTensors(code, torch.ones_like(code), f, omega, v)
            frames = model.decode_frames(model.trajectory_points(lat, code))
            clips.append(_as_clip(frames[0], model, identifier=f"gen-{i:04d}"))
    return clips
