"""Convolutional encoder and decoder backbones.

Both networks use GroupNorm (batch-independent, so evaluation is
deterministic regardless of batch composition) and SiLU activations
(smooth everywhere, which keeps the loss surface friendly to the
finite-difference gradient checks used in the tests).
"""

from __future__ import annotations

import torch
from torch import nn


def _norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(num_groups=min(8, channels), num_channels=channels)


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with a (projected) skip connection."""

    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        self.norm1 = _norm(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.norm2 = _norm(c_out)
        self.act = nn.SiLU()
        if c_in != c_out or stride != 1:
            self.skip = nn.Conv2d(c_in, c_out, 1, stride=stride)
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        h = self.act(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return self.act(h + self.skip(x))


class ResidualEncoder(nn.Module):
    """Stem convolution plus one stride-2 residual block per width.

    The input is (B, C, H, W) with C either the clip length (trajectory
    variants treat frames as channels) or 1 (frame-wise baseline).  The
    output is the flattened feature map of size ``out_dim``.
    """

    def __init__(self, in_channels: int, widths: tuple[int, ...], image_size: int):
        super().__init__()
        self.stem = nn.Sequential(nn.Conv2d(in_channels, widths[0], 3, padding=1), _norm(widths[0]), nn.SiLU())
        blocks = []
        prev = widths[0]
        for w in widths:
            blocks.append(ResidualBlock(prev, w, stride=2))
            prev = w
        self.blocks = nn.Sequential(*blocks)
        self.feature_size = image_size // (2 ** len(widths))
        self.out_dim = widths[-1] * self.feature_size**2

    def forward(self, x):
        h = self.blocks(self.stem(x))
        return h.flatten(1)


class LatentHeads(nn.Module):
    """Linear heads mapping encoder features to latent parameters.

    The spatial head yields mean and scale of the code distribution
    (scale through softplus with a small floor so it stays positive).
    The temporal head, when present, yields frequency through softplus
    (strictly positive), phase through ``2*pi*sigmoid`` (inside one
    period), and optionally an unconstrained drift velocity.
    """

    def __init__(self, in_dim: int, latent_dim: int, n_temporal: int):
        super().__init__()
        self.latent_dim = latent_dim
        self.n_temporal = n_temporal
        self.spatial = nn.Linear(in_dim, 2 * latent_dim)
        self.temporal = nn.Linear(in_dim, n_temporal) if n_temporal else None
        if self.temporal is not None:
            with torch.no_grad():
                # Zero-init so every clip starts from the same trajectory
                # parameters (f near 1.3 Hz, a common phase, zero drift).
                # With random projections each clip gets its own arbitrary
                # phase, the oscillation decorrelates from the data, and
                # the cheapest descent direction is freezing f at 0, which
                # turns the trajectory into a constant the spatial code
                # absorbs; from a shared starting phase the aligned
                # gradient is live from the first step.
                self.temporal.weight.zero_()
                self.temporal.bias.zero_()
                self.temporal.bias[0] = 0.87

    def forward(self, features):
        mu, raw_scale = self.spatial(features).chunk(2, dim=-1)
        sigma = nn.functional.softplus(raw_scale) + 1e-6
        if self.temporal is None:
            return mu, sigma, None, None, None
        temporal = self.temporal(features)
        f = nn.functional.softplus(temporal[:, 0])
        omega = 2.0 * torch.pi * torch.sigmoid(temporal[:, 1])
        v = temporal[:, 2] if self.n_temporal > 2 else None
        return mu, sigma, f, omega, v


class DeconvDecoder(nn.Module):
    """Latent point to one grayscale frame via transposed convolutions.

    A linear layer seeds the coarsest feature map; each stage doubles the
    resolution; a final 3x3 convolution plus sigmoid produces a frame in
    [0, 1].  ``calls`` counts forward passes, which lets callers verify
    that an optimization loop never touched the decoder.
    """

    def __init__(self, latent_dim: int, widths: tuple[int, ...], image_size: int):
        super().__init__()
        self.image_size = image_size
        self.base_size = image_size // (2 ** len(widths))
        rev = list(reversed(widths))
        self.base_channels = rev[0]
        self.fc = nn.Linear(latent_dim, self.base_channels * self.base_size**2)
        chans = rev[1:] + [max(rev[-1] // 2, 4)]
        stages = []
        prev = self.base_channels
        for c in chans:
            stages += [nn.ConvTranspose2d(prev, c, 4, stride=2, padding=1), _norm(c), nn.SiLU()]
            prev = c
        self.stages = nn.Sequential(*stages)
        self.head = nn.Conv2d(prev, 1, 3, padding=1)
        self.calls = 0

    def forward(self, z):
        self.calls += 1
        h = self.fc(z).view(-1, self.base_channels, self.base_size, self.base_size)
        h = self.stages(h)
        return torch.sigmoid(self.head(h)).squeeze(1)
