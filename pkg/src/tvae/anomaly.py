"""MAP restoration of clips toward the healthy manifold, and anomaly scores.

Given a trained model and a possibly anomalous clip Y, restoration seeks
the healthy clip X maximizing the posterior objective

    J(X) = -tv_weight * TV(Y - X) + model_term(X)

where ``model_term`` is the single-sample ELBO for ``full_elbo`` (the
default; reparameterization noise drawn once, shared across the batch,
and held fixed, so the objective is deterministic across steps) or
``-KL(q(b|X) || p(b))`` for the ``fast_kl`` screening variant (no
decoder evaluations inside the loop).  The TV term is
the total-variation norm of the perturbation Y - X: large residuals are
cheap only if they are spatially and temporally coherent, which is what
separates structural anomalies from noise.

Optimization runs Adam directly on the pixels of X, initialized at the
model's deterministic reconstruction of Y.  Pixels are unconstrained
during optimization; the restored clip is clamped to [0, 1] only for
rendering.  The anomaly score is the mean squared perturbation magnitude
per frame,

    alpha(Y) = (1/T) * sum_j ||y_j - x_j||^2,

computed from the raw (unclamped) perturbation, and the heatmap is the
temporal mean of the perturbation, in which incoherent noise cancels but
persistent structural differences accumulate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import MapConfig
from .data.video import EchoClip, RawVideo, read_float_stack, write_float_stack, write_video
from .errors import DataError, NumericError
from .model.tvae import TrajectoryVae

# Charbonnier smoothing used inside the MAP objective so the TV gradient
# is defined where the perturbation is flat; the public norm is exact.
MAP_SMOOTH_EPS = 1e-8


def _central_diff_torch(x: torch.Tensor, axis: int) -> torch.Tensor:
    n = x.shape[axis]
    idx = torch.arange(n, device=x.device)
    return x.index_select(axis, (idx + 1).clamp(max=n - 1)) - x.index_select(axis, (idx - 1).clamp(min=0))


def _tv_batched(x: torch.Tensor, smooth_eps: float = 0.0) -> torch.Tensor:
    """Total variation per clip for a batch (B, T, H, W) -> (B,)."""
    grads = [_central_diff_torch(x, axis) for axis in (1, 2, 3)]
    if smooth_eps > 0.0:
        mags = [torch.sqrt(g**2 + smooth_eps**2) for g in grads]
    else:
        mags = [g.abs() for g in grads]
    return sum(m.sum(dim=(1, 2, 3)) for m in mags)


def tv_norm(volume, smooth_eps: float = 0.0):
    """Total-variation norm of a (T, H, W) volume.

    The norm is the sum over voxels of the l1 norm of the
    central-difference gradient (time, vertical, horizontal), with edge
    values replicated so a constant volume scores exactly zero.  Accepts
    a numpy array (returns float) or a torch tensor (returns a scalar
    tensor, differentiable).  ``smooth_eps`` replaces each |g| with
    sqrt(g^2 + eps^2).
    """
    if isinstance(volume, torch.Tensor):
        if volume.ndim != 3:
            raise DataError(f"tv_norm expects (T, H, W), got shape {tuple(volume.shape)}")
        return _tv_batched(volume[None], smooth_eps)[0]
    x = np.asarray(volume, dtype=np.float64)
    if x.ndim != 3 or 0 in x.shape:
        raise DataError(f"tv_norm expects a non-empty (T, H, W) array, got shape {x.shape}")
    total = 0.0
    for axis in range(3):
        n = x.shape[axis]
        idx = np.arange(n)
        g = x.take(np.minimum(idx + 1, n - 1), axis=axis) - x.take(np.maximum(idx - 1, 0), axis=axis)
        if smooth_eps > 0.0:
            total += float(np.sqrt(g**2 + smooth_eps**2).sum())
        else:
            total += float(np.abs(g).sum())
    return total


def anomaly_score(perturbation: np.ndarray) -> float:
    """Mean per-frame squared magnitude of the perturbation."""
    p = np.asarray(perturbation, dtype=np.float64)
    if p.ndim != 3:
        raise DataError(f"perturbation must be (T, H, W), got shape {p.shape}")
    return float(np.mean(np.sum(p**2, axis=(1, 2))))


def perturbation_heatmap(perturbation: np.ndarray) -> np.ndarray:
    """Temporal mean of the perturbation; noise cancels, structure persists."""
    p = np.asarray(perturbation, dtype=np.float64)
    if p.ndim != 3:
        raise DataError(f"perturbation must be (T, H, W), got shape {p.shape}")
    return p.mean(axis=0).astype(np.float32)


@dataclass
class AnomalyResult:
    """Everything produced by restoring one clip."""

    identifier: str
    label: str
    score: float
    restored: EchoClip
    perturbation: np.ndarray  # (T, H, W) float32, raw (unclamped)
    heatmap: np.ndarray  # (H, W) float32
    trace: list[float]  # objective J at every step, length steps + 1
    map_config: MapConfig

    @property
    def decision(self) -> bool | None:
        """Score compared against the configured threshold, if any."""
        if self.map_config.threshold is None:
            return None
        return self.score > self.map_config.threshold


def _clips_tensor(clips: list[EchoClip], model: TrajectoryVae) -> torch.Tensor:
    c = model.config
    for clip in clips:
        if clip.frames.shape != (c.frames, c.height, c.width):
            raise DataError(
                f"clip {clip.identifier!r} has shape {clip.frames.shape}, model expects "
                f"({c.frames}, {c.height}, {c.width})"
            )
    dtype = next(model.parameters()).dtype
    return torch.from_numpy(np.stack([clip.frames for clip in clips])).to(dtype)


def _restore_chunk(clips: list[EchoClip], model: TrajectoryVae, cfg: MapConfig) -> list[AnomalyResult]:
    y = _clips_tensor(clips, model)
    n = len(clips)
    model.eval()
    with torch.no_grad():
        init, _ = model.reconstruct_tensors(y)
    x = init.clone().requires_grad_(True)
    optimizer = torch.optim.Adam([x], lr=cfg.step_size)
    saved_flags = [p.requires_grad for p in model.parameters()]
    model.requires_grad_(False)

    noise = None
    if cfg.variant == "full_elbo" and model.config.is_stochastic:
        lat_shape = (
            (1, model.config.frames, model.config.latent_dim)
            if model.config.is_framewise
            else (1, model.config.latent_dim)
        )
        # One shared draw, expanded over the batch: every clip sees the same
        # fixed reparameterization sample, so scores do not depend on how
        # clips are chunked into batches.
        noise = torch.randn(lat_shape, generator=torch.Generator().manual_seed(0), dtype=y.dtype)
        noise = noise.expand(n, *lat_shape[1:])

    def objective(xt: torch.Tensor) -> torch.Tensor:
        if cfg.variant == "fast_kl":
            model_term = -model.kl_tensors(model.encode_tensors(xt))
        else:
            terms = model.elbo_tensors(xt, noise=noise)
            model_term = terms.recon_term - terms.kl
        return model_term - cfg.tv_weight * _tv_batched(y - xt, MAP_SMOOTH_EPS)

    decoder_calls_at_start = model.decoder.calls
    traces = [[] for _ in range(n)]
    try:
        for step in range(cfg.steps):
            obj = objective(x)
            values = obj.detach()
            if not torch.isfinite(values).all():
                raise NumericError(
                    f"non-finite MAP objective at step {step}",
                    trace=[t[-5:] for t in traces],
                )
            for i in range(n):
                traces[i].append(float(values[i]))
            optimizer.zero_grad()
            (-obj.sum()).backward()
            optimizer.step()
        with torch.no_grad():
            final = objective(x)
    finally:
        for p, flag in zip(model.parameters(), saved_flags):
            p.requires_grad_(flag)
    if not torch.isfinite(final).all():
        raise NumericError("non-finite final MAP objective", trace=[t[-5:] for t in traces])
    for i in range(n):
        traces[i].append(float(final[i]))
    if cfg.variant == "fast_kl":
        # The initialization is the only permitted decoder use.
        assert model.decoder.calls == decoder_calls_at_start, "fast_kl touched the decoder"

    perturbations = (y - x).detach().numpy().astype(np.float32)
    restored_frames = x.detach().clamp(0.0, 1.0).numpy().astype(np.float32)
    results = []
    for i, clip in enumerate(clips):
        pert = perturbations[i]
        results.append(
            AnomalyResult(
                identifier=clip.identifier,
                label=clip.label,
                score=anomaly_score(pert),
                restored=EchoClip(
                    frames=restored_frames[i],
                    timestamps=clip.timestamps.copy(),
                    fps=clip.fps,
                    identifier=clip.identifier,
                    label=clip.label,
                ),
                perturbation=pert,
                heatmap=perturbation_heatmap(pert),
                trace=traces[i],
                map_config=cfg,
            )
        )
    return results


def map_restore_batch(
    clips: list[EchoClip],
    model: TrajectoryVae,
    cfg: MapConfig | None = None,
    chunk_size: int | None = None,
) -> list[AnomalyResult]:
    """Restore a batch of clips, chunked to bound memory.

    Adam's updates are element-wise and the objective separates over
    clips, so batched restoration matches clip-by-clip restoration.
    """
    cfg = (cfg or MapConfig()).validate()
    if not clips:
        raise DataError("no clips to restore")
    if chunk_size is None:
        chunk_size = 8 if model.config.is_framewise else 32
    results = []
    for start in range(0, len(clips), chunk_size):
        results.extend(_restore_chunk(clips[start : start + chunk_size], model, cfg))
    return results


def map_restore(clip: EchoClip, model: TrajectoryVae, cfg: MapConfig | None = None) -> AnomalyResult:
    """Restore a single clip (see module docstring for the objective)."""
    return map_restore_batch([clip], model, cfg)[0]


def score_reconstruction(clip: EchoClip, model: TrajectoryVae) -> float:
    """Reconstruction-error score: alpha of Y minus its deterministic reconstruction."""
    from .model.tvae import reconstruct

    recon = reconstruct(clip, model)
    return anomaly_score(clip.frames.astype(np.float64) - recon.frames.astype(np.float64))


# --- persistence and rendering -------------------------------------------------


def render_heatmap(heatmap: np.ndarray, path) -> None:
    """Write a PNG with a diverging colormap centred at zero."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    h = np.asarray(heatmap, dtype=np.float64)
    limit = max(float(np.abs(h).max()), 1e-12)
    plt.imsave(path, h, cmap="coolwarm", vmin=-limit, vmax=limit)


def save_result(result: AnomalyResult, directory) -> None:
    """Persist one restoration: JSON summary, float payloads, rendered PNG."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = directory / result.identifier
    summary = {
        "identifier": result.identifier,
        "label": result.label,
        "score": result.score,
        "decision": result.decision,
        "trace": result.trace,
        "map": result.map_config.to_dict(),
    }
    Path(f"{base}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_float_stack(f"{base}.perturbation.tvf", result.perturbation, fps=result.restored.fps)
    restored_u8 = np.clip(np.rint(result.restored.frames * 255.0), 0, 255).astype(np.uint8)
    write_video(
        f"{base}.restored.tvv",
        RawVideo(
            frames=restored_u8,
            fps=result.restored.fps,
            identifier=result.identifier,
            label=result.label,
        ),
    )
    render_heatmap(result.heatmap, f"{base}.heatmap.png")


def load_perturbation(directory, identifier: str) -> np.ndarray:
    """Read back the raw perturbation saved by ``save_result``."""
    path = Path(directory) / f"{identifier}.perturbation.tvf"
    frames, _ = read_float_stack(path)
    return frames
