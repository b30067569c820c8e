"""Reconstruction quality and detection quality metrics.

Reconstruction metrics (MSE, PSNR, SSIM) operate on videos or frames with
values in [0, 1].  Detection metrics (AUROC, average precision) operate on
scalar anomaly scores with binary labels; AUROC uses the rank formulation
with ties counted as half, so it is invariant to flipping which class is
called positive, while average precision is not and is therefore reported
for the orientation the caller asks for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

PSNR_CAP_DB = 99.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(mse_value: float) -> float:
    """Peak signal-to-noise ratio in dB for unit dynamic range, capped at 99."""
    if mse_value < 0:
        raise ValueError("MSE must be >= 0")
    if mse_value == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse_value), PSNR_CAP_DB))


def _gaussian_window(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _windowed_mean(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Valid-mode weighted means over all window positions.
    views = np.lib.stride_tricks.sliding_window_view(x, w.shape)
    return np.tensordot(views, w, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity for frames in [0, 1].

    Uses an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, dynamic
    range 1, evaluated at valid window positions only.  Accepts a single
    frame (H, W) or a video (T, H, W); for videos the per-frame SSIM
    values are averaged.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ValueError(f"expected (H, W) or (T, H, W), got shape {a.shape}")
    if a.shape[1] < _SSIM_WINDOW or a.shape[2] < _SSIM_WINDOW:
        raise ValueError(f"frames must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW}")
    w = _gaussian_window()
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    values = []
    for x, y in zip(a, b):
        mu_x = _windowed_mean(x, w)
        mu_y = _windowed_mean(y, w)
        var_x = _windowed_mean(x * x, w) - mu_x**2
        var_y = _windowed_mean(y * y, w) - mu_y**2
        cov = _windowed_mean(x * y, w) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        values.append(np.mean(num / den))
    return float(np.mean(values))


@dataclass
class ReconMetrics:
    mse: float
    psnr: float
    ssim: float

    def to_dict(self) -> dict:
        return {"mse": self.mse, "psnr": self.psnr, "ssim": self.ssim}


def reconstruction_metrics(original: np.ndarray, reconstruction: np.ndarray) -> ReconMetrics:
    m = mse(original, reconstruction)
    return ReconMetrics(mse=m, psnr=psnr(m), ssim=ssim(original, reconstruction))


def _binary_labels(labels, positive) -> np.ndarray:
    labels = np.asarray(labels)
    y = labels == positive
    if not y.any():
        raise ValueError(f"no samples labelled {positive!r}")
    if y.all():
        raise ValueError("need at least one negative sample")
    return y


def auroc(scores, labels, positive) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) formulation.

    Tied scores contribute 1/2 through midranks.  Higher scores are taken
    to indicate the positive class; because the rank statistic is
    symmetric, flipping the positive class gives 1 - AUROC, which equals
    the AUROC of the negated scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = _binary_labels(labels, positive)
    if scores.shape != y.shape:
        raise ValueError("scores and labels must have the same length")
    ranks = rankdata(scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels, positive) -> float:
    """Interpolation-free average precision with tie-aware thresholds.

    AP = sum over distinct score thresholds (descending) of
    delta-recall * precision.  Samples sharing a score enter together, so
    a constant score vector yields AP equal to the positive prevalence.
    Unlike AUROC this is not symmetric under flipping the positive class;
    callers wanting the flipped orientation should negate the scores.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = _binary_labels(labels, positive)
    if scores.shape != y.shape:
        raise ValueError("scores and labels must have the same length")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = y[order].astype(np.float64)
    # Group indices where a new distinct score starts; cumulative counts at
    # the end of each group define the operating points.
    boundaries = np.nonzero(np.diff(s))[0]
    group_ends = np.append(boundaries, s.size - 1)
    tp = np.cumsum(t)[group_ends]
    counts = group_ends + 1.0
    precision = tp / counts
    recall_steps = np.diff(np.concatenate(([0.0], tp))) / y.sum()
    return float(np.sum(recall_steps * precision))


@dataclass
class DetectionMetrics:
    auroc: float
    ap: float
    ap_flipped: float
    n_positive: int
    n_negative: int

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "ap": self.ap,
            "ap_flipped": self.ap_flipped,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
        }


def detection_metrics(scores, labels, positive) -> DetectionMetrics:
    """AUROC plus average precision in both label orientations.

    ``ap`` treats ``positive`` as the positive class with the scores as
    given; ``ap_flipped`` treats the complement as positive, ranking by
    negated score.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    y = _binary_labels(labels, positive)
    flipped = np.where(y, "neg", "pos")
    return DetectionMetrics(
        auroc=auroc(scores, labels, positive),
        ap=average_precision(scores, labels, positive),
        ap_flipped=average_precision(-scores, flipped, "pos"),
        n_positive=int(y.sum()),
        n_negative=int((~y).sum()),
    )
