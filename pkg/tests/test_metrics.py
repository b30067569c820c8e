import math

import numpy as np
import pytest
from oracles import ap_oracle, auroc_oracle

from tvae.metrics import (
    PSNR_CAP_DB,
    auroc,
    average_precision,
    detection_metrics,
    mse,
    psnr,
    reconstruction_metrics,
    ssim,
)

# --- independent oracles -------------------------------------------------------


def ssim_oracle(a, b, size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Scalar-loop SSIM over valid window positions."""
    h, w = a.shape
    weights = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            di, dj = i - (size - 1) / 2, j - (size - 1) / 2
            weights[i, j] = math.exp(-(di * di + dj * dj) / (2 * sigma * sigma))
    weights /= weights.sum()
    c1, c2 = k1 * k1, k2 * k2
    values = []
    for top in range(h - size + 1):
        for left in range(w - size + 1):
            pa = a[top : top + size, left : left + size]
            pb = b[top : top + size, left : left + size]
            mu_a = float((weights * pa).sum())
            mu_b = float((weights * pb).sum())
            var_a = float((weights * pa * pa).sum()) - mu_a**2
            var_b = float((weights * pb * pb).sum()) - mu_b**2
            cov = float((weights * pa * pb).sum()) - mu_a * mu_b
            values.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(values))


# --- reconstruction metrics ------------------------------------------------------


class TestReconMetrics:
    def test_identical_inputs(self):
        rng = np.random.default_rng(0)
        x = rng.random((3, 16, 16))
        m = reconstruction_metrics(x, x.copy())
        assert m.mse == 0.0
        assert m.psnr == PSNR_CAP_DB
        assert m.ssim == pytest.approx(1.0, abs=1e-12)

    def test_inverted_binary_clip(self):
        x = (np.arange(16 * 16).reshape(16, 16) % 2).astype(np.float64)[None]
        assert mse(x, 1.0 - x) == 1.0
        assert psnr(1.0) == 0.0

    def test_psnr_values(self):
        assert psnr(0.01) == pytest.approx(20.0)
        assert psnr(1e-12) == pytest.approx(99.0)  # capped
        with pytest.raises(ValueError):
            psnr(-0.1)

    def test_ssim_matches_oracle_on_random_pairs(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            a = rng.random((16, 16))
            b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
            assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-6)

    def test_ssim_video_averages_frames(self):
        rng = np.random.default_rng(22)
        a = rng.random((3, 16, 16))
        b = rng.random((3, 16, 16))
        per_frame = [ssim(a[i], b[i]) for i in range(3)]
        assert ssim(a, b) == pytest.approx(np.mean(per_frame), abs=1e-12)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 2)), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))  # below the window size


# --- detection metrics ------------------------------------------------------------


class TestDetectionMetrics:
    def test_perfect_separation(self):
        scores = [0.9, 0.8, 0.2, 0.1]
        labels = ["a", "a", "n", "n"]
        assert auroc(scores, labels, "a") == 1.0
        assert average_precision(scores, labels, "a") == 1.0

    def test_all_ties(self):
        scores = [0.5] * 10
        labels = ["a"] * 3 + ["n"] * 7
        assert auroc(scores, labels, "a") == pytest.approx(0.5)
        assert average_precision(scores, labels, "a") == pytest.approx(0.3)

    def test_spec_example(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = ["n", "a", "n", "a"]
        mask = [l == "a" for l in labels]
        assert auroc(scores, labels, "a") == pytest.approx(auroc_oracle(scores, mask))
        assert average_precision(scores, labels, "a") == pytest.approx(ap_oracle(scores, mask))

    def test_matches_enumeration_oracles_on_random_sets(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(5, 40))
            # Quantize so ties actually occur.
            scores = np.round(rng.random(n), 1)
            labels = np.where(rng.random(n) < 0.4, "a", "n")
            if len(set(labels)) < 2:
                labels[0], labels[1] = "a", "n"
            mask = labels == "a"
            assert auroc(scores, labels, "a") == pytest.approx(
                auroc_oracle(scores.tolist(), mask.tolist()), abs=1e-12
            )
            assert average_precision(scores, labels, "a") == pytest.approx(
                ap_oracle(scores.tolist(), mask.tolist()), abs=1e-12
            )

    def test_auroc_positive_flip_symmetry(self):
        rng = np.random.default_rng(32)
        scores = np.round(rng.random(30), 1)
        labels = np.where(rng.random(30) < 0.5, "anom", "healthy")
        labels[:2] = ["anom", "healthy"]
        direct = auroc(scores, labels, "anom")
        flipped = auroc(-scores, labels, "healthy")
        assert direct == pytest.approx(flipped, abs=1e-12)

    def test_ap_not_symmetric_in_general(self):
        scores = np.array([0.9, 0.8, 0.7, 0.6, 0.5])
        labels = np.array(["a", "n", "a", "n", "n"])
        ap_pos = average_precision(scores, labels, "a")
        ap_neg = average_precision(-scores, labels, "n")
        assert ap_pos == pytest.approx(5.0 / 6.0)
        assert ap_neg == pytest.approx(11.0 / 12.0)
        assert ap_pos != pytest.approx(ap_neg)

    def test_detection_metrics_bundle(self):
        scores = [3.0, 2.0, 1.0, 0.5]
        labels = ["a", "n", "a", "n"]
        d = detection_metrics(scores, labels, "a")
        assert d.n_positive == 2 and d.n_negative == 2
        assert d.auroc == pytest.approx(auroc(scores, labels, "a"))
        assert d.ap == pytest.approx(average_precision(scores, labels, "a"))
        assert d.ap_flipped == pytest.approx(
            average_precision([-s for s in scores], ["n", "a", "n", "a"], "a")
        )

    def test_degenerate_label_sets_rejected(self):
        with pytest.raises(ValueError):
            auroc([1.0, 2.0], ["a", "a"], "a")
        with pytest.raises(ValueError):
            average_precision([1.0, 2.0], ["n", "n"], "a")
