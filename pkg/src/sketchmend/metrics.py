"""Evaluation metrics: L1, PSNR, SSIM, Fréchet feature distance, and
Gram-matrix style losses over a pluggable feature extractor.

All functions are pure and deterministic. Feature-based metrics only carry
meaning between methods evaluated under the same extractor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def l1_error(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference."""
    _check_pair(a, b)
    return float(np.abs(np.asarray(a, dtype=np.float64) - b).mean())


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10·log10(peak² / MSE) in dB, capped at 100 dB for identical inputs."""
    _check_pair(a, b)
    if peak <= 0:
        raise ValueError("peak must be > 0")
    mse = float(np.square(np.asarray(a, dtype=np.float64) - b).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Structural similarity with a uniform 7×7 window, averaged over all
    window positions and channels; stabilizers k1=0.01, k2=0.03 on `peak`."""
    _check_pair(a, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(f"images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    vals = []
    for ch in range(a.shape[2]):
        mu_a = ndi.uniform_filter(a[:, :, ch], SSIM_WINDOW, mode="reflect")
        mu_b = ndi.uniform_filter(b[:, :, ch], SSIM_WINDOW, mode="reflect")
        var_a = ndi.uniform_filter(a[:, :, ch] ** 2, SSIM_WINDOW, mode="reflect") - mu_a**2
        var_b = ndi.uniform_filter(b[:, :, ch] ** 2, SSIM_WINDOW, mode="reflect") - mu_b**2
        cov = ndi.uniform_filter(a[:, :, ch] * b[:, :, ch], SSIM_WINDOW, mode="reflect") - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


@dataclass(frozen=True)
class FeatureStats:
    """Gaussian fit of a feature distribution: mean, covariance, sample count."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("need at least 2 samples for covariance")
        if self.mean.ndim != 1 or self.cov.shape != (len(self.mean), len(self.mean)):
            raise ValueError("mean must be (k,), cov (k, k)")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")


def feature_stats(vectors: np.ndarray) -> FeatureStats:
    """Fit FeatureStats to an (N, k) array of feature vectors."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValueError(f"need an (N>=2, k) array, got {vectors.shape}")
    mean = vectors.mean(axis=0)
    cov = np.cov(vectors, rowvar=False)
    cov = np.atleast_2d(cov)
    return FeatureStats(mean=mean, cov=(cov + cov.T) / 2.0, count=vectors.shape[0])


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(s1: FeatureStats, s2: FeatureStats) -> float:
    """Fréchet distance between two Gaussian feature fits.

    ||μ1-μ2||² + Tr(C1 + C2 - 2·(C1·C2)^½), with the matrix square root
    taken through the symmetrized product C1^½·C2·C1^½ and negative
    eigenvalues clamped to zero; the result is clamped to be >= 0.
    """
    if s1.mean.shape != s2.mean.shape:
        raise ValueError("feature dimensions differ")
    diff = s1.mean - s2.mean
    root1 = _psd_sqrt(s1.cov)
    inner = root1 @ s2.cov @ root1
    vals = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2.0), 0.0, None)
    trace_sqrt = float(np.sqrt(vals).sum())
    value = float(diff @ diff + np.trace(s1.cov) + np.trace(s2.cov) - 2.0 * trace_sqrt)
    if value < -1e-6:
        raise ValueError(f"covariances too far from PSD: fid {value}")
    return max(value, 0.0)


def gram(feat: np.ndarray) -> np.ndarray:
    """Channel correlation matrix G = F·Fᵀ / (H·W) of a (C, H, W) feature map."""
    feat = np.asarray(feat, dtype=np.float64)
    if feat.ndim != 3:
        raise ValueError(f"feature map must be (C, H, W), got {feat.shape}")
    c, h, w = feat.shape
    flat = feat.reshape(c, h * w)
    return flat @ flat.T / float(h * w)


def style_loss(x: np.ndarray, y: np.ndarray, extractor) -> dict[str, float]:
    """MSE between Gram matrices at the extractor's first two layers.

    Returns {"sl1": ..., "sl2": ...}; non-negative, zero iff the Gram
    matrices coincide.
    """
    fx = extractor(x)
    fy = extractor(y)
    out = {}
    for i, layer in enumerate(extractor.layer_names[:2], start=1):
        gx = gram(fx[layer])
        gy = gram(fy[layer])
        out[f"sl{i}"] = float(np.mean((gx - gy) ** 2))
    return out
