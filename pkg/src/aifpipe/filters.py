"""Small filtering helpers built on the kernel layer."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve1d

from . import kernels


def gaussian_kernel1d(sigma: float, radius: int | None = None) -> np.ndarray:
    if radius is None:
        radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(plane: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication, float64 output."""
    if sigma <= 0:
        return plane.astype(np.float64)
    k = gaussian_kernel1d(sigma)
    out = convolve1d(plane.astype(np.float64), k, axis=-1, mode="nearest")
    out = convolve1d(out, k, axis=-2, mode="nearest")
    return out


def gradients(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(gx, gy) central differences, one-sided at the borders."""
    gy, gx = np.gradient(plane.astype(np.float64))
    return gx, gy


def box_mean(plane: np.ndarray, radius: int) -> np.ndarray:
    """Windowed mean normalized by the true (truncated) window size."""
    sums = kernels.box_sum(plane, radius)
    counts = kernels.box_sum(np.ones(plane.shape), radius)
    return sums / counts


def guided_filter(
    guide: np.ndarray, src: np.ndarray, radius: int, eps: float
) -> np.ndarray:
    """Edge-preserving smoothing of ``src`` steered by a scalar ``guide``."""
    guide = guide.astype(np.float64)
    src = src.astype(np.float64)
    mean_g = box_mean(guide, radius)
    mean_s = box_mean(src, radius)
    corr_gs = box_mean(guide * src, radius)
    corr_gg = box_mean(guide * guide, radius)
    cov_gs = corr_gs - mean_g * mean_s
    var_g = corr_gg - mean_g * mean_g
    a = cov_gs / (var_g + eps)
    b = mean_s - a * mean_g
    mean_a = box_mean(a, radius)
    mean_b = box_mean(b, radius)
    return mean_a * guide + mean_b
