"""Reconstruction quality metrics: relative MSE and Gaussian-window SSIM."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .grid import Image, InvalidArgument


@dataclass(frozen=True)
class MetricReport:
    relative_mse: float
    ssim: float

    def __post_init__(self):
        if not self.relative_mse >= 0:
            raise InvalidArgument("relative_mse must be nonnegative")
        if not self.ssim <= 1 + 1e-12:
            raise InvalidArgument("ssim must not exceed 1")


def relative_mse(recon: Image, truth: Image) -> float:
    """``(1/n) * sum((recon - truth)^2) / sum(truth^2)`` with ``n`` the pixel count.

    The extra ``1/n`` is intentional: values shrink with the pixel count, so
    only compare numbers computed at the same image size.
    """
    if recon.shape != truth.shape:
        raise InvalidArgument(f"image shapes differ: {recon.shape} vs {truth.shape}")
    x = truth.data
    denom = np.sum(x * x)
    if denom == 0:
        raise InvalidArgument("relative MSE undefined for an all-zero reference")
    return float(np.sum((recon.data - x) ** 2) / denom / x.size)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-r * r / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    pad = g.size // 2
    return out[pad:img.shape[0] - (g.size - 1 - pad), pad:img.shape[1] - (g.size - 1 - pad)]


def ssim_map(x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5,
             k1: float = 0.01, k2: float = 0.03, dynamic_range: float = 1.0) -> np.ndarray:
    """Local SSIM at every fully-contained window position."""
    g = gaussian_window(window, sigma)
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    mx = _filter_valid(x, g)
    my = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(recon: Image, truth: Image, window: int = 11, k1: float = 0.01, k2: float = 0.03,
         dynamic_range: float | None = None, sigma: float = 1.5) -> float:
    """Mean structural similarity over all sliding windows.

    ``dynamic_range`` defaults to ``max(truth) - min(truth)``, falling back to
    1 for a constant reference.
    """
    if recon.shape != truth.shape:
        raise InvalidArgument(f"image shapes differ: {recon.shape} vs {truth.shape}")
    if window < 1 or window > min(truth.shape):
        raise InvalidArgument(f"window {window} does not fit image {truth.shape}")
    if dynamic_range is None:
        dynamic_range = float(truth.data.max() - truth.data.min()) or 1.0
    return float(ssim_map(recon.data, truth.data, window, sigma, k1, k2, dynamic_range).mean())


def evaluate(recon: Image, truth: Image) -> MetricReport:
    return MetricReport(relative_mse(recon, truth), ssim(recon, truth))
