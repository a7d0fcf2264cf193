"""Filtered backprojection baseline.

Frequencies are normalized so the Nyquist frequency is 1; the ramp is
``|w|`` on ``[-1, 1)`` and the backprojection sum is scaled by
``pi / (2 * n_angles)``, which together give the continuous inversion formula
for unit detector spacing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Image, InvalidArgument, Sinogram

FILTERS = ("ramlak", "shepp-logan", "cosine", "none")


def filter_response(name: str, n: int) -> np.ndarray:
    """Frequency response on the ``np.fft.fftfreq(n)`` grid."""
    if name not in FILTERS:
        raise InvalidArgument(f"unknown filter {name!r}; expected one of {FILTERS}")
    w = 2.0 * np.fft.fftfreq(n)
    if name == "none":
        return np.ones(n)
    ramp = np.abs(w)
    if name == "ramlak":
        return ramp
    if name == "shepp-logan":
        return ramp * np.sinc(w / 2.0)
    return ramp * np.cos(np.pi * w / 2.0)


def _padded_length(n: int) -> int:
    return 1 << int(np.ceil(np.log2(2 * n)))


def apply_projection_filter(row, filter: str = "cosine") -> np.ndarray:
    """Filter one projection (or each row of a 2D array) in the frequency domain.

    Rows are extended by edge replication to the next power of two at least
    twice their length, filtered, and cropped back. Projections whose end bins
    are zero (the detector covers the object) see plain zero padding.
    """
    row = np.asarray(row, dtype=np.float64)
    n = row.shape[-1]
    if n < 2:
        raise InvalidArgument("projection rows need at least 2 samples")
    h = filter_response(filter, _padded_length(n))
    if filter == "none":
        return row.copy()
    npad = h.size - n
    left = npad // 2
    pad = [(0, 0)] * (row.ndim - 1) + [(left, npad - left)]
    ext = np.pad(row, pad, mode="edge")
    out = np.fft.ifft(np.fft.fft(ext, axis=-1) * h, axis=-1).real
    return out[..., left:left + n]


@dataclass(frozen=True)
class FbpConfig:
    """``output_size`` is ``(width, height)``."""

    output_size: tuple[int, int]
    filter: str = "cosine"
    interpolation: str = "linear"
    bin_spacing: float = 1.0

    def __post_init__(self):
        if self.filter not in FILTERS:
            raise InvalidArgument(f"unknown filter {self.filter!r}")
        if self.interpolation != "linear":
            raise InvalidArgument("only linear interpolation is supported")
        w, h = self.output_size
        if w < 2 or h < 2:
            raise InvalidArgument("output_size must be at least 2x2")


def backproject(sino: np.ndarray, angles_deg, output_size, bin_spacing: float = 1.0) -> np.ndarray:
    """Pixel-driven linear-interpolation backprojection (unscaled sum over angles)."""
    w, h = output_size
    n_angles, bins = sino.shape
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    xs = jj - (w - 1) / 2.0
    ys = (h - 1) / 2.0 - ii
    grid = np.arange(-1, bins + 1)
    out = np.zeros((h, w))
    for phi, proj in zip(np.deg2rad(angles_deg), sino):
        u = (xs * np.cos(phi) + ys * np.sin(phi)) / bin_spacing + (bins - 1) / 2.0
        out += np.interp(u, grid, np.concatenate(([0.0], proj, [0.0])), left=0.0, right=0.0)
    return out


def fbp_reconstruct(sino: Sinogram, cfg: FbpConfig) -> Image:
    if len(sino.angles) == 0:
        raise InvalidArgument("empty angle set")
    filtered = apply_projection_filter(sino.data, cfg.filter)
    img = backproject(filtered, sino.angles, cfg.output_size, cfg.bin_spacing)
    return Image(img * np.pi / (2 * len(sino.angles)))
