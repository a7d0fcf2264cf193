"""Orthonormal 2D DCT-II as the sparsifying basis.

``synthesize`` maps a coefficient grid to an image (inverse DCT) and
``analyze`` is its exact adjoint and inverse. Coefficients are flattened in
row-major order of the ``(height, width)`` grid; no zig-zag ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

from .grid import CoefVector, Image, InvalidArgument


@dataclass(frozen=True)
class DctBasis:
    width: int
    height: int
    normalization: str = "orthonormal"

    def __post_init__(self):
        if self.normalization != "orthonormal":
            raise InvalidArgument("only orthonormal DCT scaling is supported")
        if self.width < 1 or self.height < 1:
            raise InvalidArgument("basis dimensions must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    def synth(self, theta: np.ndarray) -> np.ndarray:
        """Array-level inverse DCT: flat or grid coefficients -> ``(H, W)`` image."""
        return fft.idctn(np.reshape(theta, self.shape), type=2, norm="ortho")

    def anal(self, x: np.ndarray) -> np.ndarray:
        """Array-level forward DCT: ``(H, W)`` image -> flat coefficients."""
        return fft.dctn(np.reshape(x, self.shape), type=2, norm="ortho").ravel()

    def synthesize(self, theta: CoefVector) -> Image:
        if theta.length != self.size:
            raise InvalidArgument(
                f"coefficient length {theta.length} does not match {self.height}x{self.width}")
        return Image(self.synth(theta.data))

    def analyze(self, x: Image) -> CoefVector:
        if x.shape != self.shape:
            raise InvalidArgument(f"image shape {x.shape} does not match basis {self.shape}")
        return CoefVector(self.anal(x.data))


def synthesize(basis: DctBasis, theta: CoefVector) -> Image:
    return basis.synthesize(theta)


def analyze(basis: DctBasis, x: Image) -> CoefVector:
    return basis.analyze(x)
