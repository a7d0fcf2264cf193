"""Value types shared by every module: images, sinograms, coefficient vectors, angle sets.

All arrays are stored as read-only float64 numpy arrays. Images are indexed
``[row, col]`` in row-major order; row 0 is the top of the image.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidArgument(ValueError):
    """Raised when an argument violates a documented precondition."""


class NumericalFailure(RuntimeError):
    """Raised when an iterative solver produces a non-finite objective.

    The objective trace collected up to the failure is attached as ``trace``.
    """

    def __init__(self, message: str, trace: Sequence[float] = ()):
        super().__init__(message)
        self.trace = list(trace)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """Dense 2D grayscale slice of shape ``(height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidArgument(f"image data must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise InvalidArgument(f"image must be at least 2x2, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("image contains non-finite entries")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "Image":
        return cls(np.zeros((height, width)))


@dataclass(frozen=True)
class AngleSet:
    """Projection angles in degrees, uniform over [0, 180) unless ``explicit`` is given."""

    count: int
    explicit: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.explicit is not None:
            vals = tuple(float(a) for a in self.explicit)
            object.__setattr__(self, "explicit", vals)
            object.__setattr__(self, "count", len(vals))
            _check_angles(vals)
        if self.count < 1:
            raise InvalidArgument(f"angle count must be >= 1, got {self.count}")

    @property
    def degrees(self) -> np.ndarray:
        if self.explicit is not None:
            return np.array(self.explicit)
        return np.arange(self.count) * (180.0 / self.count)

    @property
    def radians(self) -> np.ndarray:
        return np.deg2rad(self.degrees)

    def __len__(self) -> int:
        return self.count


def _check_angles(angles: Sequence[float]) -> None:
    a = np.asarray(angles, dtype=np.float64)
    if a.size == 0:
        raise InvalidArgument("angle set is empty")
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("angles must be finite")
    if np.any(a < 0) or np.any(a >= 180):
        raise InvalidArgument("angles must lie in [0, 180)")
    if np.any(np.diff(a) <= 0):
        raise InvalidArgument("angles must be strictly increasing")


@dataclass(frozen=True)
class Sinogram:
    """Projection data of shape ``(len(angles), bins)``; angles in degrees."""

    angles: tuple[float, ...]
    data: np.ndarray

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        _check_angles(angles)
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(angles):
            raise InvalidArgument(
                f"sinogram data shape {arr.shape} does not match {len(angles)} angles")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("sinogram contains non-finite entries")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def bins(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CoefVector:
    """Flat real coefficient vector (DCT coefficients, eigen coefficients, patch codes)."""

    data: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64).ravel()
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("coefficient vector contains non-finite entries")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def length(self) -> int:
        return self.data.size

    def __len__(self) -> int:
        return self.data.size


def make_uniform_angles(count: int) -> AngleSet:
    """``count`` angles at ``k * 180 / count`` degrees, k = 0..count-1."""
    if int(count) != count or count < 1:
        raise InvalidArgument(f"angle count must be a positive integer, got {count}")
    return AngleSet(int(count))


def image_linf_diff(a: Image, b: Image) -> float:
    if a.shape != b.shape:
        raise InvalidArgument(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a.data - b.data)))
