"""Synthetic test objects: disks, Gaussians, and slices through an ellipsoid volume.

The ellipsoid volume stands in for a CT scan: consecutive axial slices are
structurally similar but not identical, which is the setting the eigenspace
prior is designed for.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Image


def _coords(n: int):
    c = (n - 1) / 2.0
    jj, ii = np.meshgrid(np.arange(n), np.arange(n))
    return jj - c, c - ii


def disk(n: int, radius: float, value: float = 1.0) -> Image:
    x, y = _coords(n)
    return Image(np.where(x * x + y * y <= radius * radius, value, 0.0))


def gaussian(n: int, sigma: float) -> Image:
    x, y = _coords(n)
    return Image(np.exp(-(x * x + y * y) / (2.0 * sigma * sigma)))


@dataclass(frozen=True)
class Ellipsoid:
    """Axis lengths and centre in normalized units ([-1, 1] cube); ``phi`` rotates in-plane (degrees)."""

    value: float
    axes: tuple[float, float, float]
    center: tuple[float, float, float]
    phi: float = 0.0


# Loosely Shepp-Logan-like, with z-extents chosen so slices change gradually.
DEFAULT_VOLUME = (
    Ellipsoid(0.80, (0.69, 0.92, 0.90), (0.0, 0.0, 0.0)),
    Ellipsoid(-0.30, (0.6624, 0.874, 0.88), (0.0, -0.0184, 0.0)),
    Ellipsoid(-0.20, (0.11, 0.31, 0.22), (0.22, 0.0, -0.25), -18.0),
    Ellipsoid(-0.20, (0.16, 0.41, 0.28), (-0.22, 0.0, -0.25), 18.0),
    Ellipsoid(0.25, (0.21, 0.25, 0.41), (0.0, 0.35, -0.25)),
    Ellipsoid(0.15, (0.046, 0.046, 0.05), (0.0, 0.1, -0.25)),
    Ellipsoid(0.15, (0.046, 0.046, 0.05), (0.0, -0.1, -0.25)),
    Ellipsoid(0.20, (0.046, 0.023, 0.05), (-0.08, -0.605, -0.25)),
    Ellipsoid(0.20, (0.056, 0.04, 0.10), (0.06, -0.105, 0.625), 90.0),
    Ellipsoid(-0.15, (0.056, 0.056, 0.10), (0.0, 0.1, 0.625)),
    Ellipsoid(0.20, (0.3, 0.1, 0.6), (0.3, -0.3, 0.2), 30.0),
)


def ellipsoid_slice(n: int, z: float, volume=DEFAULT_VOLUME, supersample: int = 2) -> Image:
    """Axial slice at height ``z`` in [-1, 1], area-averaged over ``supersample**2`` points per pixel."""
    s = supersample
    m = n * s
    coords = (np.arange(m) + 0.5) / m * 2.0 - 1.0
    xx, yy = np.meshgrid(coords, -coords)
    img = np.zeros((m, m))
    for e in volume:
        a, b, c = e.axes
        dz = (z - e.center[2]) / c
        if abs(dz) >= 1:
            continue
        shrink = np.sqrt(1.0 - dz * dz)
        t = np.deg2rad(e.phi)
        dx, dy = xx - e.center[0], yy - e.center[1]
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        img[(u / (a * shrink)) ** 2 + (v / (b * shrink)) ** 2 <= 1.0] += e.value
    img = img.reshape(n, s, n, s).mean(axis=(1, 3))
    return Image(np.clip(img, 0.0, None))


@dataclass(frozen=True)
class SyntheticDataset:
    templates: tuple[Image, ...]
    test: Image
    template_z: tuple[float, ...]
    test_z: float


def slice_dataset(n: int = 64, n_templates: int = 6, z_range=(-0.3, 0.3),
                  test_z: float | None = None, perturbation: float | None = 2.0) -> SyntheticDataset:
    """Evenly spaced template slices plus one test slice between them.

    With ``perturbation`` set, the test slice is replaced by its orthogonal
    projection onto the templates' affine hull plus ``perturbation`` times the
    out-of-hull residual. ``None`` keeps the true slice (about 7% of its norm
    lies outside the hull at the defaults); the default 2.0 roughly doubles
    that, so the data term still carries information the prior lacks.
    """
    zs = np.linspace(z_range[0], z_range[1], n_templates)
    templates = tuple(ellipsoid_slice(n, float(z)) for z in zs)
    if test_z is None:
        test_z = float(0.5 * (zs[n_templates // 2 - 1] + zs[n_templates // 2]))
    test = ellipsoid_slice(n, test_z)
    if perturbation is not None:
        t = np.stack([im.data.ravel() for im in templates])
        mu = t.mean(axis=0)
        q, _ = np.linalg.qr((t - mu).T)
        d = test.data.ravel() - mu
        proj = mu + q @ (q.T @ d)
        resid = test.data.ravel() - proj
        test = Image(np.clip(proj + perturbation * resid, 0.0, None).reshape(n, n))
    return SyntheticDataset(templates, test, tuple(float(z) for z in zs), float(test_z))
