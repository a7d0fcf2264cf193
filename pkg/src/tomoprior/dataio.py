"""File formats: grayscale PNG/PGM, raw float64 images and sinograms with text sidecars, manifests.

Raw arrays are little-endian float64 in row-major order. The sidecar sits next
to the data file with ``.txt`` appended and holds ``key = value`` lines.
"""
from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image as PILImage

from .grid import Image, InvalidArgument, Sinogram

IMAGE_SUFFIXES = (".png", ".pgm", ".raw")


def atomic_write(path, data: bytes | str) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".txt")


def read_sidecar(path) -> dict[str, str]:
    out = {}
    for line in sidecar_path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def format_keyvalues(items: Mapping[str, object]) -> str:
    return "".join(f"{k} = {items[k]}\n" for k in sorted(items))


def load_image(path) -> Image:
    """Load a grayscale image; 8/16-bit data are scaled to [0, 1], raw floats are kept as is."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".raw":
        meta = read_sidecar(path)
        try:
            w, h = int(meta["width"]), int(meta["height"])
        except KeyError as exc:
            raise InvalidArgument(f"{path}: sidecar lacks {exc}") from None
        data = np.fromfile(path, dtype="<f8")
        if data.size != w * h:
            raise InvalidArgument(f"{path}: expected {w * h} values, found {data.size}")
        return Image(data.reshape(h, w))
    if suffix not in (".png", ".pgm"):
        raise InvalidArgument(f"{path}: unsupported image format {suffix!r}")
    with PILImage.open(path) as im:
        if im.mode in ("RGB", "RGBA", "P", "LA"):
            raise InvalidArgument(f"{path}: only grayscale images are supported")
        arr = np.array(im)
        mode = im.mode
    if arr.dtype == np.uint8 or mode == "L":
        scale = 255.0
    elif mode.startswith("I;16") or arr.dtype == np.uint16 or arr.max() > 255:
        scale = 65535.0
    else:
        scale = 255.0
    return Image(arr.astype(np.float64) / scale)


def save_image_png(img: Image, path) -> Path:
    """16-bit PNG of the image clipped to [0, 1]."""
    q = np.round(np.clip(img.data, 0.0, 1.0) * 65535.0).astype(np.uint16)
    buf = io.BytesIO()
    PILImage.fromarray(q).save(buf, format="PNG")
    return atomic_write(path, buf.getvalue())


def save_image_raw(img: Image, path) -> Path:
    atomic_write(sidecar_path(path), format_keyvalues({"width": img.width, "height": img.height}))
    return atomic_write(path, img.data.astype("<f8").tobytes())


def save_sinogram(sino: Sinogram, path, image_size: tuple[int, int] | None = None) -> Path:
    meta = {"bins": sino.bins, "angles": " ".join(repr(a) for a in sino.angles)}
    if image_size is not None:
        meta["width"], meta["height"] = image_size
    atomic_write(sidecar_path(path), format_keyvalues(meta))
    return atomic_write(path, sino.data.astype("<f8").tobytes())


def load_sinogram(path) -> tuple[Sinogram, tuple[int, int] | None]:
    """Returns the sinogram and the image size recorded with it, if any."""
    meta = read_sidecar(path)
    try:
        bins = int(meta["bins"])
        angles = tuple(float(a) for a in meta["angles"].split())
    except KeyError as exc:
        raise InvalidArgument(f"{path}: sidecar lacks {exc}") from None
    data = np.fromfile(path, dtype="<f8")
    if data.size != bins * len(angles):
        raise InvalidArgument(f"{path}: expected {bins * len(angles)} values, found {data.size}")
    size = (int(meta["width"]), int(meta["height"])) if "width" in meta else None
    return Sinogram(angles, data.reshape(len(angles), bins)), size


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"template directory {directory} does not exist")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_templates(directory) -> list[Image]:
    return [load_image(p) for p in list_images(directory)]
