"""
Image decoding, grayscale conversion, resizing and dataset enumeration.

Images are held as float64 intensity rasters in [0, 1].  Color input is
reduced with BT.601 luma weights before scaling, so an 8-bit value ``v``
maps to ``v / 255``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    EmptyDataset,
    InvalidDimensions,
    MissingClass,
    UnreadableFile,
    UnsupportedFormat,
)

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
SUPPORTED_FORMATS = {"PNG", "JPEG"}
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}

BLUR, SHARP = 1, 0
CLASS_DIRS = {
    "sharp": SHARP,
    "blur": BLUR,
    "defocused_blurred": BLUR,
    "motion_blurred": BLUR,
}


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel intensity raster, row-major, values in [0, 1].

    ``pixels`` has shape ``(height, width)`` and is made read-only on
    construction so instances can be shared freely.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidDimensions(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the intensities."""
        return self.pixels.ravel()

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma-weight an ``(h, w, 3)`` 8-bit array into [0, 1] floats."""
    rgb = rgb.astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    gray = (r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]) / 255.0
    # 0.299 + 0.587 + 0.114 can land a hair above 1 for pure white
    return np.clip(gray, 0.0, 1.0)


def load_gray(path) -> GrayImage:
    """Decode a PNG or JPEG file into a GrayImage."""
    path = Path(path)
    if not path.is_file():
        raise UnreadableFile(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise UnsupportedFormat(f"{path}: format {fmt!r} is not PNG or JPEG")
            im.load()
            if im.mode in ("L", "LA"):
                arr = np.asarray(im.getchannel(0), dtype=np.float64) / 255.0
            elif im.mode in ("I;16", "I;16B", "I", "F"):
                raise UnsupportedFormat(f"{path}: only 8-bit images are supported (mode {im.mode})")
            else:
                arr = rgb_to_gray(np.asarray(im.convert("RGB")))
    except UnsupportedFormat:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise UnreadableFile(f"cannot decode {path}: {exc}") from exc
    return GrayImage(arr)


def resize_bilinear(img: GrayImage, w: int, h: int) -> GrayImage:
    """Bilinear resize with edge-aligned sampling.

    Output pixel ``i`` samples source coordinate ``i * (n_in - 1) / (n_out - 1)``
    so the first and last output pixels coincide with the source edges.
    A one-pixel output axis samples the source center.
    """
    if w < 1 or h < 1:
        raise InvalidDimensions(f"target size must be at least 1x1, got {w}x{h}")
    src = img.pixels
    if (w, h) == (img.width, img.height):
        return GrayImage(src)

    def coords(n_in, n_out):
        if n_out == 1:
            pos = np.array([(n_in - 1) / 2.0])
        else:
            pos = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
        lo = np.floor(pos).astype(np.intp)
        lo = np.clip(lo, 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = pos - lo
        return lo, hi, frac

    x0, x1, fx = coords(img.width, w)
    y0, y1, fy = coords(img.height, h)

    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return GrayImage(np.clip(out, 0.0, 1.0))


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)  # (Path, label) pairs

    @property
    def class_counts(self) -> dict:
        counts = {}
        for _, label in self.entries:
            counts[label] = counts.get(label, 0) + 1
        return counts

    @property
    def paths(self):
        return [p for p, _ in self.entries]

    @property
    def labels(self):
        return [lab for _, lab in self.entries]

    def __len__(self):
        return len(self.entries)


def _image_files(directory: Path):
    return [p for p in directory.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES]


def scan_dataset(root, strict: bool = True) -> DatasetManifest:
    """Enumerate a labeled dataset laid out as class subdirectories.

    Files under ``sharp/`` are labeled 0; files under ``blur/``,
    ``defocused_blurred/`` and ``motion_blurred/`` are labeled 1.  Entries
    are sorted by path.  When only one class is found, ``MissingClass`` is
    raised if ``strict``, otherwise a warning is logged.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"dataset root {root} does not exist or is not a directory")
    entries = []
    for name, label in CLASS_DIRS.items():
        sub = root / name
        if sub.is_dir():
            entries.extend((p, label) for p in _image_files(sub))
    if not entries:
        raise EmptyDataset(f"no images found under {root} (expected {', '.join(CLASS_DIRS)})")
    entries.sort(key=lambda e: str(e[0]))
    manifest = DatasetManifest(entries)
    if len(manifest.class_counts) < 2:
        msg = f"{root}: only label(s) {sorted(manifest.class_counts)} present"
        if strict:
            raise MissingClass(msg)
        logger.warning(msg)
    return manifest


def scan_unlabeled(root) -> list:
    """All image files below ``root``, sorted by path."""
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"directory {root} does not exist")
    files = sorted(_image_files(root), key=str)
    if not files:
        raise EmptyDataset(f"no images found under {root}")
    return files
