"""
Spatial sharpness features computed on a rectangular region of a GrayImage.

All maps are computed on the region alone: borders mirror inside the region
(reflect-101, the edge pixel is not repeated), never reaching into the rest
of the host image.  Filters are applied as correlations, matching the usual
image-processing convention, so a dark-to-bright step gives a positive
horizontal Sobel response.

Per-region feature order:

    0 laplacian mean
    1 laplacian variance
    2 tenengrad mean
    3 normalized gray-level variance
    4 LBP sharpness-map mean      (optional)
    5 LBP sharpness-map variance  (optional)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameter, RegionOutOfBounds, RegionTooSmall, WindowLargerThanRegion
from .ingest import GrayImage

MIN_REGION = 3
N_BASE_FEATURES = 4
N_LBP_FEATURES = 2
SHARP_CODES = (6, 7, 8, 9)
NON_UNIFORM = 9

# circular neighbor order (dy, dx) starting top-left, clockwise
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


class Region(NamedTuple):
    x0: int
    y0: int
    width: int
    height: int

    @classmethod
    def full(cls, img: GrayImage) -> "Region":
        return cls(0, 0, img.width, img.height)


@dataclass(frozen=True)
class FeatureParams:
    lbp_threshold: float = 0.016
    lbp_window: int = 21
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.lbp_window < 3 or self.lbp_window % 2 == 0:
            raise InvalidParameter(f"lbp_window must be odd and >= 3, got {self.lbp_window}")
        if not self.lbp_threshold >= 0:
            raise InvalidParameter(f"lbp_threshold must be >= 0, got {self.lbp_threshold}")
        if not self.epsilon > 0:
            raise InvalidParameter(f"epsilon must be > 0, got {self.epsilon}")


class GradientMaps(NamedTuple):
    sx: np.ndarray
    sy: np.ndarray
    lap: np.ndarray | None = None


def crop(img: GrayImage, r: Region) -> np.ndarray:
    """Return the region's pixels, validating containment and minimum size."""
    x0, y0, w, h = r
    if w < MIN_REGION or h < MIN_REGION:
        raise RegionTooSmall(f"region {w}x{h} is below the {MIN_REGION}x{MIN_REGION} minimum")
    if x0 < 0 or y0 < 0 or x0 + w > img.width or y0 + h > img.height:
        raise RegionOutOfBounds(f"region {tuple(r)} exceeds image {img.width}x{img.height}")
    return img.pixels[y0:y0 + h, x0:x0 + w]


def _pad(a: np.ndarray) -> np.ndarray:
    # numpy's "reflect" is reflect-101
    return np.pad(a, 1, mode="reflect")


def _shifted(p: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """View of padded array ``p`` aligned so index (i, j) reads pixel (i+dy, j+dx)."""
    h, w = p.shape[0] - 2, p.shape[1] - 2
    return p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]


def _pop_var(a: np.ndarray) -> float:
    # shift by one sample first so a constant input yields exactly 0
    d = a - a.flat[0]
    return float(np.var(d))


def _sobel(a: np.ndarray) -> GradientMaps:
    p = _pad(a)
    s = lambda dy, dx: _shifted(p, dy, dx)  # noqa: E731
    sx = (s(-1, 1) - s(-1, -1)) + 2.0 * (s(0, 1) - s(0, -1)) + (s(1, 1) - s(1, -1))
    sy = (s(1, -1) - s(-1, -1)) + 2.0 * (s(1, 0) - s(-1, 0)) + (s(1, 1) - s(-1, 1))
    return GradientMaps(sx, sy)


def _laplacian(a: np.ndarray) -> np.ndarray:
    p = _pad(a)
    # differences against the center keep a constant input at exactly 0
    return (
        (_shifted(p, -1, 0) - a)
        + (_shifted(p, 1, 0) - a)
        + (_shifted(p, 0, -1) - a)
        + (_shifted(p, 0, 1) - a)
    )


def sobel_maps(img: GrayImage, r: Region) -> GradientMaps:
    """Horizontal and vertical 3x3 Sobel responses over the region."""
    return _sobel(crop(img, r))


def laplacian_map(img: GrayImage, r: Region) -> np.ndarray:
    """4-neighbor Laplacian response over the region."""
    return _laplacian(crop(img, r))


def gradient_maps(img: GrayImage, r: Region) -> GradientMaps:
    a = crop(img, r)
    sx, sy, _ = _sobel(a)
    return GradientMaps(sx, sy, _laplacian(a))


def tenengrad_mean(img: GrayImage, r: Region) -> float:
    sx, sy, _ = sobel_maps(img, r)
    return float(np.mean(sx * sx + sy * sy))


def laplacian_stats(img: GrayImage, r: Region) -> tuple[float, float]:
    """Population mean and variance of the Laplacian response."""
    lap = laplacian_map(img, r)
    return float(np.mean(lap)), _pop_var(lap)


def nglv(img: GrayImage, r: Region, p: FeatureParams = FeatureParams()) -> float:
    """Normalized gray-level variance: population variance / (mean + epsilon)."""
    a = crop(img, r)
    return _pop_var(a) / (float(np.mean(a)) + p.epsilon)


def _riu2(a: np.ndarray, threshold: float) -> np.ndarray:
    p = _pad(a)
    bits = [(_shifted(p, dy, dx) - a) > threshold for dy, dx in NEIGHBOR_OFFSETS]
    ones = np.zeros(a.shape, dtype=np.int8)
    transitions = np.zeros(a.shape, dtype=np.int8)
    for k in range(8):
        ones += bits[k]
        transitions += bits[k] != bits[(k + 1) % 8]
    return np.where(transitions <= 2, ones, np.int8(NON_UNIFORM)).astype(np.int8)


def lbp_riu2_codes(img: GrayImage, r: Region, p: FeatureParams = FeatureParams()) -> np.ndarray:
    """Rotation-invariant uniform LBP codes (0..8 uniform, 9 non-uniform).

    A neighbor's bit is set when it exceeds the center by more than
    ``p.lbp_threshold``.
    """
    return _riu2(crop(img, r), p.lbp_threshold)


def window_sums(mask: np.ndarray, window: int) -> np.ndarray:
    """Sum of ``mask`` over every fully-contained ``window x window`` square.

    Uses a zero-bordered integral image, so the cost does not depend on the
    window size.  Integer input gives exact integer output.
    """
    h, w = mask.shape
    if window > h or window > w:
        raise WindowLargerThanRegion(f"window {window} exceeds region {w}x{h}")
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask, axis=0, dtype=np.int64), axis=1, out=ii[1:, 1:])
    k = window
    return ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]


def sharpness_from_codes(codes: np.ndarray, window: int) -> np.ndarray:
    """Windowed fraction of codes in {6, 7, 8, 9}."""
    sharp = codes >= SHARP_CODES[0]
    return window_sums(sharp, window) / float(window * window)


def lbp_sharpness_map(img: GrayImage, r: Region, p: FeatureParams = FeatureParams()) -> np.ndarray:
    """Windowed fraction of LBP codes in {6, 7, 8, 9} (valid positions, stride 1)."""
    return sharpness_from_codes(lbp_riu2_codes(img, r, p), p.lbp_window)


def lbp_sharpness_stats(img: GrayImage, r: Region, p: FeatureParams = FeatureParams()) -> tuple[float, float]:
    m = lbp_sharpness_map(img, r, p)
    return float(np.mean(m)), _pop_var(m)


def _region_features(a: np.ndarray, p: FeatureParams, with_lbp: bool) -> np.ndarray:
    sx, sy, _ = _sobel(a)
    lap = _laplacian(a)
    out = [
        float(np.mean(lap)),
        _pop_var(lap),
        float(np.mean(sx * sx + sy * sy)),
        _pop_var(a) / (float(np.mean(a)) + p.epsilon),
    ]
    if with_lbp:
        out.extend(_lbp_stats(a, p))
    return np.array(out, dtype=np.float64)


def _lbp_stats(a: np.ndarray, p: FeatureParams) -> tuple[float, float]:
    m = sharpness_from_codes(_riu2(a, p.lbp_threshold), p.lbp_window)
    return float(np.mean(m)), _pop_var(m)


def extract_features(img: GrayImage, r: Region, p: FeatureParams = FeatureParams(),
                     with_lbp: bool = True) -> np.ndarray:
    """Feature fragment for one region: 4 values, or 6 with the LBP pair."""
    a = crop(img, r)
    if with_lbp and p.lbp_window > min(a.shape):
        raise WindowLargerThanRegion(f"window {p.lbp_window} exceeds region {a.shape[1]}x{a.shape[0]}")
    return _region_features(a, p, with_lbp)


def lbp_stats_only(img: GrayImage, r: Region, p: FeatureParams = FeatureParams()) -> np.ndarray:
    return np.array(lbp_sharpness_stats(img, r, p), dtype=np.float64)
