"""
Inference latency benchmark: feature extraction plus model prediction.

Only extraction and prediction are inside the timed section.  Decoding and
resizing happen beforehand; decode time can be measured separately.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._io import atomic_write_text
from .errors import InvalidParameter
from .gbdt import GbdtModel
from .grid import FeatureConfig, extract_vector
from .ingest import GrayImage, load_gray, resize_bilinear

MIN_REPEATS = 3


@dataclass
class SizeTiming:
    width: int
    height: int
    pixel_count: int
    repeats: int
    mean_ms: float
    std_ms: float
    runs_ms: list


@dataclass
class LinearFit:
    slope_ms_per_pixel: float
    intercept_ms: float
    r_squared: float


@dataclass
class TimingReport:
    per_size: list
    linear_fit: LinearFit
    n_images: int
    parallel: bool = False
    decode_ms: list | None = None
    config_id: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["width", "height", "pixel_count", "run", "ms"])
        for s in self.per_size:
            for i, ms in enumerate(s.runs_ms):
                w.writerow([s.width, s.height, s.pixel_count, i, repr(ms)])
        return buf.getvalue()

    def save(self, path, runs_csv_path=None):
        atomic_write_text(path, self.to_json())
        if runs_csv_path is not None:
            atomic_write_text(runs_csv_path, self.runs_csv())


def linear_fit(x, y) -> LinearFit:
    """Least-squares line ``y = slope * x + intercept`` and its r^2 in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2:
        return LinearFit(0.0, float(y.mean()) if len(y) else 0.0, 1.0)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return LinearFit(float(slope), float(intercept), float(min(1.0, max(0.0, r2))))


def _infer(model: GbdtModel, cfg: FeatureConfig, images, workers: int):
    for img in images:
        vec = extract_vector(img, cfg, workers=workers)
        model.predict_proba(vec.values)


def bench_inference(model: GbdtModel, images, sizes, repeats: int = 10,
                    cfg: FeatureConfig | None = None, workers: int = 1,
                    clock=time.perf_counter) -> TimingReport:
    """Time extraction + prediction over all ``images`` at each size.

    One warm-up pass per size is discarded.  Each recorded run covers every
    image once, so ``mean_ms`` is the time to classify the whole set.
    """
    if repeats < MIN_REPEATS:
        raise InvalidParameter(f"repeats must be >= {MIN_REPEATS}, got {repeats}")
    if not sizes:
        raise InvalidParameter("at least one size is required")
    if not images:
        raise InvalidParameter("at least one image is required")
    if cfg is None:
        cfg = FeatureConfig.from_id(model.config_id)

    per_size = []
    for w, h in sizes:
        resized = [resize_bilinear(img, w, h) for img in images]
        _infer(model, cfg, resized, workers)  # warm-up
        runs = []
        for _ in range(repeats):
            t0 = clock()
            _infer(model, cfg, resized, workers)
            runs.append((clock() - t0) * 1000.0)
        arr = np.array(runs)
        per_size.append(SizeTiming(w, h, w * h, repeats, float(arr.mean()),
                                   float(arr.std(ddof=1)), runs))
    fit = linear_fit([s.pixel_count for s in per_size], [s.mean_ms for s in per_size])
    return TimingReport(per_size, fit, len(images), parallel=workers > 1, config_id=cfg.config_id)


def time_decode(paths, clock=time.perf_counter) -> tuple[list[GrayImage], list[float]]:
    """Load images, returning them with per-file decode time in ms."""
    images, ms = [], []
    for p in paths:
        t0 = clock()
        images.append(load_gray(p))
        ms.append((clock() - t0) * 1000.0)
    return images, ms
