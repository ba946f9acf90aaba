"""
Grid splitting and whole-image feature vectors for each feature variant.

Vector layouts (``g`` is the grid size, blocks in row-major patch order):

    global           4      base features of the whole image
    global-lbp       6      base + LBP features of the whole image
    grid             4g^2   base features per patch
    grid-global-lbp  4g^2+2 base features per patch, then whole-image LBP pair
    lbp-grid         6g^2   base + LBP features per patch
"""

from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .errors import ConfigMismatch, ImageTooSmall, InvalidParameter, NonFiniteFeature, ShapeMismatch
from .features import (
    MIN_REGION,
    N_BASE_FEATURES,
    N_LBP_FEATURES,
    FeatureParams,
    Region,
    _lbp_stats,
    _region_features,
    crop,
)
from .ingest import GrayImage

GRID_SIZES = (1, 3, 5, 7)


class Variant(str, enum.Enum):
    GLOBAL = "global"
    GLOBAL_LBP = "global-lbp"
    GRID = "grid"
    GRID_GLOBAL_LBP = "grid-global-lbp"
    LBP_GRID = "lbp-grid"

    @property
    def is_global(self) -> bool:
        return self in (Variant.GLOBAL, Variant.GLOBAL_LBP)


@dataclass(frozen=True)
class FeatureConfig:
    variant: Variant = Variant.LBP_GRID
    grid: int = 7
    params: FeatureParams = field(default_factory=FeatureParams)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant.is_global:
            object.__setattr__(self, "grid", 1)
        elif self.grid not in GRID_SIZES:
            raise InvalidParameter(f"grid must be one of {GRID_SIZES}, got {self.grid}")

    @property
    def config_id(self) -> str:
        p = self.params
        parts = [self.variant.value]
        if not self.variant.is_global:
            parts.append(f"g{self.grid}")
        parts += [f"t{p.lbp_threshold!r}", f"w{p.lbp_window}", f"e{p.epsilon!r}"]
        return "/".join(parts)

    @classmethod
    def from_id(cls, config_id: str) -> "FeatureConfig":
        try:
            head, *rest = config_id.split("/")
            variant = Variant(head)
            grid = 1
            kw = {}
            for part in rest:
                key, val = part[0], part[1:]
                if key == "g":
                    grid = int(val)
                elif key == "t":
                    kw["lbp_threshold"] = float(val)
                elif key == "w":
                    kw["lbp_window"] = int(val)
                elif key == "e":
                    kw["epsilon"] = float(val)
                else:
                    raise ValueError(part)
        except (ValueError, IndexError) as exc:
            raise ConfigMismatch(f"unparseable config id {config_id!r}") from exc
        return cls(variant, grid, FeatureParams(**kw))

    @property
    def length(self) -> int:
        return vector_length(self)


def vector_length(cfg: FeatureConfig) -> int:
    g2 = cfg.grid * cfg.grid
    return {
        Variant.GLOBAL: N_BASE_FEATURES,
        Variant.GLOBAL_LBP: N_BASE_FEATURES + N_LBP_FEATURES,
        Variant.GRID: N_BASE_FEATURES * g2,
        Variant.GRID_GLOBAL_LBP: N_BASE_FEATURES * g2 + N_LBP_FEATURES,
        Variant.LBP_GRID: (N_BASE_FEATURES + N_LBP_FEATURES) * g2,
    }[cfg.variant]


def feature_names(cfg: FeatureConfig) -> list[str]:
    base = ["lap_mean", "lap_var", "ten_mean", "nglv"]
    lbp = ["lbp_mean", "lbp_var"]
    v = cfg.variant
    if v is Variant.GLOBAL:
        return base
    if v is Variant.GLOBAL_LBP:
        return base + lbp
    per = base + lbp if v is Variant.LBP_GRID else base
    names = [f"p{r}_{c}.{n}" for r in range(cfg.grid) for c in range(cfg.grid) for n in per]
    if v is Variant.GRID_GLOBAL_LBP:
        names += [f"global.{n}" for n in lbp]
    return names


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    config_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise NonFiniteFeature(f"non-finite feature in vector for {self.config_id}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def _axis_splits(n: int, g: int) -> list[tuple[int, int]]:
    base, rem = divmod(n, g)
    sizes = [base + (1 if i >= g - rem else 0) for i in range(g)]
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return [(int(s), int(z)) for s, z in zip(starts, sizes)]


def split_grid(img: GrayImage, g: int) -> list[Region]:
    """Split into ``g x g`` disjoint regions in row-major order.

    Each cell is ``floor(n / g)`` pixels along an axis; the ``n mod g``
    leftover pixels go one each to the trailing columns (rows).
    """
    if g < 1:
        raise InvalidParameter(f"grid size must be >= 1, got {g}")
    if img.width < MIN_REGION * g or img.height < MIN_REGION * g:
        raise ImageTooSmall(f"{img.width}x{img.height} image too small for a {g}x{g} grid")
    cols = _axis_splits(img.width, g)
    rows = _axis_splits(img.height, g)
    return [Region(x0, y0, w, h) for y0, h in rows for x0, w in cols]


def patch_window(p: FeatureParams, region: Region) -> int:
    """LBP window for a patch: the configured window, shrunk to fit if needed."""
    largest = min(region.width, region.height)
    if largest % 2 == 0:
        largest -= 1
    return min(p.lbp_window, largest)


def shrink_params(p: FeatureParams, region: Region) -> FeatureParams:
    w = patch_window(p, region)
    if w == p.lbp_window:
        return p
    return FeatureParams(p.lbp_threshold, w, p.epsilon)


def extract_vector(img: GrayImage, cfg: FeatureConfig, workers: int = 1) -> FeatureVector:
    """Feature vector for a whole image under ``cfg``.

    ``workers > 1`` spreads patches over a thread pool; results are placed by
    patch position, so the output is identical to the sequential run.
    """
    v = cfg.variant
    p = cfg.params
    whole = Region.full(img)

    if v.is_global:
        a = crop(img, whole)
        with_lbp = v is Variant.GLOBAL_LBP
        if with_lbp and p.lbp_window > min(a.shape):
            raise ImageTooSmall(f"{img.width}x{img.height} image smaller than LBP window {p.lbp_window}")
        return FeatureVector(_region_features(a, p, with_lbp), cfg.config_id)

    regions = split_grid(img, cfg.grid)
    with_lbp = v is Variant.LBP_GRID

    def one(region):
        return _region_features(crop(img, region), shrink_params(p, region), with_lbp)

    if workers > 1 and len(regions) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(one, regions))
    else:
        blocks = [one(r) for r in regions]

    if v is Variant.GRID_GLOBAL_LBP:
        a = crop(img, whole)
        if p.lbp_window > min(a.shape):
            raise ImageTooSmall(f"{img.width}x{img.height} image smaller than LBP window {p.lbp_window}")
        blocks.append(np.array(_lbp_stats(a, p)))
    return FeatureVector(np.concatenate(blocks), cfg.config_id)


# -- feature CSV ---------------------------------------------------------------

def meta_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".meta.json")


def write_feature_csv(path, rows, labels, config_id: str | None = None, sources=None):
    """Write ``label,f0,f1,...`` rows; unknown labels are written empty.

    When ``config_id`` is given, a ``<path>.meta.json`` sidecar records it
    (and the source files) so training can bind the model to the extraction
    settings.
    """
    rows = [np.asarray(r, dtype=np.float64) for r in rows]
    n = len(rows[0]) if rows else 0
    if any(len(r) != n for r in rows) or len(rows) != len(labels):
        raise ShapeMismatch("feature rows and labels disagree in shape")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label"] + [f"f{i}" for i in range(n)])
    for lab, r in zip(labels, rows):
        w.writerow(["" if lab is None else int(lab)] + [repr(float(x)) for x in r])
    atomic_write_text(path, buf.getvalue())
    if config_id is not None:
        meta = {"config_id": config_id, "n_features": n}
        if sources is not None:
            meta["sources"] = [str(s) for s in sources]
        atomic_write_text(meta_path(path), json.dumps(meta, indent=2) + "\n")


def read_feature_csv(path):
    """Return ``(X, y, config_id)``; ``y`` holds None for unlabeled rows."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ShapeMismatch(f"{path} is empty") from None
        if not header or header[0] != "label":
            raise ShapeMismatch(f"{path}: header must start with 'label'")
        n = len(header) - 1
        X, y = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ShapeMismatch(f"{path}:{lineno}: expected {n + 1} fields, got {len(row)}")
            y.append(int(row[0]) if row[0] != "" else None)
            X.append([float(x) for x in row[1:]])
    X = np.array(X, dtype=np.float64).reshape(len(X), n)
    config_id = None
    mp = meta_path(path)
    if mp.is_file():
        config_id = json.loads(mp.read_text()).get("config_id")
    return X, y, config_id
