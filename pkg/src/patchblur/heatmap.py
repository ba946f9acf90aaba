"""
Grid-cell blur scoring with a whole-image model, and its overlay rendering.

Each cell of a ``g x g`` split is scored as though it were an entire image,
which only makes sense for models trained on the global variants.  The
image-level verdict is a majority vote over cell labels; an even split goes
to blur when the cell probabilities sum to more than half the cell count.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ._io import atomic_write_bytes, atomic_write_text
from .errors import ConfigMismatch
from .features import extract_features
from .gbdt import GbdtModel
from .grid import FeatureConfig, Variant, shrink_params, split_grid
from .ingest import GrayImage


@dataclass(frozen=True)
class Cell:
    row: int
    col: int
    probability: float
    label: int


@dataclass
class HeatmapResult:
    grid: int
    cells: list
    label: int

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([c.probability for c in self.cells]).reshape(self.grid, self.grid)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "label": self.label,
            "cells": [vars(c) for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def vote(probabilities, threshold: float = 0.5) -> int:
    p = np.asarray(probabilities, dtype=np.float64)
    blur_votes = int(np.sum(p > threshold))
    sharp_votes = len(p) - blur_votes
    if blur_votes != sharp_votes:
        return int(blur_votes > sharp_votes)
    return int(p.sum() > len(p) / 2.0)


def cell_heatmap(model: GbdtModel, img: GrayImage, g: int, threshold: float = 0.5) -> HeatmapResult:
    cfg = FeatureConfig.from_id(model.config_id) if model.config_id else None
    if cfg is None or not cfg.variant.is_global:
        raise ConfigMismatch(
            f"heatmaps need a model trained on global features, got {model.config_id!r}")
    with_lbp = cfg.variant is Variant.GLOBAL_LBP
    regions = split_grid(img, g)
    X = np.stack([
        extract_features(img, r, shrink_params(cfg.params, r), with_lbp) for r in regions
    ])
    probs = model.predict_proba(X)
    cells = [
        Cell(i // g, i % g, float(p), int(p > threshold)) for i, p in enumerate(probs)
    ]
    return HeatmapResult(g, cells, vote(probs, threshold))


def render_overlay(img: GrayImage, result: HeatmapResult) -> Image.Image:
    """Copy of the image with per-cell tint, grid lines and probability text."""
    gray = np.round(img.pixels * 255).astype(np.uint8)
    base = Image.fromarray(gray).convert("RGB")
    tint = Image.new("RGBA", base.size, (0, 0, 0, 0))
    draw = ImageDraw.Draw(tint)
    font = ImageFont.load_default()
    regions = split_grid(img, result.grid)
    for r, cell in zip(regions, result.cells):
        box = (r.x0, r.y0, r.x0 + r.width - 1, r.y0 + r.height - 1)
        color = (220, 40, 40, 70) if cell.label else (40, 200, 40, 70)
        draw.rectangle(box, fill=color, outline=(255, 255, 0, 255))
        text = f"{cell.probability:.2f}"
        draw.text((r.x0 + 2, r.y0 + 2), text, fill=(255, 255, 255, 255), font=font,
                  stroke_width=1, stroke_fill=(0, 0, 0, 255))
    out = Image.alpha_composite(base.convert("RGBA"), tint).convert("RGB")
    ImageDraw.Draw(out).text((2, out.height - 12), "BLUR" if result.label else "SHARP",
                             fill=(255, 255, 0), font=font)
    return out


def save_heatmap(img: GrayImage, result: HeatmapResult, image_path, json_path):
    buf = io.BytesIO()
    render_overlay(img, result).save(buf, format="PNG")
    atomic_write_bytes(image_path, buf.getvalue())
    atomic_write_text(json_path, result.to_json())
