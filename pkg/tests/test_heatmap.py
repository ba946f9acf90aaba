import numpy as np
import pytest
from PIL import Image

from patchblur import FeatureConfig, GrayImage, Region, TrainParams, extract_features, train
from patchblur.errors import ConfigMismatch, ImageTooSmall
from patchblur.heatmap import cell_heatmap, render_overlay, save_heatmap, vote
from synthetic import blur, noise


@pytest.fixture(scope="module")
def global_model():
    """Global-feature model fitted on sharp and blurred 32x32 noise patches."""
    r = np.random.default_rng(5)
    X, y = [], []
    for i in range(60):
        sharp = noise((32, 32), 1000 + i, contrast=r.uniform(0.5, 1.0))
        for a, lab in ((sharp, 0), (blur(sharp, r.uniform(1.0, 3.0)), 1)):
            img = GrayImage(a)
            X.append(extract_features(img, Region.full(img), with_lbp=False))
            y.append(lab)
    return train(np.array(X), y, TrainParams(n_estimators=30), FeatureConfig("global").config_id)


def half_blurred(size=96, seed=77):
    a = noise((size, size), seed)
    a[:, : size // 2] = blur(a, 2.0)[:, : size // 2]
    return GrayImage(a)


def test_nine_cells_row_major(global_model):
    res = cell_heatmap(global_model, half_blurred(), 3)
    assert len(res.cells) == 9
    assert [(c.row, c.col) for c in res.cells] == [(i, j) for i in range(3) for j in range(3)]
    assert res.probabilities.shape == (3, 3)
    assert all(0.0 < c.probability < 1.0 for c in res.cells)


def test_blurred_half_scores_higher(global_model):
    res = cell_heatmap(global_model, half_blurred(), 4)
    p = res.probabilities
    assert p[:, :2].mean() > p[:, 2:].mean()


def test_label_is_majority(global_model):
    res = cell_heatmap(global_model, half_blurred(96, 3), 3)
    blur_votes = sum(c.label for c in res.cells)
    assert res.label == int(blur_votes > 4)


def test_vote_rules():
    assert vote([0.9, 0.8, 0.1]) == 1
    assert vote([0.9, 0.2, 0.1]) == 0
    assert vote([0.9, 0.2]) == 1
    assert vote([0.6, 0.1]) == 0
    assert vote([0.5, 0.5]) == 0


def test_grid_model_rejected():
    X = np.random.default_rng(0).random((10, 36))
    m = train(X, [0, 1] * 5, TrainParams(n_estimators=2), FeatureConfig("grid", 3).config_id)
    with pytest.raises(ConfigMismatch):
        cell_heatmap(m, half_blurred(), 3)


def test_image_too_small(global_model):
    with pytest.raises(ImageTooSmall):
        cell_heatmap(global_model, GrayImage(np.zeros((8, 8))), 3)


def test_overlay_written(global_model, tmp_path):
    img = half_blurred()
    res = cell_heatmap(global_model, img, 3)
    assert render_overlay(img, res).size == (96, 96)
    save_heatmap(img, res, tmp_path / "h.png", tmp_path / "h.json")
    with Image.open(tmp_path / "h.png") as im:
        assert im.size == (96, 96) and im.mode == "RGB"
    assert '"grid": 3' in (tmp_path / "h.json").read_text()
