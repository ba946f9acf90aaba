import csv
import json
import logging

import numpy as np
import pytest

from patchblur.cli import main
from patchblur.grid import read_feature_csv, write_feature_csv
from synthetic import blur, noise, to_png


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """Ten sharp noise images and their blurred copies, 64x64."""
    root = tmp_path_factory.mktemp("ds")
    (root / "sharp").mkdir()
    (root / "blur").mkdir()
    for i in range(10):
        a = noise((64, 64), 300 + i, contrast=0.5 + 0.05 * i)
        to_png(a, root / "sharp" / f"s{i:02d}.png")
        to_png(blur(a, 1.5 + 0.1 * i), root / "blur" / f"b{i:02d}.png")
    return root


@pytest.fixture(scope="module")
def global_model(dataset, tmp_path_factory):
    d = tmp_path_factory.mktemp("gm")
    assert main(["extract", str(dataset), "--variant", "global", "--out", str(d / "f.csv")]) == 0
    assert main(["train", str(d / "f.csv"), "--out", str(d / "m.json")]) == 0
    return d / "m.json"


def toy_csv(path, one_class=False):
    r = np.random.default_rng(0)
    X = np.vstack([r.normal(0, 0.2, (10, 3)), r.normal(3, 0.2, (10, 3))])
    y = [1] * 20 if one_class else [0] * 10 + [1] * 10
    write_feature_csv(path, X, y)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestExtract:
    def test_lbp_grid_shape(self, tmp_path):
        root = tmp_path / "two"
        for cls, a in (("sharp", noise((224, 224), 1)), ("blur", blur(noise((224, 224), 2), 2))):
            (root / cls).mkdir(parents=True)
            to_png(a, root / cls / "x.png")
        out = tmp_path / "f.csv"
        assert main(["extract", str(root), "--variant", "lbp-grid", "--grid", "7", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 3
        assert all(len(r) == 1 + 294 for r in rows)
        assert [r[0] for r in rows[1:]] == ["1", "0"]  # manifest order: blur/ before sharp/
        assert read_feature_csv(out)[2] == "lbp-grid/g7/t0.016/w21/e1e-12"

    def test_global_columns(self, dataset, tmp_path):
        out = tmp_path / "g.csv"
        assert main(["extract", str(dataset), "--variant", "global", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["label", "f0", "f1", "f2", "f3"]
        assert len(rows) == 21

    def test_missing_dir(self, tmp_path, capsys):
        assert main(["extract", str(tmp_path / "nope"), "--out", str(tmp_path / "f.csv")]) == 2
        assert "EmptyDataset" in capsys.readouterr().err
        assert not (tmp_path / "f.csv").exists()

    def test_unlabeled(self, dataset, tmp_path):
        out = tmp_path / "u.csv"
        assert main(["extract", str(dataset / "sharp"), "--unlabeled", "--variant", "global",
                     "--out", str(out)]) == 0
        X, y, _ = read_feature_csv(out)
        assert X.shape == (10, 4) and y == [None] * 10


class TestTrain:
    def test_toy(self, tmp_path, caplog):
        caplog.set_level(logging.INFO, logger="patchblur")
        assert main(["train", str(toy_csv(tmp_path / "t.csv")), "--out", str(tmp_path / "m.json")]) == 0
        assert "(6, 0.3, 100, 0)" in caplog.text
        assert "training accuracy: 1.0000" in caplog.text
        model = json.loads((tmp_path / "m.json").read_text())
        assert model["format_version"] == 1 and len(model["trees"]) == 100

    def test_one_class(self, tmp_path, capsys):
        path = toy_csv(tmp_path / "t.csv", one_class=True)
        assert main(["train", str(path), "--out", str(tmp_path / "m.json")]) == 2
        assert "DegenerateLabels" in capsys.readouterr().err

    def test_conflicting_flags(self, dataset, tmp_path):
        out = tmp_path / "g.csv"
        main(["extract", str(dataset), "--variant", "global", "--out", str(out)])
        assert main(["train", str(out), "--variant", "grid", "--out", str(tmp_path / "m.json")]) == 2


class TestEval:
    def test_table_and_json(self, tmp_path, capsys):
        path = toy_csv(tmp_path / "t.csv")
        out = tmp_path / "r.json"
        assert main(["eval", str(path), "--n-estimators", "10", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "±" in text and "20%" in text
        rep = json.loads(out.read_text())
        assert len(rep["per_run"]) == 25 and rep["mean"]["accuracy"] >= 0.99
        assert out.with_suffix(".txt").read_text() == text

    def test_deterministic(self, tmp_path):
        path = toy_csv(tmp_path / "t.csv")
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}.json"
            main(["eval", str(path), "--n-estimators", "5", "--seed", "3", "--out", str(out)])
            outs.append(out.read_text())
        assert outs[0] == outs[1]


class TestPredict:
    def test_dir_matches_files(self, dataset, global_model, tmp_path):
        main(["predict", str(global_model), str(dataset / "blur"), "--out", str(tmp_path / "d.csv")])
        files = sorted((dataset / "blur").glob("*.png"))
        main(["predict", str(global_model), *map(str, files), "--out", str(tmp_path / "f.csv")])
        a, b = read_rows(tmp_path / "d.csv"), read_rows(tmp_path / "f.csv")
        assert a == b and len(a) == 11
        assert a[0] == ["path", "probability", "label"]

    def test_training_image_label(self, dataset, global_model, capsys):
        assert main(["predict", str(global_model), str(dataset / "blur" / "b03.png")]) == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert 0.0 < float(row[1]) < 1.0 and row[2] == "1"

    def test_constant_image(self, global_model, tmp_path, capsys):
        to_png(np.full((40, 40), 0.5), tmp_path / "c.png")
        assert main(["predict", str(global_model), str(tmp_path / "c.png")]) == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert 0.0 < float(row[1]) < 1.0 and row[2] in ("0", "1")

    def test_mismatched_grid(self, dataset, global_model, capsys):
        assert main(["predict", str(global_model), str(dataset / "blur"), "--variant", "grid",
                     "--grid", "3"]) == 2
        assert "ConfigMismatch" in capsys.readouterr().err

    def test_missing_model(self, tmp_path):
        assert main(["predict", str(tmp_path / "none.json"), str(tmp_path)]) == 2


class TestHeatmap:
    def test_writes_overlay_and_json(self, dataset, global_model, tmp_path, capsys):
        out = tmp_path / "h.png"
        assert main(["heatmap", str(global_model), str(dataset / "sharp" / "s00.png"), "--out", str(out)]) == 0
        res = json.loads((tmp_path / "h.json").read_text())
        assert len(res["cells"]) == 9
        assert json.loads(capsys.readouterr().out) == res
        assert out.stat().st_size > 0

    def test_grid_model_rejected(self, dataset, tmp_path):
        main(["extract", str(dataset), "--variant", "grid", "--grid", "3", "--out", str(tmp_path / "f.csv")])
        main(["train", str(tmp_path / "f.csv"), "--n-estimators", "3", "--out", str(tmp_path / "m.json")])
        rc = main(["heatmap", str(tmp_path / "m.json"), str(dataset / "sharp" / "s00.png"),
                   "--out", str(tmp_path / "h.png")])
        assert rc == 2


class TestBench:
    def test_report(self, dataset, global_model, tmp_path):
        out = tmp_path / "b.json"
        rc = main(["bench", str(global_model), str(dataset / "sharp" / "s00.png"), "--sizes", "32x32,48x48",
                   "--repeats", "3", "--decode", "--out", str(out), "--runs-csv", str(tmp_path / "r.csv")])
        assert rc == 0
        rep = json.loads(out.read_text())
        assert [s["pixel_count"] for s in rep["per_size"]] == [1024, 2304]
        assert all(len(s["runs_ms"]) == 3 for s in rep["per_size"])
        assert len(rep["decode_ms"]) == 1
        assert len(read_rows(tmp_path / "r.csv")) == 7

    def test_repeats_too_low(self, dataset, global_model):
        assert main(["bench", str(global_model), str(dataset / "sharp"), "--repeats", "1"]) == 2

    def test_bad_sizes(self, dataset, global_model):
        assert main(["bench", str(global_model), str(dataset / "sharp"), "--sizes", "axb"]) == 2
