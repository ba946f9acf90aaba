"""
Command-line entry point.

    patchblur extract DATASET_DIR --variant lbp-grid --grid 7 --out features.csv
    patchblur train features.csv --out model.json
    patchblur eval features.csv --out report.json
    patchblur predict model.json IMAGE_OR_DIR [...]
    patchblur heatmap model.json IMAGE --grid 3 --out overlay.png
    patchblur bench model.json IMAGE_OR_DIR [...] --sizes 256x256,512x512

Exit codes: 0 success, 2 bad input or contract violation, 1 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .bench import bench_inference, time_decode
from .errors import ConfigMismatch, InvalidParameter, PatchBlurError
from .evaluation import accuracy, cross_validate, make_folds
from .features import FeatureParams
from .gbdt import TrainParams, load_model, save_model, train
from .grid import FeatureConfig, Variant, extract_vector, read_feature_csv, write_feature_csv
from .heatmap import cell_heatmap, save_heatmap
from .ingest import load_gray, scan_dataset, scan_unlabeled

logger = logging.getLogger("patchblur")

VARIANT_LABELS = {
    Variant.GLOBAL: "Global Feature",
    Variant.GLOBAL_LBP: "Global Feature + LBP",
    Variant.GRID: "Grid {g}x{g}",
    Variant.GRID_GLOBAL_LBP: "Grid {g}x{g} + Global LBP",
    Variant.LBP_GRID: "LBP Grid {g}x{g}",
}


def variant_label(cfg: FeatureConfig) -> str:
    return VARIANT_LABELS[cfg.variant].format(g=cfg.grid)


# -- config flags --------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("feature configuration")
    g.add_argument("--variant", choices=[v.value for v in Variant], default=None)
    g.add_argument("--grid", type=int, choices=(3, 5, 7), default=None)
    g.add_argument("--lbp-threshold", type=float, default=None)
    g.add_argument("--lbp-window", type=int, default=None)


def resolve_config(args, base_id: str | None = None) -> FeatureConfig:
    """Build a FeatureConfig from flags, layered over ``base_id`` if known.

    A flag that contradicts ``base_id`` raises ConfigMismatch.
    """
    base = FeatureConfig.from_id(base_id) if base_id else FeatureConfig()
    variant = Variant(args.variant) if args.variant else base.variant
    grid = args.grid if args.grid is not None else (base.grid if not base.variant.is_global else 7)
    thr = args.lbp_threshold if args.lbp_threshold is not None else base.params.lbp_threshold
    win = args.lbp_window if args.lbp_window is not None else base.params.lbp_window
    cfg = FeatureConfig(variant, grid, FeatureParams(thr, win, base.params.epsilon))
    if base_id and cfg.config_id != base_id:
        raise ConfigMismatch(f"flags select {cfg.config_id!r} but the model/features use {base_id!r}")
    return cfg


def _add_train_flags(p: argparse.ArgumentParser):
    d = TrainParams()
    g = p.add_argument_group("booster parameters")
    g.add_argument("--max-depth", type=int, default=d.max_depth)
    g.add_argument("--learning-rate", type=float, default=d.learning_rate)
    g.add_argument("--n-estimators", type=int, default=d.n_estimators)
    g.add_argument("--gamma", type=float, default=d.gamma)
    g.add_argument("--reg-lambda", type=float, default=d.reg_lambda)
    g.add_argument("--min-child-weight", type=float, default=d.min_child_weight)
    g.add_argument("--base-score", type=float, default=d.base_score)


def _train_params(args) -> TrainParams:
    return TrainParams(
        max_depth=args.max_depth,
        learning_rate=args.learning_rate,
        n_estimators=args.n_estimators,
        gamma=args.gamma,
        reg_lambda=args.reg_lambda,
        min_child_weight=args.min_child_weight,
        base_score=args.base_score,
        seed=args.seed,
    )


def _expand_images(items) -> list[Path]:
    paths = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            paths.extend(scan_unlabeled(p))
        else:
            paths.append(p)  # load_gray reports a missing file
    return paths


def _labeled_features(path, args):
    X, y, config_id = read_feature_csv(path)
    if any(v is None for v in y):
        raise InvalidParameter(f"{path} contains unlabeled rows; it cannot be used for training")
    cfg = resolve_config(args, config_id) if config_id else None
    if cfg is None and any(getattr(args, k) is not None for k in ("variant", "grid")):
        cfg = resolve_config(args)
    if cfg is not None and X.shape[1] != cfg.length:
        raise ConfigMismatch(f"{path} has {X.shape[1]} features, {cfg.config_id} needs {cfg.length}")
    return X, np.array(y, dtype=np.int64), cfg


# -- commands ------------------------------------------------------------------

def cmd_extract(args) -> int:
    cfg = resolve_config(args)
    if args.unlabeled:
        paths = scan_unlabeled(args.input)
        labels = [None] * len(paths)
    else:
        manifest = scan_dataset(args.input, strict=False)
        paths, labels = manifest.paths, manifest.labels
        logger.info("dataset %s: %s", args.input, manifest.class_counts)
    rows = []
    for i, path in enumerate(paths, 1):
        rows.append(extract_vector(load_gray(path), cfg, workers=args.workers).values)
        if i % 50 == 0:
            logger.info("extracted %d/%d", i, len(paths))
    write_feature_csv(args.out, rows, labels, cfg.config_id, sources=paths)
    logger.info("wrote %d rows x %d features (%s) to %s", len(rows), cfg.length, cfg.config_id, args.out)
    return 0


def cmd_train(args) -> int:
    X, y, cfg = _labeled_features(args.features, args)
    tp = _train_params(args)
    logger.info("(max-depth, learning-rate, n-estimators, gamma) = %s", tp.headline())
    model = train(X, y, tp, cfg.config_id if cfg else None)
    acc = accuracy(model.predict_label(X), y)
    logger.info("training accuracy: %.4f on %d samples", acc, len(y))
    save_model(model, args.out)
    logger.info("model written to %s", args.out)
    return 0


def cmd_eval(args) -> int:
    X, y, cfg = _labeled_features(args.features, args)
    tp = _train_params(args)
    logger.info("(max-depth, learning-rate, n-estimators, gamma) = %s", tp.headline())
    plan = make_folds(y, shuffles=args.shuffles, k=args.k, seed=args.seed)
    label = variant_label(cfg) if cfg else Path(args.features).stem
    report = cross_validate(X, y, tp, plan, cfg.config_id if cfg else None, label=label)
    table = report.table()
    sys.stdout.write(table)
    if args.out:
        atomic_write_text(args.out, report.to_json())
        atomic_write_text(Path(args.out).with_suffix(".txt"), table)
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    cfg = resolve_config(args, model.config_id)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "probability", "label"])
    for path in _expand_images(args.inputs):
        vec = extract_vector(load_gray(path), cfg)
        prob = float(model.predict_proba(vec.values)[0])
        w.writerow([str(path), repr(prob), int(prob > args.threshold)])
    if args.out:
        atomic_write_text(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_heatmap(args) -> int:
    model = load_model(args.model)
    img = load_gray(args.image)
    result = cell_heatmap(model, img, args.grid, args.threshold)
    json_out = args.json or Path(args.out).with_suffix(".json")
    save_heatmap(img, result, args.out, json_out)
    logger.info("overall label %s; overlay %s; cells %s", result.label, args.out, json_out)
    sys.stdout.write(result.to_json())
    return 0


def _parse_sizes(text: str):
    sizes = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        w, sep, h = tok.partition("x")
        sizes.append((int(w), int(h if sep else w)))
    return sizes


def cmd_bench(args) -> int:
    model = load_model(args.model)
    cfg = resolve_config(args, model.config_id)
    images, decode_ms = time_decode(_expand_images(args.inputs))
    try:
        sizes = _parse_sizes(args.sizes)
    except ValueError as exc:
        raise InvalidParameter(f"bad --sizes {args.sizes!r}") from exc
    report = bench_inference(model, images, sizes, args.repeats, cfg, workers=args.workers)
    if args.decode:
        report.decode_ms = decode_ms
    for s in report.per_size:
        logger.info("%dx%d: %.1f ± %.1f ms for %d image(s)", s.width, s.height, s.mean_ms, s.std_ms,
                    report.n_images)
    fit = report.linear_fit
    logger.info("linear fit: %.3g ms/pixel, intercept %.2f ms, r^2 %.4f",
                fit.slope_ms_per_pixel, fit.intercept_ms, fit.r_squared)
    if args.out:
        report.save(args.out, args.runs_csv)
    else:
        sys.stdout.write(report.to_json())
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchblur", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute a feature CSV for a dataset directory")
    p.add_argument("input")
    p.add_argument("--unlabeled", action="store_true", help="flat directory without class folders")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit a model on a feature CSV")
    p.add_argument("features")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="repeated stratified k-fold cross-validation")
    p.add_argument("features")
    p.add_argument("--shuffles", type=int, default=5)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_config_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="blur probability per image")
    p.add_argument("model")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("heatmap", help="per-cell blur probabilities with a global-feature model")
    p.add_argument("model")
    p.add_argument("image")
    p.add_argument("--grid", type=int, default=3)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="overlay PNG path")
    p.add_argument("--json", help="cell result path (default: overlay path with .json)")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("bench", help="time extraction + prediction across image sizes")
    p.add_argument("model")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--sizes", default="256x256,512x512,1024x1024,2048x2048")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--workers", type=int, default=1, help=">1 enables patch-parallel extraction")
    p.add_argument("--decode", action="store_true", help="also report per-image decode time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--runs-csv", help="write raw per-run timings as CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except PatchBlurError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception:
        logger.exception("internal failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
