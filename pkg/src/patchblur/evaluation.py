"""
Repeated stratified K-fold cross-validation and classification metrics.

Labels follow the dataset convention: 1 = blur (positive), 0 = sharp.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, SingleClass, TooFewSamples
from .gbdt import TrainParams, train

logger = logging.getLogger(__name__)

METRICS = ("accuracy", "auc", "f1_blur", "f1_sharp")


@dataclass
class FoldPlan:
    shuffles: int = 5
    k: int = 5
    seed: int = 0
    assignments: list = field(default_factory=list)  # one int array per shuffle

    @property
    def validation_fraction(self) -> float:
        return 1.0 / self.k

    def splits(self):
        """Yield ``(shuffle, fold, train_idx, valid_idx)`` in fixed order."""
        for s, fold_of in enumerate(self.assignments):
            for f in range(self.k):
                yield s, f, np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)


def make_folds(labels, shuffles: int = 5, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified fold assignment, repeated over ``shuffles`` random permutations.

    Within each class the shuffled samples are dealt round-robin to the
    folds; the dealing continues from where the previous class stopped so
    fold sizes stay balanced overall.
    """
    y = np.asarray(labels)
    if k < 2 or shuffles < 1:
        raise ValueError("need k >= 2 and shuffles >= 1")
    classes = sorted(np.unique(y).tolist())
    for c in (0, 1):
        n_c = int(np.sum(y == c))
        if n_c < k:
            raise TooFewSamples(f"class {c} has {n_c} samples, fewer than k={k}")
    rng = np.random.default_rng(seed)
    assignments = []
    for _ in range(shuffles):
        fold_of = np.empty(len(y), dtype=np.int64)
        offset = 0
        for c in classes:
            idx = np.flatnonzero(y == c)
            idx = idx[rng.permutation(len(idx))]
            fold_of[idx] = (np.arange(len(idx)) + offset) % k
            offset = (offset + len(idx)) % k
        assignments.append(fold_of)
    return FoldPlan(shuffles, k, seed, assignments)


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve as the normalized Mann-Whitney statistic.

    Tied scores count one half.  Computed from average ranks after sorting.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ShapeMismatch("scores and labels differ in length")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # average 1-based rank for each run of equal scores
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    run_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(run_rank, ends - starts)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _check_pair(preds, labels):
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.shape != y.shape or p.size == 0:
        raise ShapeMismatch("predictions and labels must be non-empty and of equal length")
    return p, y


def accuracy(preds, labels) -> float:
    p, y = _check_pair(preds, labels)
    return float(np.mean(p == y))


def f1(preds, labels, positive: int = 1) -> float:
    """F1 with ``positive`` as the positive class; 0 when precision + recall is 0."""
    p, y = _check_pair(preds, labels)
    tp = np.sum((p == positive) & (y == positive))
    fp = np.sum((p == positive) & (y != positive))
    fn = np.sum((p != positive) & (y == positive))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


@dataclass
class EvalReport:
    per_run: list  # (accuracy, auc, f1_blur, f1_sharp) per fold run
    shuffles: int
    k: int
    label: str = ""

    def _col(self, name):
        return np.array([r[METRICS.index(name)] for r in self.per_run])

    def mean(self, name) -> float:
        return float(np.mean(self._col(name)))

    def std(self, name) -> float:
        col = self._col(name)
        return float(np.std(col, ddof=1)) if len(col) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "shuffles": self.shuffles,
            "k": self.k,
            "validation_fraction": 1.0 / self.k,
            "per_run": [dict(zip(METRICS, r)) for r in self.per_run],
            "mean": {m: self.mean(m) for m in METRICS},
            "std": {m: self.std(m) for m in METRICS},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def table(self) -> str:
        """Plain-text summary in ``mean ± std`` form (accuracy in percent)."""
        name = self.label or "features"
        acc = f"{100 * self.mean('accuracy'):.1f} ± {100 * self.std('accuracy'):.1f}"
        auc = f"{self.mean('auc'):.3f} ± {self.std('auc'):.3f}"
        f1b = f"{self.mean('f1_blur'):.3f} ± {self.std('f1_blur'):.3f}"
        f1s = f"{self.mean('f1_sharp'):.3f} ± {self.std('f1_sharp'):.3f}"
        lines = [
            f"{'Feature Type':<24} | {'Accuracy':<13} | {'AUC':<15} | {'F1 blur':<15} | {'F1 sharp':<15}",
            "-" * 93,
            f"{name:<24} | {acc:<13} | {auc:<15} | {f1b:<15} | {f1s:<15}",
            "",
            f"{self.shuffles} shuffles x {self.k} folds = {len(self.per_run)} runs; "
            f"each run validates on {100 / self.k:.0f}% of the samples (mean ± sample std)",
        ]
        return "\n".join(lines) + "\n"


def cross_validate(X, y, tp: TrainParams = TrainParams(), plan: FoldPlan | None = None,
                   config_id: str | None = None, label: str = "") -> EvalReport:
    """Train on each training split and score the held-out fold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeMismatch(f"{len(X)} feature rows but {len(y)} labels")
    if plan is None:
        plan = make_folds(y, seed=tp.seed)
    runs = []
    for s, f, tr, va in plan.splits():
        model = train(X[tr], y[tr], tp, config_id)
        prob = model.predict_proba(X[va])
        pred = (prob > 0.5).astype(np.int64)
        run = (
            accuracy(pred, y[va]),
            roc_auc(prob, y[va]),
            f1(pred, y[va], positive=1),
            f1(pred, y[va], positive=0),
        )
        logger.debug("shuffle %d fold %d: acc=%.4f auc=%.4f", s, f, run[0], run[1])
        runs.append(run)
    return EvalReport(runs, plan.shuffles, plan.k, label)
