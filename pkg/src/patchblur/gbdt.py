"""
Second-order gradient-boosted regression trees for binary classification.

Each boosting round fits one tree to the gradient ``p - y`` and hessian
``p (1 - p)`` of the logistic loss at the current margins.  Splits are found
by exact greedy enumeration over every distinct adjacent pair of sorted
feature values; a sample goes left when ``x[feature] < threshold``.

Ties in split gain resolve to the lower feature index, then the lower
threshold, so training is deterministic.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .errors import (
    ConfigMismatch,
    DegenerateLabels,
    InvalidParameter,
    NonFiniteFeature,
    ShapeMismatch,
    UnreadableFile,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
LEAF = -1


@dataclass(frozen=True)
class TrainParams:
    max_depth: int = 6
    learning_rate: float = 0.3
    n_estimators: int = 100
    gamma: float = 0.0
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    base_score: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise InvalidParameter(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.n_estimators < 1:
            raise InvalidParameter(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.max_depth < 0:
            raise InvalidParameter(f"max_depth must be >= 0, got {self.max_depth}")
        if not 0 < self.base_score < 1:
            raise InvalidParameter(f"base_score must be in (0, 1), got {self.base_score}")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise InvalidParameter("reg_lambda, gamma and min_child_weight must be >= 0")

    def headline(self) -> str:
        """``(max_depth, learning_rate, n_estimators, gamma)`` as a tuple string."""
        return f"({self.max_depth}, {self.learning_rate:g}, {self.n_estimators}, {self.gamma:g})"


@dataclass
class Tree:
    """Flat binary tree; node 0 is the root, leaves have ``feature == -1``."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_leaf(self, weight: float) -> int:
        return self._add(LEAF, 0.0, -1, -1, weight)

    def add_split(self, feature: int, threshold: float) -> int:
        return self._add(feature, threshold, -1, -1, 0.0)

    def _add(self, f, t, l, r, v) -> int:
        self.feature.append(int(f))
        self.threshold.append(float(t))
        self.left.append(int(l))
        self.right.append(int(r))
        self.value.append(float(v))
        return len(self.feature) - 1

    def __len__(self):
        return len(self.feature)

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def split_features(self) -> list:
        """Split feature indices in node-id order."""
        return [f for f in self.feature if f != LEAF]

    def leaf_weights(self) -> list:
        return [v for f, v in zip(self.feature, self.value) if f == LEAF]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        active = feat[node] != LEAF
        while active.any():
            i = rows[active]
            n = node[i]
            go_left = X[i, feat[n]] < thr[n]
            node[i] = np.where(go_left, left[n], right[n])
            active = feat[node] != LEAF
        return np.asarray(self.value)[node]

    def to_dict(self) -> dict:
        nodes = []
        for i in range(len(self)):
            if self.feature[i] == LEAF:
                nodes.append({"id": i, "leaf": self.value[i]})
            else:
                nodes.append({
                    "id": i,
                    "feature": self.feature[i],
                    "threshold": self.threshold[i],
                    "left": self.left[i],
                    "right": self.right[i],
                })
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict, n_features: int) -> "Tree":
        nodes = sorted(d["nodes"], key=lambda n: n["id"])
        if [n["id"] for n in nodes] != list(range(len(nodes))) or not nodes:
            raise ShapeMismatch("tree node ids must be 0..n-1")
        t = cls()
        for n in nodes:
            if "leaf" in n:
                t.add_leaf(float(n["leaf"]))
            else:
                idx = t.add_split(int(n["feature"]), float(n["threshold"]))
                t.left[idx], t.right[idx] = int(n["left"]), int(n["right"])
        t._validate(n_features)
        return t

    def _validate(self, n_features: int):
        seen = set()
        stack = [0]
        while stack:
            i = stack.pop()
            if i in seen or not 0 <= i < len(self):
                raise ShapeMismatch(f"malformed tree: bad or repeated node {i}")
            seen.add(i)
            if self.feature[i] != LEAF:
                if not 0 <= self.feature[i] < n_features:
                    raise ShapeMismatch(f"split feature {self.feature[i]} out of range")
                stack += [self.left[i], self.right[i]]
        if len(seen) != len(self):
            raise ShapeMismatch("malformed tree: unreachable nodes")


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def sigmoid(margin):
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-np.asarray(margin, dtype=np.float64)))
    # keep strictly inside (0, 1) even when exp saturates
    return np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


@dataclass
class GbdtModel:
    trees: list
    params: TrainParams
    config_id: str | None
    n_features: int

    @property
    def base_margin(self) -> float:
        return _logit(self.params.base_score)

    def margin(self, X) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        m = np.full(len(X), self.base_margin)
        for t in self.trees:
            m += t.predict(X)
        return m

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def predict_label(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) > threshold).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "params": asdict(self.params),
            "config_id": self.config_id,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ShapeMismatch(f"unsupported model format_version {d.get('format_version')!r}")
        n = int(d["n_features"])
        return cls(
            trees=[Tree.from_dict(t, n) for t in d["trees"]],
            params=TrainParams(**d["params"]),
            config_id=d.get("config_id"),
            n_features=n,
        )


def save_model(model: GbdtModel, path):
    # json writes floats with repr(), the shortest string that round-trips exactly
    atomic_write_text(Path(path), json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path) -> GbdtModel:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UnreadableFile(f"cannot read model {path}: {exc}") from exc
    try:
        return GbdtModel.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"malformed model file {path}: {exc}") from exc


def _as_matrix(X) -> np.ndarray:
    rows = [getattr(x, "values", x) for x in X] if isinstance(X, (list, tuple)) else X
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return X


def _check_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = _as_matrix(X)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeMismatch(f"expected {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains NaN or infinity")
    return X


def logloss(y, p) -> float:
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


class _TreeGrower:
    """Grows one tree on fixed gradient statistics.

    ``order`` is the per-feature argsort of the training matrix, shape
    ``(n_features, n_samples)``; each node carries its own members in that
    per-feature sorted order so children are obtained by a stable filter.
    """

    def __init__(self, X, Xt, order, grad, hess, params: TrainParams):
        self.X = X
        self.Xt = Xt
        self.order = order
        self.g = grad
        self.h = hess
        self.p = params
        self.tree = Tree()
        self.update = np.zeros(len(grad))

    def grow(self) -> Tree:
        self._node(self.order, 0)
        return self.tree

    def _leaf(self, members: np.ndarray, G: float, H: float) -> int:
        w = -G / (H + self.p.reg_lambda) * self.p.learning_rate
        self.update[members] = w
        return self.tree.add_leaf(w)

    def _best_split(self, node_order: np.ndarray, G: float, H: float):
        n_s = node_order.shape[1]
        if n_s < 2:
            return None
        p = self.p
        vals = np.take_along_axis(self.Xt, node_order, axis=1)
        GL = np.cumsum(self.g[node_order], axis=1)[:, :-1]
        HL = np.cumsum(self.h[node_order], axis=1)[:, :-1]
        GR = G - GL
        HR = H - HL
        lam = p.reg_lambda
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - p.gamma
        ok = (vals[:, :-1] < vals[:, 1:]) & (HL >= p.min_child_weight) & (HR >= p.min_child_weight)
        ok &= np.isfinite(gain)
        gain = np.where(ok, gain, -np.inf)
        # argmax returns the first maximum: lowest feature, then lowest position
        flat = int(np.argmax(gain))
        f, i = divmod(flat, n_s - 1)
        best = gain[f, i]
        if not best > 0:
            return None
        lo, hi = vals[f, i], vals[f, i + 1]
        thr = lo + (hi - lo) / 2.0
        if not lo < thr <= hi:
            thr = hi
        return f, float(thr)

    def _node(self, node_order: np.ndarray, depth: int) -> int:
        members = node_order[0]
        G = float(np.sum(self.g[members]))
        H = float(np.sum(self.h[members]))
        split = None
        if depth < self.p.max_depth:
            split = self._best_split(node_order, G, H)
        if split is None:
            return self._leaf(members, G, H)
        f, thr = split
        nid = self.tree.add_split(f, thr)
        go_left = self.X[:, f] < thr
        sel = go_left[node_order]
        n_left = int(sel[0].sum())
        left_order = node_order[sel].reshape(len(node_order), n_left)
        right_order = node_order[~sel].reshape(len(node_order), -1)
        self.tree.left[nid] = self._node(left_order, depth + 1)
        self.tree.right[nid] = self._node(right_order, depth + 1)
        return nid


def train(X, y, params: TrainParams = TrainParams(), config_id: str | None = None,
          history: list | None = None) -> GbdtModel:
    """Fit a boosted ensemble; ``history`` (if given) receives the training
    logloss before round 1 and after every round."""
    X = _check_matrix(X)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    if X.shape[0] < 2 or X.shape[1] < 1:
        raise ShapeMismatch("need at least 2 samples and 1 feature")
    if not np.isin(y, (0, 1)).all():
        raise DegenerateLabels("labels must be 0 or 1")
    y = y.astype(np.float64)
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")

    Xt = np.ascontiguousarray(X.T)
    order = np.argsort(Xt, axis=1, kind="stable")
    model = GbdtModel([], params, config_id, X.shape[1])
    margin = np.full(len(y), model.base_margin)
    if history is not None:
        history.append(logloss(y, sigmoid(margin)))

    for _ in range(params.n_estimators):
        prob = 1.0 / (1.0 + np.exp(-margin))
        grad = prob - y
        hess = prob * (1.0 - prob)
        grower = _TreeGrower(X, Xt, order, grad, hess, params)
        model.trees.append(grower.grow())
        margin += grower.update
        if history is not None:
            history.append(logloss(y, sigmoid(margin)))
    return model


def _config_guard(model: GbdtModel, x):
    cid = getattr(x, "config_id", None)
    if cid is not None and model.config_id is not None and cid != model.config_id:
        raise ConfigMismatch(f"vector built with {cid!r}, model expects {model.config_id!r}")


def predict_proba(model: GbdtModel, x) -> float:
    """Blur probability for one feature vector."""
    _config_guard(model, x)
    return float(model.predict_proba(getattr(x, "values", x))[0])


def predict_label(model: GbdtModel, x, threshold: float = 0.5) -> int:
    return int(predict_proba(model, x) > threshold)
