"""Random forest of CART trees built from scratch.

Split quality is the weighted Gini impurity decrease with balanced class
weights; because the parent term is constant within a node, trees maximise
the equivalent proxy sum_children (sum_k w_k^2 n_k^2) / (sum_k w_k n_k).
Candidate thresholds are midpoints between consecutive observed values.
Ties go to the lowest feature index, then the lowest threshold. Zero-gain
splits are allowed, which is what lets small forests memorise patterns
like XOR that have no single informative feature.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .. import rng
from ..dataset import EncodedMatrix
from . import backend

MAX_FEATURES_CHOICES = ("sqrt", "all")
CLASS_WEIGHTING_CHOICES = ("balanced", "none")


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: str = "sqrt"
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    bootstrap: bool = True
    class_weighting: str = "balanced"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ForestError(f"n_trees={self.n_trees} must be >= 1")
        if self.max_features not in MAX_FEATURES_CHOICES:
            raise ForestError(f"max_features={self.max_features!r} not in {MAX_FEATURES_CHOICES}")
        if self.min_samples_split < 2:
            raise ForestError(f"min_samples_split={self.min_samples_split} must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ForestError(f"max_depth={self.max_depth} must be >= 1 or None")
        if self.class_weighting not in CLASS_WEIGHTING_CHOICES:
            raise ForestError(
                f"class_weighting={self.class_weighting!r} not in {CLASS_WEIGHTING_CHOICES}"
            )
        if self.seed < 0:
            raise ForestError(f"seed={self.seed} must be >= 0")


class Tree(NamedTuple):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    proba: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())


def balanced_weights(labels: Sequence[int]) -> Dict[int, float]:
    """Per-class weight N / (K * N_k) over the classes that occur."""
    labels = list(labels)
    if not labels:
        raise ForestError("cannot compute class weights for an empty label list")
    classes = sorted(set(labels))
    n = len(labels)
    k = len(classes)
    return {c: n / (k * labels.count(c)) for c in classes}


@dataclass
class Forest:
    params: ForestParams
    classes: Tuple[int, ...]
    feature_names: Tuple[str, ...]
    trees: List[Tree]
    class_weight: np.ndarray = field(repr=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Average of per-tree leaf class distributions, tree order pinned."""
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if X.shape[1] != self.n_features:
            raise ForestError(f"input has {X.shape[1]} features, forest expects {self.n_features}")
        acc = np.zeros((X.shape[0], len(self.classes)), dtype=np.float64)
        for tree in self.trees:
            leaves = backend.apply_tree(tree.feature, tree.threshold, tree.left, tree.right, X)
            acc += tree.proba[leaves]
        acc /= len(self.trees)
        return acc

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Argmax class; probability ties resolve to the smallest label."""
        proba = self.predict_proba(X)
        return np.asarray(self.classes, dtype=np.int64)[np.argmax(proba, axis=1)]


def _class_weight_vector(y_idx: np.ndarray, n_classes: int, weighting: str) -> np.ndarray:
    counts = np.bincount(y_idx, minlength=n_classes)
    w = np.ones(n_classes, dtype=np.float64)
    if weighting == "balanced":
        present = counts > 0
        k = int(present.sum())
        n = len(y_idx)
        w[present] = n / (k * counts[present])
        w[~present] = 0.0
    return w


def fit(
    matrix: EncodedMatrix,
    params: ForestParams,
    classes: Optional[Sequence[int]] = None,
    threads: int = 1,
) -> Forest:
    """Train a forest. Declaring `classes` fixes the probability vector
    layout even when some classes are absent from the training labels;
    otherwise classes are inferred from the labels. `threads` never
    changes the result, only how tree builds are scheduled."""
    X = np.ascontiguousarray(matrix.X, dtype=np.float64)
    y = np.asarray(matrix.y, dtype=np.int64)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ForestError("matrix X and y shapes are inconsistent")
    if len(y) == 0:
        raise ForestError("cannot fit a forest on an empty matrix")

    if classes is None:
        class_tuple = tuple(int(c) for c in np.unique(y))
    else:
        class_tuple = tuple(sorted(int(c) for c in classes))
        if len(set(class_tuple)) != len(class_tuple):
            raise ForestError("declared classes contain duplicates")
    class_arr = np.asarray(class_tuple, dtype=np.int64)
    if not np.isin(y, class_arr).all():
        bad = sorted(set(y.tolist()) - set(class_tuple))
        raise ForestError(f"labels {bad} not in declared classes {class_tuple}")
    y_idx = np.searchsorted(class_arr, y)

    weight = _class_weight_vector(y_idx, len(class_tuple), params.class_weighting)

    d = X.shape[1]
    codes = np.empty_like(X, dtype=np.int32)
    uvals_parts = []
    uoff = np.zeros(d + 1, dtype=np.int64)
    for j in range(d):
        uniq, inv = np.unique(X[:, j], return_inverse=True)
        codes[:, j] = inv.astype(np.int32)
        uvals_parts.append(uniq)
        uoff[j + 1] = uoff[j] + len(uniq)
    uvals = np.concatenate(uvals_parts)

    if params.max_features == "sqrt":
        n_select = max(1, math.isqrt(d))
    else:
        n_select = d
    max_depth = -1 if params.max_depth is None else params.max_depth

    def build(t: int) -> Tree:
        arrays = backend.build_tree(
            codes,
            uvals,
            uoff,
            y_idx,
            weight,
            n_select,
            params.min_samples_split,
            max_depth,
            params.bootstrap,
            rng.mix(params.seed, t),
        )
        return Tree(*arrays)

    if threads <= 1:
        trees = [build(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(params.n_trees)))

    return Forest(
        params=params,
        classes=class_tuple,
        feature_names=tuple(matrix.feature_names),
        trees=trees,
        class_weight=weight,
    )


def _fmt_float(x: float) -> str:
    return "%.9g" % x


def _canonical(obj) -> str:
    """JSON with sorted keys and fixed 9-significant-digit floats."""
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_canonical(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canonical(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(obj)


def canonical_json(obj) -> str:
    return _canonical(obj)


def to_doc(forest: Forest) -> dict:
    return {
        "classes": list(forest.classes),
        "feature_names": list(forest.feature_names),
        "class_weight": forest.class_weight.tolist(),
        "params": {
            "n_trees": forest.params.n_trees,
            "max_features": forest.params.max_features,
            "min_samples_split": forest.params.min_samples_split,
            "max_depth": forest.params.max_depth,
            "bootstrap": forest.params.bootstrap,
            "class_weighting": forest.params.class_weighting,
            "seed": forest.params.seed,
        },
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "proba": t.proba.tolist(),
            }
            for t in forest.trees
        ],
    }


def to_json(forest: Forest) -> str:
    return canonical_json(to_doc(forest))


def from_doc(doc: dict) -> Forest:
    try:
        params = ForestParams(**doc["params"])
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                proba=np.asarray(t["proba"], dtype=np.float64),
            )
            for t in doc["trees"]
        ]
        return Forest(
            params=params,
            classes=tuple(int(c) for c in doc["classes"]),
            feature_names=tuple(doc["feature_names"]),
            trees=trees,
            class_weight=np.asarray(doc["class_weight"], dtype=np.float64),
        )
    except (KeyError, TypeError) as exc:
        raise ForestError(f"malformed forest document: {exc}") from None


def from_json(text: str) -> Forest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ForestError(f"malformed forest document: {exc}") from None
    return from_doc(doc)
