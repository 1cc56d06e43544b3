"""CART trees and bagged random forests for binary labels.

Trees are stored as flat node arrays. Internal nodes send ``x[feature] <=
threshold`` to ``left``; leaves have ``feature == -1`` and carry the fraction
of positive training samples that reached them.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ClassStarvedError, SchemaMismatchError
from ._backend import kernels
from .features import FeatureVector

MODEL_FORMAT = "steersim-forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) bool
    schema_id: int = 0

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=bool)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(X) != len(y):
            raise ValueError(f"{len(X)} feature rows but {len(y)} labels")
        if len(X) == 0:
            raise ValueError("dataset is empty")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or infinite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector], labels: Sequence[bool]) -> "Dataset":
        schemas = {v.schema_id for v in vectors}
        if len(schemas) > 1:
            raise SchemaMismatchError(f"mixed feature schemas {sorted(schemas)}")
        X = np.array([v.values for v in vectors], dtype=np.float64)
        return cls(X, np.asarray(labels, dtype=bool), schemas.pop() if schemas else 0)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.schema_id)

    def flipped(self) -> "Dataset":
        return Dataset(self.features, ~self.labels, self.schema_id)


def gini(labels: Sequence[bool]) -> float:
    labels = np.asarray(labels, dtype=bool)
    if labels.size == 0:
        raise ValueError("gini of an empty label set")
    p = labels.mean()
    return float(1.0 - p * p - (1.0 - p) ** 2)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    features_per_split: int | None = None  # None: ceil(sqrt(d)) in a forest, all in a lone tree
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")


@dataclass(frozen=True)
class TreeModel:
    feature: np.ndarray  # intp, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # positive fraction of the training samples in the node
    count: np.ndarray
    n_features: int
    schema_id: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):  # children always follow their parent
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return kernels.predict(self.feature, self.threshold, self.left, self.right, self.value,
                               np.ascontiguousarray(X, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n_features: int, schema_id: int) -> "TreeModel":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.intp),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.intp),
            right=np.asarray(d["right"], dtype=np.intp),
            value=np.asarray(d["value"], dtype=np.float64),
            count=np.asarray(d["count"], dtype=np.int64),
            n_features=n_features,
            schema_id=schema_id,
        )


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeModel, ...]
    params: ForestParams
    n_features: int
    schema_id: int = 0

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_batch(X)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema_id": self.schema_id,
            "n_features": self.n_features,
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a forest model document: format={d.get('format')!r}")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        n, schema = int(d["n_features"]), int(d["schema_id"])
        return cls(
            trees=tuple(TreeModel.from_dict(t, n, schema) for t in d["trees"]),
            params=ForestParams(**d["params"]),
            n_features=n,
            schema_id=schema,
        )


def _grow(X: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int, n_candidates: int,
          rng: np.random.Generator | None, schema_id: int) -> TreeModel:
    m, d = X.shape
    y8 = y.astype(np.int8)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T, dtype=np.intp)
    all_features = np.arange(d, dtype=np.intp)
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(start, end):
        n = end - start
        pos = int(y8[order[0, start:end]].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(pos / n)
        count.append(n)
        return len(feature) - 1, pos

    root, root_pos = new_node(0, m)
    stack = [(root, 0, m, 0, root_pos)]
    while stack:  # preorder, left subtree first: fixes the order of RNG draws
        node, start, end, depth, pos = stack.pop()
        n = end - start
        if pos == 0 or pos == n or depth >= max_depth or n < 2 * min_leaf:
            continue
        if n_candidates >= d:
            candidates = all_features
        else:
            candidates = np.sort(rng.choice(d, size=n_candidates, replace=False)).astype(np.intp)
        f, thr, _ = kernels.best_split(X, y8, order, start, end, candidates, min_leaf)
        if f < 0:
            continue
        n_left = kernels.partition(order, X, start, end, f, thr)
        mid = start + n_left
        lnode, lpos = new_node(start, mid)
        rnode, rpos = new_node(mid, end)
        feature[node], threshold[node], left[node], right[node] = f, thr, lnode, rnode
        stack.append((rnode, mid, end, depth + 1, rpos))
        stack.append((lnode, start, mid, depth + 1, lpos))
    return TreeModel(
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        value=np.array(value, dtype=np.float64),
        count=np.array(count, dtype=np.int64),
        n_features=d,
        schema_id=schema_id,
    )


def train_tree(data: Dataset, params: ForestParams = ForestParams(), tree_index: int = 0) -> TreeModel:
    """Greedy CART on Gini impurity.

    Split candidates are midpoints between consecutive distinct values. Ties in
    impurity go to the lowest feature index, then the lowest threshold, so
    negating every label reproduces the same split structure. A node becomes a
    leaf when it is pure, at ``max_depth``, too small to leave ``min_leaf``
    samples on both sides, or has no feature with two distinct values.
    """
    d = data.n_features
    k = d if params.features_per_split is None else min(params.features_per_split, d)
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, tree_index]))
    return _grow(data.features, data.labels, params.max_depth, params.min_leaf, k, rng, data.schema_id)


def _forest_tree(data: Dataset, params: ForestParams, k: int, t: int) -> TreeModel:
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, t]))
    X, y = data.features, data.labels
    if params.bootstrap:
        rows = rng.integers(0, len(y), size=len(y))
        X, y = X[rows], y[rows]
    return _grow(X, y, params.max_depth, params.min_leaf, k, rng, data.schema_id)


def default_features_per_split(d: int) -> int:
    return max(1, math.ceil(math.sqrt(d)))


def train_forest(data: Dataset, params: ForestParams = ForestParams()) -> ForestModel:
    """Bagged CART ensemble; tree ``t`` draws from the stream (seed, t) only."""
    d = data.n_features
    k = default_features_per_split(d) if params.features_per_split is None else min(params.features_per_split, d)
    if params.n_jobs > 1:
        with ThreadPoolExecutor(params.n_jobs) as pool:
            trees = list(pool.map(lambda t: _forest_tree(data, params, k, t), range(params.n_trees)))
    else:
        trees = [_forest_tree(data, params, k, t) for t in range(params.n_trees)]
    return ForestModel(tuple(trees), params, d, data.schema_id)


def require_both_classes(labels: np.ndarray, what: str = "labels") -> None:
    labels = np.asarray(labels, dtype=bool)
    if labels.all() or not labels.any():
        raise ClassStarvedError(f"{what}: both classes are required")


def _check_schema(model, n_features: int, schema_id: int | None) -> None:
    if n_features != model.n_features:
        raise SchemaMismatchError(f"model expects {model.n_features} features, got {n_features}")
    if schema_id is not None and schema_id != model.schema_id:
        raise SchemaMismatchError(f"model schema {model.schema_id} != input schema {schema_id}")


def predict_proba(model: TreeModel | ForestModel, x: FeatureVector) -> float:
    _check_schema(model, len(x.values), x.schema_id)
    return float(model.predict_batch(np.asarray(x.values, dtype=np.float64)[None, :])[0])


def predict_proba_batch(model: TreeModel | ForestModel, X: np.ndarray, schema_id: int | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_schema(model, X.shape[1], schema_id)
    return model.predict_batch(X)


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), separators=(",", ":")) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ForestModel:
    return ForestModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
