"""Random forest of CART trees with Gini impurity.

Scores are the mean, over trees, of the class-1 fraction in the leaf a
row reaches. Split search is exhaustive over midpoints of consecutive
distinct values; among equally good splits the lowest feature index and
then the smallest threshold win, so a fixed seed gives identical trees.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .seeds import derive_seed

FORMAT = "linkanom-forest"
VERSION = 1


class TrainingError(ValueError):
    """Training data cannot produce a classifier."""


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: int | str = "sqrt"
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 0

    def resolve_max_features(self, n_features: int) -> int:
        mf = self.max_features
        if mf == "sqrt":
            k = int(math.floor(math.sqrt(n_features)))
        elif mf is None or mf == "all":
            k = n_features
        else:
            k = int(mf)
        if not 1 <= k <= n_features:
            raise ValueError(f"max_features={mf!r} gives {k}, outside 1..{n_features}")
        return max(k, 1)


@njit(cache=True, nogil=True)
def _split_quality(pos_l, n_l, pos_r, n_r):
    # n * (parent gini) - (n_l * gini_l + n_r * gini_r) up to a constant:
    # maximising this maximises the Gini gain.
    neg_l = n_l - pos_l
    neg_r = n_r - pos_r
    return (pos_l * pos_l + neg_l * neg_l) / n_l + (pos_r * pos_r + neg_r * neg_r) / n_r


@njit(cache=True, nogil=True)
def _grow(X, y, rows, max_features, max_depth, min_split, min_leaf, seed):
    np.random.seed(seed)
    n_rows = rows.shape[0]
    n_feat = X.shape[1]
    cap = 2 * n_rows + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    n_node = np.zeros(cap, dtype=np.int64)

    idx = rows.copy()
    buf = np.empty(n_rows, dtype=np.int64)
    vals = np.empty(n_rows, dtype=np.float64)
    ys = np.empty(n_rows, dtype=np.int64)
    order_feats = np.arange(n_feat)
    chosen = np.empty(n_feat, dtype=np.int64)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n_rows
    stack_depth[0] = 0
    top = 1
    count = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        n = hi - lo
        pos = 0
        for k in range(lo, hi):
            pos += y[idx[k]]
        value[node] = pos / n
        n_node[node] = n
        if pos == 0 or pos == n or n < min_split or n < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        # draw features until max_features non-constant ones are found
        for k in range(n_feat):
            order_feats[k] = k
        n_chosen = 0
        for k in range(n_feat):
            if n_chosen >= max_features:
                break
            r = k + np.random.randint(n_feat - k)
            f = order_feats[r]
            order_feats[r] = order_feats[k]
            order_feats[k] = f
            first = X[idx[lo], f]
            constant = True
            for q in range(lo + 1, hi):
                if X[idx[q], f] != first:
                    constant = False
                    break
            if not constant:
                chosen[n_chosen] = f
                n_chosen += 1
        if n_chosen == 0:
            continue
        chosen[:n_chosen].sort()

        best_f = -1
        best_thr = 0.0
        best_q = -1.0
        for c in range(n_chosen):
            f = chosen[c]
            for k in range(n):
                vals[k] = X[idx[lo + k], f]
            order = np.argsort(vals[:n], kind="mergesort")
            for k in range(n):
                ys[k] = y[idx[lo + order[k]]]
            pos_l = 0
            for k in range(n - 1):
                pos_l += ys[k]
                a = vals[order[k]]
                b = vals[order[k + 1]]
                if a == b:
                    continue
                n_l = k + 1
                n_r = n - n_l
                if n_l < min_leaf or n_r < min_leaf:
                    continue
                q = _split_quality(pos_l, n_l, pos - pos_l, n_r)
                if q > best_q:
                    best_q = q
                    best_f = f
                    thr = a + (b - a) / 2.0
                    if thr >= b or thr <= a:
                        thr = a
                    best_thr = thr
        if best_f < 0:
            continue

        # stable partition of idx[lo:hi]
        n_l = 0
        n_r = 0
        for k in range(lo, hi):
            r = idx[k]
            if X[r, best_f] <= best_thr:
                idx[lo + n_l] = r
                n_l += 1
            else:
                buf[n_r] = r
                n_r += 1
        for k in range(n_r):
            idx[lo + n_l + k] = buf[k]

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = count
        right[node] = count + 1
        stack_node[top] = count + 1
        stack_lo[top] = lo + n_l
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = count
        stack_lo[top] = lo
        stack_hi[top] = lo + n_l
        stack_depth[top] = depth + 1
        top += 1
        count += 2

    return (feature[:count].copy(), threshold[:count].copy(), left[:count].copy(),
            right[:count].copy(), value[:count].copy(), n_node[:count].copy())


@njit(cache=True, nogil=True)
def _predict(X, feature, threshold, left, right, value, offsets):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n, dtype=np.float64)
    for i in range(n):
        total = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            total += value[base + node]
        out[i] = total / n_trees
    return out


@dataclass
class Tree:
    """Flat binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"value": float(self.value[node]), "samples": int(self.n_samples[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "samples": int(self.n_samples[node]),
            "value": float(self.value[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        feature, threshold, left, right, value, samples = [], [], [], [], [], []

        def add(d: dict) -> int:
            k = len(feature)
            feature.append(d.get("feature", -1))
            threshold.append(d.get("threshold", 0.0))
            value.append(d["value"])
            samples.append(d.get("samples", 0))
            left.append(-1)
            right.append(-1)
            if "left" in d:
                left[k] = add(d["left"])
                right[k] = add(d["right"])
            return k

        add(doc)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
            np.array(samples, dtype=np.int64),
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        offsets = np.array([0, len(self.feature)], dtype=np.int64)
        return _predict(X, self.feature, self.threshold, self.left, self.right, self.value, offsets)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray | None = None,
    max_features: int | None = None,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    seed: int = 0,
) -> Tree:
    """Grow one CART tree on ``X[rows]`` (rows may repeat)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if rows is None:
        rows = np.arange(len(y), dtype=np.int64)
    mf = X.shape[1] if max_features is None else max_features
    parts = _grow(
        X, y, np.asarray(rows, dtype=np.int64), mf,
        -1 if max_depth is None else max_depth,
        min_samples_split, min_samples_leaf, seed % (2**32),
    )
    return Tree(*parts)


@dataclass
class ForestModel:
    trees: list[Tree]
    feature_names: list[str]
    params: ForestParams

    def __post_init__(self):
        self._flat = None

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _flatten(self):
        if self._flat is None:
            sizes = [len(t.feature) for t in self.trees]
            offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            self._flat = (
                np.concatenate([t.feature for t in self.trees]),
                np.concatenate([t.threshold for t in self.trees]),
                np.concatenate([t.left for t in self.trees]),
                np.concatenate([t.right for t in self.trees]),
                np.concatenate([t.value for t in self.trees]),
                offsets,
            )
        return self._flat

    def score_many(self, X: np.ndarray) -> np.ndarray:
        """Anomaly score in [0, 1] for every row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected rows of width {self.n_features}, got shape {X.shape}")
        return _predict(X, *self._flatten())

    def score(self, row: Sequence[float]) -> float:
        return float(self.score_many(np.asarray(row, dtype=np.float64)[None, :])[0])

    def to_json(self) -> str:
        doc = {
            "format": FORMAT,
            "version": VERSION,
            "feature_names": list(self.feature_names),
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        doc = json.loads(text)
        if doc.get("format") != FORMAT or doc.get("version") != VERSION:
            raise ValueError(f"not a {FORMAT} v{VERSION} document")
        return cls([Tree.from_dict(t) for t in doc["trees"]], doc["feature_names"], ForestParams(**doc["params"]))


def train(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams = ForestParams(),
    feature_names: Sequence[str] | None = None,
    threads: int = 1,
) -> ForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise TrainingError(f"empty training matrix, shape {X.shape}")
    if len(y) != X.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows but {len(y)} labels")
    if not np.all((y == 0) | (y == 1)):
        raise TrainingError("labels must be 0 or 1")
    if y.min() == y.max():
        raise TrainingError("training labels contain a single class")
    if params.n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    n, f = X.shape
    mf = params.resolve_max_features(f)
    y = y.astype(np.int64)

    def one(k: int) -> Tree:
        tree_seed = derive_seed(params.seed, "tree", k)
        if params.bootstrap:
            rows = np.random.default_rng(derive_seed(tree_seed, "bootstrap")).integers(0, n, size=n)
        else:
            rows = np.arange(n)
        return grow_tree(
            X, y, rows, mf, params.max_depth, params.min_samples_split,
            params.min_samples_leaf, derive_seed(tree_seed, "features"),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(one, range(params.n_trees)))
    else:
        trees = [one(k) for k in range(params.n_trees)]
    names = list(feature_names) if feature_names is not None else [f"f{k}" for k in range(f)]
    return ForestModel(trees, names, params)
