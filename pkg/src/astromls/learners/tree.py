"""CART classification trees (Gini, unbounded depth) and bagged forests of them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._util import frozen, make_rng
from ..dataset import LabeledDataset
from ..errors import ParameterError
from .base import Model, register, training_arrays

# gains closer than this count as tied (the lower feature/threshold wins),
# and a split must improve impurity by more than this to be taken
GAIN_TOL = 1e-12

LEAF = -1


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def best_split(x: np.ndarray, y: np.ndarray, c: int, features: np.ndarray | None = None):
    """Exhaustive search for the Gini-optimal axis-aligned split.

    Returns ``(feature, threshold, gain)`` or ``None`` when no split has gain
    above ``GAIN_TOL``.  Candidate thresholds are midpoints of consecutive
    distinct values; rows with ``x[:, feature] <= threshold`` go left.
    """
    m = x.shape[0]
    if m < 2:
        return None
    if features is None:
        features = np.arange(x.shape[1])
    cols = x[:, features]
    varying = cols.max(axis=0) > cols.min(axis=0)
    if not varying.any():
        return None
    features = features[varying]
    cols = cols[:, varying]

    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    onehot = np.eye(c)[y]                                 # (m, c)
    left = np.cumsum(onehot[order], axis=0)[:-1]          # (m-1, f, c)
    total = onehot.sum(axis=0)
    right = total - left
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    # Gini gain = (sum cL^2/nL + sum cR^2/nR - sum c^2/m) / m
    purity = (left ** 2).sum(axis=2) / n_left + (right ** 2).sum(axis=2) / n_right
    gain = (purity - float(total @ total) / m) / m
    valid = xs[:-1] < xs[1:]
    gain = np.where(valid, gain, -np.inf)

    best = gain.max()
    if not best > GAIN_TOL:
        return None
    # (f, m-1) in C order: lowest feature first, then lowest threshold
    flat = np.flatnonzero((gain >= best - GAIN_TOL).T.ravel())[0]
    fi, pos = divmod(int(flat), m - 1)
    lo, hi = xs[pos, fi], xs[pos + 1, fi]
    threshold = (lo + hi) / 2.0
    if threshold >= hi:
        threshold = lo
    return int(features[fi]), float(threshold), float(gain[pos, fi])


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = x[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return node

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            frozen(d["feature"], np.int64),
            frozen(d["threshold"], float),
            frozen(d["left"], np.int64),
            frozen(d["right"], np.int64),
            frozen(d["counts"], np.int64).reshape(len(d["feature"]), -1),
            frozen(d["gain"], float),
        )


def grow_tree(
    x: np.ndarray,
    y: np.ndarray,
    c: int,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a tree until every leaf is pure or no split has positive gain.

    With ``max_features`` set, each split first looks at a random subset of
    that many features and falls back to all features if the subset offers
    no positive-gain split.
    """
    d = x.shape[1]
    feature, threshold, left, right, counts, gains = [], [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.bincount(y[rows], minlength=c))
        gains.append(0.0)
        return len(feature) - 1

    stack = [(new_node(np.arange(y.size)), np.arange(y.size))]
    while stack:
        node, rows = stack.pop()
        if np.count_nonzero(counts[node]) <= 1:
            continue
        xr, yr = x[rows], y[rows]
        split = None
        if max_features is not None and max_features < d:
            subset = np.sort(rng.choice(d, size=max_features, replace=False))
            split = best_split(xr, yr, c, subset)
        if split is None:
            split = best_split(xr, yr, c)
        if split is None:
            continue
        f, thr, gain = split
        mask = xr[:, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        lnode, rnode = new_node(lrows), new_node(rrows)
        feature[node], threshold[node], gains[node] = f, thr, gain
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is numbered first
        stack.append((rnode, rrows))
        stack.append((lnode, lrows))

    return Tree(
        frozen(feature, np.int64),
        frozen(threshold, float),
        frozen(left, np.int64),
        frozen(right, np.int64),
        frozen(np.array(counts, dtype=np.int64).reshape(len(feature), c)),
        frozen(gains, float),
    )


@register
@dataclass(frozen=True, kw_only=True)
class DecisionTreeModel(Model):
    variant = "dt"

    tree: Tree

    def predict_scores(self, x) -> np.ndarray:
        values = self._check_x(x)
        hist = self.tree.counts[self.tree.apply(values)].astype(float)
        return hist / hist.sum(axis=1, keepdims=True) if hist.shape[0] else hist

    def _payload(self) -> dict:
        return {"tree": self.tree.to_dict()}

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "DecisionTreeModel":
        return cls(tree=Tree.from_dict(d["tree"]), **common)


def fit_decision_tree(data: LabeledDataset, seed: int = 0) -> DecisionTreeModel:
    """Unpruned CART tree with the Gini criterion and no depth limit."""
    x, y = training_arrays(data)
    tree = grow_tree(x, y, data.n_classes)
    return DecisionTreeModel(
        class_count=data.n_classes,
        feature_count=x.shape[1],
        params={"criterion": "gini", "max_depth": None},
        seed=seed,
        tree=tree,
    )


@register
@dataclass(frozen=True, kw_only=True)
class RandomForestModel(Model):
    variant = "rf"

    trees: tuple[DecisionTreeModel, ...]

    def tree_votes(self, x) -> np.ndarray:
        values = self._check_x(x)
        votes = np.zeros((values.shape[0], self.class_count))
        rows = np.arange(values.shape[0])
        for t in self.trees:
            votes[rows, t.predict(values)] += 1
        return votes

    def predict_scores(self, x) -> np.ndarray:
        return self.tree_votes(x) / len(self.trees)

    def _payload(self) -> dict:
        return {"trees": [t.tree.to_dict() for t in self.trees]}

    @classmethod
    def _from_payload(cls, d: dict, common: dict) -> "RandomForestModel":
        trees = tuple(
            DecisionTreeModel(
                class_count=common["class_count"],
                feature_count=common["feature_count"],
                params={"criterion": "gini", "max_depth": None},
                seed=common["seed"],
                tree=Tree.from_dict(t),
            )
            for t in d["trees"]
        )
        return cls(trees=trees, **common)


def fit_random_forest(
    data: LabeledDataset,
    trees: int = 10,
    bootstrap: bool = True,
    max_features: str | int | None = None,
    seed: int = 0,
) -> RandomForestModel:
    """Bagged ensemble of CART trees voting by majority.

    Each of the ``trees`` trees is grown on ``n`` rows drawn with replacement
    from a generator seeded by ``seed`` (or on all rows if ``bootstrap`` is
    off).  ``max_features="sqrt"`` (or an int) turns on per-split feature
    sampling; it is off by default.
    """
    if trees < 1:
        raise ParameterError(f"tree count must be >= 1, got {trees}")
    x, y = training_arrays(data)
    n, d = x.shape
    if max_features == "sqrt":
        k_features = max(1, int(math.isqrt(d)))
    elif max_features is None:
        k_features = None
    else:
        k_features = int(max_features)
        if not 1 <= k_features <= d:
            raise ParameterError(f"max_features must lie in [1, {d}], got {k_features}")
    rng = make_rng(seed)
    members = []
    for b in range(trees):
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        split_rng = make_rng(seed, b + 1) if k_features is not None else None
        tree = grow_tree(x[rows], y[rows], data.n_classes, k_features, split_rng)
        members.append(
            DecisionTreeModel(
                class_count=data.n_classes,
                feature_count=d,
                params={"criterion": "gini", "max_depth": None},
                seed=seed,
                tree=tree,
            )
        )
    return RandomForestModel(
        class_count=data.n_classes,
        feature_count=d,
        params={"trees": trees, "bootstrap": bootstrap, "max_features": max_features},
        seed=seed,
        trees=tuple(members),
    )
