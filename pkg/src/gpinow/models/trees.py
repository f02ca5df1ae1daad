"""CART regression trees, random forests and residual boosting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

from ..errors import ConfigError
from . import _kernels
from .base import Dataset, canonical_order, n_from_fraction, presort

LEAF = _kernels.LEAF


@dataclass(frozen=True)
class Tree:
    """Flat binary tree. Node 0 is the root; leaves have ``feature == -1``.

    ``coverage`` is the number of training samples reaching each node.
    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    coverage: np.ndarray

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value", "coverage"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def leaf(cls, value: float, coverage: int = 1) -> "Tree":
        return cls(np.array([LEAF]), np.array([0.0]), np.array([LEAF]), np.array([LEAF]),
                   np.array([float(value)]), np.array([coverage]))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature == LEAF)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for nd in range(self.n_nodes):
            if self.feature[nd] != LEAF:
                depths[self.left[nd]] = depths[nd] + 1
                depths[self.right[nd]] = depths[nd] + 1
        return int(depths.max())

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f != LEAF}

    def expected_value(self) -> float:
        """Coverage-weighted mean of the leaf values."""
        leaves = self.leaves()
        w = self.coverage[leaves].astype(np.float64)
        return float(w @ self.value[leaves] / w.sum())

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _kernels.predict_tree(self.feature, self.threshold, self.left, self.right,
                                     self.value, np.ascontiguousarray(X, dtype=np.float64))


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 8
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class ForestParams:
    tree: TreeParams = field(default_factory=lambda: TreeParams(max_depth=16))
    n_estimators: int = 100
    max_features: Union[int, float] = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        mf = self.max_features
        if isinstance(mf, bool):
            raise ConfigError("max_features must be a number")
        if isinstance(mf, (int, np.integer)):
            if mf < 1:
                raise ConfigError("integer max_features must be >= 1")
        elif not 0.0 < mf <= 1.0:
            raise ConfigError("fractional max_features must lie in (0, 1]")

    def resolve_max_features(self, p: int) -> int:
        mf = self.max_features
        if isinstance(mf, (int, np.integer)):
            if mf > p:
                raise ConfigError(f"max_features={mf} exceeds the {p} available features")
            return int(mf)
        return n_from_fraction(mf, p)


@dataclass(frozen=True)
class GbtParams:
    n_estimators: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    colsample_bytree: float = 1.0
    leaf_l2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        # depth 0 is accepted: every round is then a single leaf
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if not 0.0 < self.colsample_bytree <= 1.0:
            raise ConfigError("colsample_bytree must lie in (0, 1]")
        if self.leaf_l2 < 0:
            raise ConfigError("leaf_l2 must be >= 0")


@dataclass(frozen=True)
class TreeModel:
    kind: ClassVar[str] = "tree"

    tree: Tree
    feature_codes: tuple[str, ...]
    params: TreeParams

    @property
    def trees(self) -> tuple[Tree, ...]:
        return (self.tree,)

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)


@dataclass(frozen=True)
class ForestModel:
    kind: ClassVar[str] = "forest"

    trees: tuple[Tree, ...]
    feature_codes: tuple[str, ...]
    params: ForestParams

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(X)
        return total / len(self.trees)


@dataclass(frozen=True)
class GbtModel:
    kind: ClassVar[str] = "gbt"

    base_score: float
    learning_rate: float
    trees: tuple[Tree, ...]
    feature_codes: tuple[str, ...]
    params: GbtParams

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def staged_predict(self, X: np.ndarray):
        """Yield predictions after each boosting round."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out = out + self.learning_rate * t.predict(X)
            yield out


def _max_nodes(max_depth: int, n: int) -> int:
    if max_depth >= 62:
        return 2 * n - 1
    return int(min(2 ** (max_depth + 1) - 1, 2 * n - 1))


def _grow(X, y, params: TreeParams, col_mask=None, node_keys=None, n_try=None, l2=0.0) -> Tree:
    n, p = X.shape
    if col_mask is None:
        col_mask = np.ones(p, dtype=np.bool_)
    if node_keys is None:
        node_keys = np.zeros((1, 1))
    if n_try is None:
        n_try = p
    order = presort(X)
    out = _kernels.grow_tree(
        X, y, order, _kernels.sorted_values(X, order), col_mask, node_keys, int(n_try), int(params.max_depth),
        int(params.min_samples_split), int(params.min_samples_leaf), float(l2),
        _max_nodes(params.max_depth, n),
    )
    return Tree(*out[:6])


def fit_decision_tree(d: Dataset, p: TreeParams = TreeParams()) -> TreeModel:
    """Exact greedy CART on squared error with midpoint thresholds."""
    order = canonical_order(d.X, d.y)
    X = np.ascontiguousarray(d.X[order])
    y = np.ascontiguousarray(d.y[order])
    return TreeModel(_grow(X, y, p), d.codes, p)


def fit_random_forest(d: Dataset, p: ForestParams = ForestParams()) -> ForestModel:
    """Bagged CART trees with per-split column sampling.

    Tree ``t`` draws its bootstrap and column keys from a generator seeded
    with ``(seed, t)`` over canonically sorted rows, so trees are
    reproducible and independent of input row order and of build order.
    """
    order = canonical_order(d.X, d.y)
    X = np.ascontiguousarray(d.X[order])
    y = np.ascontiguousarray(d.y[order])
    n, n_feat = X.shape
    n_try = p.resolve_max_features(n_feat)
    max_nodes = _max_nodes(p.tree.max_depth, n)
    trees = []
    for t in range(p.n_estimators):
        rng = np.random.default_rng([p.seed & 0xFFFFFFFFFFFFFFFF, t])
        rows = rng.integers(0, n, size=n)
        keys = rng.random((max_nodes, n_feat)) if n_try < n_feat else None
        Xb = np.ascontiguousarray(X[rows])
        trees.append(_grow(Xb, y[rows], p.tree, node_keys=keys, n_try=n_try))
    return ForestModel(tuple(trees), d.codes, p)


def fit_gbt(d: Dataset, p: GbtParams = GbtParams()) -> GbtModel:
    """First-order boosting on squared loss.

    Starts from mean(y); each round fits a depth-limited tree to the
    residuals on ``ceil(colsample_bytree * p)`` randomly chosen columns.
    Leaf values are ``sum(residual) / (count + leaf_l2)``.
    """
    order = canonical_order(d.X, d.y)
    X = np.ascontiguousarray(d.X[order])
    y = np.ascontiguousarray(d.y[order])
    n, n_feat = X.shape
    k = n_from_fraction(p.colsample_bytree, n_feat)
    if k < n_feat:
        rng = np.random.default_rng([p.seed & 0xFFFFFFFFFFFFFFFF, 0])
        ranks = np.argsort(rng.random((p.n_estimators, n_feat)), axis=1)
        masks = np.zeros((p.n_estimators, n_feat), dtype=np.bool_)
        np.put_along_axis(masks, ranks[:, :k], True, axis=1)
    else:
        masks = np.ones((p.n_estimators, n_feat), dtype=np.bool_)
    max_nodes = _max_nodes(p.max_depth, n)
    base, feats, thrs, lefts, rights, vals, covs, sizes = _kernels.boost(
        X, y, presort(X), masks, int(p.max_depth), 2, 1, float(p.leaf_l2),
        float(p.learning_rate), max_nodes,
    )
    trees = tuple(
        Tree(feats[t, :s].copy(), thrs[t, :s].copy(), lefts[t, :s].copy(),
             rights[t, :s].copy(), vals[t, :s].copy(), covs[t, :s].copy())
        for t, s in enumerate(sizes)
    )
    return GbtModel(float(base), float(p.learning_rate), trees, d.codes, p)
