"""Isolation Forest with array-backed trees.

Trees follow Liu, Ting and Zhou (2008): random feature, uniform split inside
the node's range, height limited to ``ceil(log2(psi))``. Scoring traverses
all trees at once so a single point costs a handful of numpy calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class IForestConfig:
    n_estimators: int = 100
    max_samples: int = 256
    max_features: int = 2
    contamination: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError(f"n_estimators must be positive, got {self.n_estimators}")
        if self.max_samples < 2:
            raise ValueError(f"max_samples must be >= 2, got {self.max_samples}")
        if self.max_features < 1:
            raise ValueError(f"max_features must be positive, got {self.max_features}")
        if not 0 < self.contamination <= 0.5:
            raise ValueError(f"contamination must be in (0, 0.5], got {self.contamination}")


def harmonic(i: float) -> float:
    return math.log(i) + EULER_GAMMA


def c_factor(n: float) -> float:
    """Average unsuccessful-search path length in a BST of ``n`` nodes."""
    if n > 2:
        return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n
    if n == 2:
        return 1.0
    return 0.0


@dataclass
class IsolationTree:
    # Per node: split feature (-1 for leaves), split value, children, sample size.
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0


def _build_tree(sample: np.ndarray, features: np.ndarray, height_limit: int,
                rng: np.random.Generator) -> IsolationTree:
    feat, thr, left, right, size, depth = [], [], [], [], [], []

    def new_node(n: int, d: int) -> int:
        for lst, v in ((feat, -1), (thr, 0.0), (left, -1), (right, -1), (size, n), (depth, d)):
            lst.append(v)
        return len(feat) - 1

    stack = [(new_node(len(sample), 0), np.arange(len(sample)))]
    while stack:
        node, idx = stack.pop()
        d = depth[node]
        if d >= height_limit or idx.size <= 1:
            continue
        pts = sample[idx][:, features]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if usable.size == 0:
            continue
        j = usable[rng.integers(usable.size)]
        split = rng.uniform(lo[j], hi[j])
        while split <= lo[j]:
            split = rng.uniform(lo[j], hi[j])
        go_left = pts[:, j] < split
        feat[node] = int(features[j])
        thr[node] = float(split)
        l_node = new_node(int(go_left.sum()), d + 1)
        r_node = new_node(int((~go_left).sum()), d + 1)
        left[node], right[node] = l_node, r_node
        stack.append((r_node, idx[~go_left]))
        stack.append((l_node, idx[go_left]))

    return IsolationTree(
        feature=np.array(feat, dtype=np.int64),
        threshold=np.array(thr, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        size=np.array(size, dtype=np.int64),
        depth=np.array(depth, dtype=np.int64),
    )


class IForest:
    """Fitted ensemble of isolation trees."""

    def __init__(self, config: IForestConfig, trees: list[IsolationTree], psi: int, n_features: int):
        self.config = config
        self.trees = trees
        self.psi = psi
        self.n_features = n_features
        self.height_limit = math.ceil(math.log2(psi)) if psi > 1 else 0
        self._pack()

    def _pack(self) -> None:
        width = max(t.n_nodes for t in self.trees)
        k = len(self.trees)
        self._feature = np.full((k, width), -1, dtype=np.int64)
        self._threshold = np.zeros((k, width))
        self._left = np.zeros((k, width), dtype=np.int64)
        self._right = np.zeros((k, width), dtype=np.int64)
        # Leaf contribution: depth + c(size); internal nodes are never read.
        self._leaf_value = np.zeros((k, width))
        for i, t in enumerate(self.trees):
            n = t.n_nodes
            self._feature[i, :n] = t.feature
            self._threshold[i, :n] = t.threshold
            self._left[i, :n] = t.left
            self._right[i, :n] = t.right
            self._leaf_value[i, :n] = t.depth + np.array([c_factor(s) for s in t.size])

    def path_lengths(self, xs) -> np.ndarray:
        """Adjusted path length of every point in every tree, shape (trees, n)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if xs.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {xs.shape[1]}")
        k, n = len(self.trees), xs.shape[0]
        rows = np.arange(k)[:, None]
        node = np.zeros((k, n), dtype=np.int64)
        for _ in range(self.height_limit):
            f = self._feature[rows, node]
            internal = f >= 0
            if not internal.any():
                break
            vals = xs[np.arange(n)[None, :], np.where(internal, f, 0)]
            go_left = vals < self._threshold[rows, node]
            nxt = np.where(go_left, self._left[rows, node], self._right[rows, node])
            node = np.where(internal, nxt, node)
        return self._leaf_value[rows, node]

    def score(self, xs) -> np.ndarray:
        return anomaly_score(self, xs)


def fit_iforest(config: IForestConfig, window) -> IForest:
    """Fit ``config.n_estimators`` trees on subsamples of ``window``."""
    data = np.asarray(window, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("fit_iforest needs at least 2 instances in a (n, d) array")
    n, d = data.shape
    rng = np.random.default_rng(config.seed)
    psi = min(config.max_samples, n)
    height_limit = math.ceil(math.log2(psi))
    n_feat = min(config.max_features, d)
    trees = []
    for _ in range(config.n_estimators):
        idx = rng.choice(n, size=psi, replace=False)
        features = np.sort(rng.choice(d, size=n_feat, replace=False))
        trees.append(_build_tree(data[idx], features, height_limit, rng))
    return IForest(config, trees, psi, d)


def anomaly_score(forest: IForest, xs) -> np.ndarray | float:
    """``2 ** (-E[h(x)] / c(psi))`` for one point or a batch."""
    single = np.ndim(xs) == 1
    mean_path = forest.path_lengths(xs).mean(axis=0)
    scores = np.power(2.0, -mean_path / c_factor(forest.psi))
    return float(scores[0]) if single else scores


def iforest_threshold(forest: IForest, window, contamination: float | None = None) -> float:
    """Nearest-rank ``1 - contamination`` quantile of the window's scores."""
    contamination = forest.config.contamination if contamination is None else contamination
    scores = np.sort(np.atleast_1d(anomaly_score(forest, np.atleast_2d(window))))
    if scores.size == 0:
        raise ValueError("window must be non-empty")
    rank = max(1, math.ceil(round((1.0 - contamination) * scores.size, 9)))
    return float(scores[rank - 1])
