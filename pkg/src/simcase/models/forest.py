"""Random forest of Gini decision trees over sparse TF-IDF rows."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class DecisionTree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left. ``value`` is the
    fraction of positive (bootstrap) samples reaching the node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=float)
        self.n_samples = np.asarray(self.n_samples, dtype=np.int64)
        self.impurity = np.asarray(self.impurity, dtype=float)
        internal = self.feature >= 0
        if np.any(internal & ((self.left < 0) | (self.right < 0))):
            raise ValueError("internal node without two children")
        if np.any((self.value < 0) | (self.value > 1)):
            raise ValueError("leaf fractions must lie in [0, 1]")

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaf_values(self, D: np.ndarray, col_of: np.ndarray) -> np.ndarray:
        """Evaluate on dense rows ``D`` whose column for feature ``f`` is ``col_of[f]``."""
        node = np.zeros(D.shape[0], dtype=np.int64)
        rows = np.arange(D.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = D[r, col_of[self.feature[nd]]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]

    def impurity_decrease(self, n_features: int) -> np.ndarray:
        """Per-feature sum of sample-weighted Gini decreases, relative to the root size."""
        out = np.zeros(n_features)
        root = self.n_samples[0]
        for i in np.flatnonzero(self.feature >= 0):
            l, r = self.left[i], self.right[i]
            dec = (self.n_samples[i] * self.impurity[i]
                   - self.n_samples[l] * self.impurity[l]
                   - self.n_samples[r] * self.impurity[r]) / root
            out[self.feature[i]] += dec
        return out

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_samples", "impurity")}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(**{k: np.asarray(v) for k, v in d.items()})


@dataclass
class Forest:
    trees: list[DecisionTree]
    n_features: int
    seed: int = 0
    hyper: dict = field(default_factory=dict)
    bootstrap_indices: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest needs at least one tree")

    def used_features(self) -> np.ndarray:
        return np.unique(np.concatenate([t.feature[t.feature >= 0] for t in self.trees] + [np.zeros(0, np.int64)]))

    def votes(self, X, chunk: int = 4096) -> np.ndarray:
        """Per-document fraction of trees whose leaf has a positive majority."""
        X = sp.csr_matrix(X)
        used = self.used_features()
        col_of = np.zeros(self.n_features, dtype=np.int64)
        col_of[used] = np.arange(len(used))
        out = np.zeros(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            block = X[start:start + chunk]
            D = block[:, used].toarray() if len(used) else np.zeros((block.shape[0], 1))
            total = np.zeros(block.shape[0])
            for tree in self.trees:
                total += tree.leaf_values(D, col_of) > 0.5
            out[start:start + chunk] = total / len(self.trees)
        return out

    score = votes

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "seed": self.seed, "hyper": self.hyper,
                "trees": [t.to_dict() for t in self.trees],
                "bootstrap_indices": [b.tolist() for b in self.bootstrap_indices]}

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], int(d["n_features"]), int(d.get("seed", 0)),
                   dict(d.get("hyper", {})), [np.asarray(b, dtype=np.int64) for b in d.get("bootstrap_indices", [])])


def _gini(pos: float, n: float) -> float:
    p = pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(sub: sp.csr_matrix, y: np.ndarray, rng: np.random.Generator, max_features: int, min_leaf: int):
    """Search ``max_features`` random non-constant columns of ``sub`` for the lowest weighted Gini."""
    m = sub.shape[0]
    candidates = np.unique(sub.indices)
    if len(candidates) == 0:
        return None
    candidates = candidates[rng.permutation(len(candidates))]
    subc = sub.tocsc()
    n_pos = y.sum()
    best = (math.inf, -1, 0.0)
    visited = 0
    for start in range(0, len(candidates), max_features):
        feats = candidates[start:start + max_features]
        D = subc[:, feats].toarray()
        nonconst = D.min(axis=0) < D.max(axis=0)
        keep = np.flatnonzero(nonconst)[: max_features - visited]
        visited += len(keep)
        if len(keep):
            feats, D = feats[keep], D[:, keep]
            order = np.argsort(D, axis=0, kind="stable")
            Ds = np.take_along_axis(D, order, axis=0)
            cpos = np.cumsum(y[order], axis=0)[:-1]
            nl = np.arange(1, m, dtype=float)[:, None]
            nr = m - nl
            rpos = n_pos - cpos
            pl, pr = cpos / nl, rpos / nr
            wimp = (nl * (1 - pl * pl - (1 - pl) ** 2) + nr * (1 - pr * pr - (1 - pr) ** 2)) / m
            valid = (Ds[1:] > Ds[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
            wimp = np.where(valid, wimp, math.inf)
            flat = int(np.argmin(wimp))
            i, c = divmod(flat, wimp.shape[1])
            if wimp[i, c] < best[0]:
                lo, hi = Ds[i, c], Ds[i + 1, c]
                thr = lo + (hi - lo) / 2.0
                if not lo <= thr < hi:
                    thr = lo
                best = (float(wimp[i, c]), int(feats[c]), float(thr))
        if visited >= max_features:
            break
    if best[1] < 0:
        return None
    return best[1], best[2]


def _grow_tree(X: sp.csr_matrix, y: np.ndarray, sample: np.ndarray, rng: np.random.Generator,
               max_depth: int | None, min_leaf: int, max_features: int) -> DecisionTree:
    feature, threshold, left, right, value, n_samples, impurity = [], [], [], [], [], [], []

    def new_node() -> int:
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                       (value, 0.0), (n_samples, 0), (impurity, 0.0)):
            arr.append(v)
        return len(feature) - 1

    stack = [(new_node(), sample, 0)]
    while stack:
        nid, rows, depth = stack.pop()
        m = len(rows)
        yr = y[rows]
        pos = float(yr.sum())
        g = _gini(pos, m)
        value[nid], n_samples[nid], impurity[nid] = pos / m, m, g
        if g == 0.0 or m < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        sub = X[rows]
        split = _best_split(sub, yr, rng, max_features, min_leaf)
        if split is None:
            continue
        f, thr = split
        col = sub[:, [f]].toarray().ravel()
        go_left = col <= thr
        lid, rid = new_node(), new_node()
        feature[nid], threshold[nid], left[nid], right[nid] = f, thr, lid, rid
        stack.append((rid, rows[~go_left], depth + 1))
        stack.append((lid, rows[go_left], depth + 1))
    return DecisionTree(feature, threshold, left, right, value, n_samples, impurity)


def resolve_max_features(rule, n_features: int) -> int:
    if rule in (None, "all"):
        return n_features
    if rule == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if rule == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    if isinstance(rule, float) and 0 < rule <= 1:
        return max(1, int(rule * n_features))
    return max(1, min(int(rule), n_features))


def train_random_forest(X, y, trees: int = 100, max_depth: int | None = None, min_leaf: int = 1,
                        max_features="sqrt", seed: int = 0, bootstrap: bool = True) -> Forest:
    """Grow ``trees`` Gini trees, each on a bootstrap resample drawn from ``seed``."""
    X = sp.csr_matrix(X, dtype=float)
    y = np.asarray(y).astype(float).ravel()
    if len(y) != X.shape[0]:
        raise ValueError("vectors and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("training needs both classes; got a single-class label vector")
    if trees < 1 or min_leaf < 1:
        raise ValueError("trees and min_leaf must be at least 1")
    if max_depth is not None and max_depth <= 0:
        max_depth = None
    k = resolve_max_features(max_features, X.shape[1])
    m = X.shape[0]
    rng = np.random.default_rng(seed)
    grown, samples = [], []
    for _ in range(trees):
        sample = np.sort(rng.integers(0, m, size=m)) if bootstrap else np.arange(m)
        tree_rng = np.random.default_rng(rng.integers(2**63))
        grown.append(_grow_tree(X, y, sample, tree_rng, max_depth, min_leaf, k))
        samples.append(sample)
    hyper = {"trees": trees, "max_depth": max_depth, "min_leaf": min_leaf,
             "max_features": max_features, "bootstrap": bootstrap}
    return Forest(grown, X.shape[1], seed, hyper, samples)
