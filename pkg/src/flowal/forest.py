"""Random-forest base learner with hard-vote class probabilities.

Trees are CART grown on Gini impurity with bootstrap sampling and per-split
random feature subsets.  Class probabilities are the fraction of trees voting
for each class, which is the quantity the uncertainty strategies consume.
Tree t's randomness derives from (seed, t), so a fitted model is a pure
function of (data, params, seed) regardless of fitting order.

Determinism rules baked in here:
  * split search scans candidate features in ascending index order and keeps
    a strictly better Gini only, so ties go to the lowest feature index;
  * within a feature, ties go to the lowest threshold;
  * leaf labels and argmax predictions break ties toward the lowest class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset, FeatureSchema
from .errors import (
    DimensionMismatch,
    EmptyTestSet,
    EmptyTrainingSet,
    InvalidCommitteeSize,
    InvalidDistribution,
    SchemaMismatch,
)
from .rng import derive_seed, make_rng


class ProbabilityDistribution:
    """Validated per-class posterior: entries in [0, 1] summing to 1 (1e-9)."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise InvalidDistribution("probabilities must be a non-empty vector")
        if not np.isfinite(p).all():
            raise InvalidDistribution("non-finite probability entries")
        if (p < 0).any() or (p > 1).any():
            raise InvalidDistribution("entries outside [0, 1]")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise InvalidDistribution(f"probabilities sum to {p.sum()!r}, not 1")
        p = p.copy()
        p.flags.writeable = False
        self.probs = p

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"ProbabilityDistribution({self.probs.tolist()})"


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters (standard Breiman defaults).

    ``features_per_split`` is either the string "sqrt" (floor of the square
    root of the feature count) or an explicit positive integer.
    """

    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    features_per_split: Union[str, int] = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise ValueError("features_per_split must be 'sqrt' or an int")
        elif self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_features_per_split(self, n_features: int) -> int:
        if self.features_per_split == "sqrt":
            k = int(math.floor(math.sqrt(n_features)))
        else:
            k = int(self.features_per_split)
        return max(1, min(k, n_features))


class _Tree:
    """Flat-array decision tree; ``value`` holds leaf payloads.

    feature[i] >= 0 marks an internal node; leaves have feature[i] == -1.
    Routing sends x left when x[feature] <= threshold.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "depth")

    def __init__(self, feature, threshold, left, right, value, depth):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value)
        self.depth = np.asarray(depth, dtype=np.int64)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            active = np.nonzero(f >= 0)[0]
            if active.size == 0:
                return node
            cur = node[active]
            xv = X[active, f[active]]
            node[active] = np.where(xv <= self.threshold[cur],
                                    self.left[cur], self.right[cur])


def _best_gini_split(X, y_onehot, idx, feats):
    """Lowest weighted-Gini (feature, threshold) over candidate features.

    ``feats`` must be in ascending order; strictly-better comparisons keep
    the lowest feature index, argmin keeps the lowest threshold.
    Returns None when every candidate feature is constant on the node.
    """
    n = idx.size
    sub = y_onehot[idx]
    best_score = np.inf
    best = None
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        cum = np.cumsum(sub[order], axis=0)
        cut = np.nonzero(vs[1:] > vs[:-1])[0] + 1  # left side takes first cut rows
        nl = cut.astype(np.float64)
        nr = n - nl
        left = cum[cut - 1]
        right = cum[-1] - left
        gini_l = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
        weighted = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(weighted))
        if weighted[j] < best_score:
            best_score = float(weighted[j])
            best = (int(f), _midpoint(vs[cut[j] - 1], vs[cut[j]]))
    return best


def _midpoint(lo: float, hi: float) -> float:
    # the float midpoint of two adjacent values can round up to hi, which
    # would route every sample left of nothing; fall back to lo
    mid = 0.5 * (lo + hi)
    return float(lo) if mid >= hi else float(mid)


def _best_variance_split(X, t, idx, feats):
    """Lowest total-SSE (feature, threshold) for regression trees."""
    n = idx.size
    sub = t[idx]
    best_score = np.inf
    best = None
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        ts = sub[order]
        s1 = np.cumsum(ts)
        s2 = np.cumsum(ts * ts)
        cut = np.nonzero(vs[1:] > vs[:-1])[0] + 1
        nl = cut.astype(np.float64)
        nr = n - nl
        sum_l = s1[cut - 1]
        sse_l = s2[cut - 1] - sum_l * sum_l / nl
        sum_r = s1[-1] - sum_l
        sse_r = (s2[-1] - s2[cut - 1]) - sum_r * sum_r / nr
        weighted = sse_l + sse_r
        j = int(np.argmin(weighted))
        if weighted[j] < best_score:
            best_score = float(weighted[j])
            best = (int(f), _midpoint(vs[cut[j] - 1], vs[cut[j]]))
    return best


def _grow_tree(X, y, params: ForestParams, rng: np.random.Generator,
               n_classes: int = 0, regression: bool = False) -> _Tree:
    """Grow one CART tree; nodes are created depth-first, left before right.

    The depth-first order fixes the sequence of rng draws (bootstrap first,
    then one feature subset per split), making the tree a pure function of
    (data, params, rng seed).
    """
    n, d = X.shape
    k = params.resolve_features_per_split(d)
    if params.bootstrap:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)
    Xs = X[sample]
    ys = y[sample]
    if regression:
        onehot = None
        targets = ys.astype(np.float64)
    else:
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        targets = None

    feature, threshold, left, right, value, depth_arr = [], [], [], [], [], []

    def leaf_value(idx):
        if regression:
            return float(targets[idx].mean())
        counts = onehot[idx].sum(axis=0)
        return int(np.argmax(counts))  # first max = lowest class index

    # stack entries: (row indices, depth, parent node id, is_right_child)
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node_id
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        depth_arr.append(depth)

        pure = (
            (ys[idx] == ys[idx[0]]).all()
            if not regression
            else (targets[idx] == targets[idx[0]]).all()
        )
        can_split = (
            idx.size >= params.min_samples_split
            and not pure
            and (params.max_depth is None or depth < params.max_depth)
        )
        split = None
        if can_split:
            feats = np.sort(rng.choice(d, size=k, replace=False))
            split = (_best_variance_split(Xs, targets, idx, feats) if regression
                     else _best_gini_split(Xs, onehot, idx, feats))
        if split is None:
            value.append(leaf_value(idx))
            continue
        f, thr = split
        feature[node_id] = f
        threshold[node_id] = thr
        value.append(0.0 if regression else -1)
        mask = Xs[idx, f] <= thr
        # push right first so the left child is created (and draws rng) first
        stack.append((idx[~mask], depth + 1, node_id, True))
        stack.append((idx[mask], depth + 1, node_id, False))

    return _Tree(feature, threshold, left, right, value, depth_arr)


class ForestModel:
    """Fitted random-forest classifier; immutable after construction."""

    def __init__(self, schema: FeatureSchema, params: ForestParams, seed: int,
                 trees: Sequence[_Tree], train_class_counts: np.ndarray):
        self.schema = schema
        self.params = params
        self.seed = seed
        self.trees = tuple(trees)
        self.train_class_counts = train_class_counts

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.schema.n_features:
            raise DimensionMismatch(
                f"expected {self.schema.n_features} features, got shape {X.shape}"
            )
        return X

    def vote_counts(self, X) -> np.ndarray:
        """(m, n_classes) integer matrix of per-class tree votes."""
        X = self._check_matrix(X)
        m = X.shape[0]
        counts = np.zeros((m, self.schema.n_classes), dtype=np.int64)
        rows = np.arange(m)
        for tree in self.trees:
            leaves = tree.apply(X)
            counts[rows, tree.value[leaves].astype(np.int64)] += 1
        return counts

    def predict_proba_many(self, X) -> np.ndarray:
        return self.vote_counts(X) / self.n_trees

    def predict_proba(self, features) -> ProbabilityDistribution:
        """Vote-fraction distribution for a single feature vector."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 1:
            raise DimensionMismatch("predict_proba takes a single feature vector")
        return ProbabilityDistribution(self.predict_proba_many(features[None, :])[0])

    def predict_many(self, X) -> np.ndarray:
        return np.argmax(self.vote_counts(X), axis=1)

    def predict(self, features) -> int:
        """Majority-vote class; ties break toward the lowest class index."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 1:
            raise DimensionMismatch("predict takes a single feature vector")
        return int(self.predict_many(features[None, :])[0])

    def mean_leaf_depth(self, X) -> np.ndarray:
        """Per-row mean depth of the leaves reached across the forest."""
        X = self._check_matrix(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.depth[tree.apply(X)]
        return total / self.n_trees


def fit_forest(labeled: Dataset, params: ForestParams, seed: int) -> ForestModel:
    """Fit ``params.n_trees`` CART trees; tree t is seeded by (seed, t)."""
    if len(labeled) == 0:
        raise EmptyTrainingSet("cannot fit a forest on zero records")
    X = labeled.features
    y = labeled.labels
    trees = [
        _grow_tree(X, y, params, make_rng(seed, 0, t),
                   n_classes=labeled.schema.n_classes)
        for t in range(params.n_trees)
    ]
    return ForestModel(labeled.schema, params, seed, trees, labeled.class_counts())


class Committee:
    """Bag of independently trained forests used for query-by-committee."""

    def __init__(self, members: Sequence[ForestModel]):
        if len(members) < 2:
            raise InvalidCommitteeSize("a committee needs at least 2 members")
        if len({m.schema for m in members}) != 1:
            raise SchemaMismatch("committee members disagree on schema")
        seeds = [m.seed for m in members]
        if len(set(seeds)) != len(seeds):
            raise InvalidCommitteeSize("member seeds must be pairwise distinct")
        self.members = tuple(members)
        self.schema = members[0].schema

    def __len__(self) -> int:
        return len(self.members)

    def member_votes(self, X) -> np.ndarray:
        """(C, m) matrix of each member's predicted class per row."""
        return np.stack([m.predict_many(X) for m in self.members])

    def member_probas(self, X) -> np.ndarray:
        """(C, m, n_classes) stack of member vote-fraction distributions."""
        return np.stack([m.predict_proba_many(X) for m in self.members])

    def predict_proba_many(self, X) -> np.ndarray:
        """Consensus distribution: element-wise mean over members."""
        return self.member_probas(X).mean(axis=0)

    def predict_many(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba_many(X), axis=1)


def fit_committee(labeled: Dataset, size: int, params: ForestParams,
                  seed: int) -> Committee:
    """Fit ``size`` forests on independent bootstrap resamples of ``labeled``.

    Member m's resample and model seed both derive from (seed, m).
    """
    if size < 2:
        raise InvalidCommitteeSize(f"committee size must be >= 2, got {size}")
    if len(labeled) == 0:
        raise EmptyTrainingSet("cannot fit a committee on zero records")
    n = len(labeled)
    members = []
    for m in range(size):
        resample = make_rng(seed, 1, m).integers(0, n, size=n)
        member_seed = derive_seed(seed, 2, m)
        members.append(fit_forest(labeled.subset(resample), params, member_seed))
    return Committee(members)


def evaluate_accuracy(model, test: Dataset) -> float:
    """Fraction of test records whose prediction equals the true label.

    Accepts a ForestModel or a Committee (consensus vote).
    """
    if len(test) == 0:
        raise EmptyTestSet("cannot evaluate on an empty test set")
    if test.schema.n_features != model.schema.n_features:
        raise SchemaMismatch("test schema does not match the model's")
    predictions = model.predict_many(test.features)
    return float(np.mean(predictions == test.labels))


class RegressionForestModel:
    """Random-forest regressor (mean-leaf CART on variance splits)."""

    def __init__(self, n_features: int, params: ForestParams, seed: int,
                 trees: Sequence[_Tree]):
        self.n_features = n_features
        self.params = params
        self.seed = seed
        self.trees = tuple(trees)

    def predict_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got shape {X.shape}"
            )
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.value[tree.apply(X)]
        return total / len(self.trees)

    def predict(self, features) -> float:
        return float(self.predict_many(np.asarray(features, float)[None, :])[0])


def fit_regression_forest(X, targets, params: ForestParams,
                          seed: int) -> RegressionForestModel:
    """Fit a regression forest on raw arrays; used by the LAL meta-strategy."""
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTrainingSet("regression forest needs a non-empty matrix")
    if t.shape != (X.shape[0],):
        raise DimensionMismatch("one target per row required")
    trees = [
        _grow_tree(X, t, params, make_rng(seed, 3, i), regression=True)
        for i in range(params.n_trees)
    ]
    return RegressionForestModel(X.shape[1], params, seed, trees)
