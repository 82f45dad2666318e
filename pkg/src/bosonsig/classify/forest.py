"""Random forest of unpruned Gini trees and its mean-decrease-in-impurity ranking."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import InvalidArgument
from ..seeding import derive_rng, derive_seed
from .clouds import Cloud, stack


@dataclass
class DecisionTree:
    """Flat preorder tree; leaves have ``feature == -1`` and no children."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray  # per-node class counts

    @classmethod
    def grow(cls, X, y, sample, n_classes: int, max_features: int, seed: int) -> "DecisionTree":
        return cls(*_kernels.grow_tree(X, y, sample, n_classes, max_features, seed))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while len(rows):
            feat = self.feature[node[rows]]
            inner = feat >= 0
            rows, feat = rows[inner], feat[inner]
            if not len(rows):
                break
            cur = node[rows]
            go_left = X[rows, feat] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict_codes(self, X: np.ndarray) -> np.ndarray:
        # argmax picks the lower class index on a tied leaf
        return np.argmax(self.value[self.apply(X)], axis=1)

    def impurity_decrease(self, n_features: int) -> np.ndarray:
        """Sample-weighted Gini decrease summed per feature."""
        out = np.zeros(n_features)
        n = self.n_samples.astype(np.float64)
        gini = 1.0 - ((self.value / np.maximum(n, 1.0)[:, None]) ** 2).sum(axis=1)
        for node in np.flatnonzero(self.feature >= 0):
            l, r = self.left[node], self.right[node]
            drop = n[node] * gini[node] - n[l] * gini[l] - n[r] * gini[r]
            out[self.feature[node]] += drop / n[0]
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n_samples": self.n_samples.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        n_cls = len(d["value"][0]) if d["value"] else 0
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["n_samples"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.int64).reshape(-1, n_cls),
        )


@dataclass
class RandomForest:
    """Bagged Gini trees with ``max_features`` candidates per split.

    Tree ``t`` bags ``round(bag_fraction * N)`` rows drawn with replacement
    from ``(seed, "tree", t)`` and shuffles features from
    ``(seed, "split", t)``. Votes are one per tree; ties go to the lower class.
    """

    features: tuple[str, ...]
    labels: tuple[str, ...]
    trees: list[DecisionTree]
    max_features: int = 3
    bag_fraction: float = 0.63
    seed: int = 0
    oob_error: float | None = field(default=None, compare=False)
    kind = "rf"

    @classmethod
    def fit(
        cls,
        X,
        y,
        features: Sequence[str],
        trees: int = 200,
        bag_fraction: float = 0.63,
        max_features: int = 3,
        seed: int = 0,
    ) -> "RandomForest":
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        y = np.asarray(y).astype(str)
        F = X.shape[1]
        if not features or len(features) != F:
            raise InvalidArgument("feature names must match the columns")
        if trees < 1:
            raise InvalidArgument(f"need at least one tree, got {trees}")
        if not 1 <= max_features <= F:
            raise InvalidArgument(f"features per split must lie in [1, {F}], got {max_features}")
        if not 0.0 < bag_fraction <= 1.0:
            raise InvalidArgument(f"bag fraction must lie in (0, 1], got {bag_fraction}")
        if not np.all(np.isfinite(X)):
            raise InvalidArgument("training features must be finite")
        labels, codes = np.unique(y, return_inverse=True)
        if len(labels) < 2:
            raise InvalidArgument("training needs at least two labels")
        codes = codes.astype(np.int64)
        N, K = len(X), len(labels)
        n_bag = max(1, int(round(bag_fraction * N)))
        grown = []
        oob_votes = np.zeros((N, K), dtype=np.int64)
        for t in range(trees):
            bag = derive_rng(seed, "tree", t).integers(0, N, size=n_bag)
            tree = DecisionTree.grow(X, codes, bag, K, max_features, derive_seed(seed, "split", t))
            grown.append(tree)
            out = np.ones(N, dtype=bool)
            out[bag] = False
            if out.any():
                oob_votes[np.flatnonzero(out), tree.predict_codes(X[out])] += 1
        seen = oob_votes.sum(axis=1) > 0
        oob = float(np.mean(np.argmax(oob_votes[seen], axis=1) != codes[seen])) if seen.any() else None
        return cls(tuple(features), tuple(labels.tolist()), grown, max_features, bag_fraction, seed, oob)

    @classmethod
    def fit_clouds(cls, clouds: Sequence[Cloud], features: Sequence[str], **kw) -> "RandomForest":
        X, y = stack(clouds, features)
        return cls.fit(X, y, features, **kw)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.zeros((len(X), len(self.labels)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            votes[rows, tree.predict_codes(X)] += 1
        return np.asarray(self.labels, dtype=object)[np.argmax(votes, axis=1)]

    def predict_cloud(self, cloud: Cloud) -> np.ndarray:
        return self.predict(cloud.features(self.features))

    def feature_importance(self) -> np.ndarray:
        """MDI per feature: normalised per tree, averaged, normalised again."""
        F = len(self.features)
        total = np.zeros(F)
        for tree in self.trees:
            imp = tree.impurity_decrease(F)
            s = imp.sum()
            if s > 0:
                total += imp / s
        total /= len(self.trees)
        s = total.sum()
        return total / s if s > 0 else total

    def ranking(self) -> list[tuple[str, float]]:
        """Features by decreasing MDI; equal scores keep their column order."""
        imp = self.feature_importance()
        order = np.argsort(-imp, kind="stable")
        return [(self.features[i], float(imp[i])) for i in order]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.features),
            "labels": list(self.labels),
            "max_features": self.max_features,
            "bag_fraction": self.bag_fraction,
            "seed": self.seed,
            "oob_error": self.oob_error,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls(
            tuple(d["features"]), tuple(d["labels"]), [DecisionTree.from_dict(t) for t in d["trees"]],
            int(d["max_features"]), float(d["bag_fraction"]), int(d["seed"]), d.get("oob_error"),
        )


def rank_of(ranking: Sequence[tuple[str, float]], name: str) -> int:
    """1-based position of ``name`` in an importance ranking."""
    for pos, (feat, _) in enumerate(ranking, start=1):
        if feat == name:
            return pos
    raise InvalidArgument(f"{name!r} is not in the ranking")
