"""Nearest-centroid, k-NN and linear SVM classifiers on cloud features.

All three work on standardized features: the overall mean is removed and each
column is divided by the pooled within-class standard deviation.
"""
from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from ..seeding import derive_rng
from .clouds import Cloud, stack

STD_FLOOR = 1e-12


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        labels, inv = np.unique(y, return_inverse=True)
        resid = X.copy()
        for c in range(len(labels)):
            rows = inv == c
            resid[rows] -= X[rows].mean(axis=0)
        dof = max(len(X) - len(labels), 1)
        scale = np.sqrt((resid**2).sum(axis=0) / dof)
        bad = ~(scale > STD_FLOOR)
        if bad.any():
            warnings.warn(
                f"pooled deviation vanishes for feature column(s) {np.flatnonzero(bad).tolist()}; left unscaled",
                RuntimeWarning,
                stacklevel=3,
            )
            scale[bad] = 1.0
        return cls(X.mean(axis=0), scale)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))


def _check_training(X, y, features) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y).astype(str)
    if not features:
        raise InvalidArgument("feature subset is empty")
    if X.shape[1] != len(features):
        raise InvalidArgument(f"{X.shape[1]} columns for {len(features)} feature names")
    if len(X) != len(y):
        raise InvalidArgument("features and labels differ in length")
    labels = np.unique(y)
    if len(labels) < 2:
        raise InvalidArgument("training needs at least two labels")
    return X, y, tuple(features)


class _Classifier:
    kind = ""
    features: tuple[str, ...]
    labels: tuple[str, ...]

    @classmethod
    def fit_clouds(cls, clouds: Sequence[Cloud], features: Sequence[str] = ("nm", "cv"), **kw):
        X, y = stack(clouds, features)
        return cls.fit(X, y, features, **kw)

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_cloud(self, cloud: Cloud) -> np.ndarray:
        return self.predict(cloud.features(self.features))


@dataclass
class NearestCentroid(_Classifier):
    """Assign each point to the label whose cloud mean is closest."""

    features: tuple[str, ...]
    labels: tuple[str, ...]
    centroids: np.ndarray
    scaler: Standardizer
    kind = "centroid"

    @classmethod
    def fit(cls, X, y, features: Sequence[str] = ("nm", "cv")) -> "NearestCentroid":
        X, y, features = _check_training(X, y, features)
        scaler = Standardizer.fit(X, y)
        labels = tuple(np.unique(y).tolist())
        centroids = np.array([X[y == lab].mean(axis=0) for lab in labels])
        return cls(features, labels, centroids, scaler)

    def distances(self, X: np.ndarray) -> np.ndarray:
        Z = self.scaler(np.atleast_2d(X))
        C = self.scaler(self.centroids)
        return np.sqrt(((Z[:, None, :] - C[None, :, :]) ** 2).sum(axis=2))

    def predict(self, X: np.ndarray, return_ties: bool = False):
        d = self.distances(X)
        # distances equal up to rounding count as ties; labels are sorted, so
        # the first tied column is the lexicographically smaller label
        tied = np.isclose(d, d.min(axis=1)[:, None], rtol=1e-12, atol=1e-12)
        out = np.asarray(self.labels, dtype=object)[np.argmax(tied, axis=1)]
        if return_ties:
            return out, tied.sum(axis=1) > 1
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.features),
            "labels": list(self.labels),
            "centroids": self.centroids.tolist(),
            "standardization": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NearestCentroid":
        return cls(
            tuple(d["features"]), tuple(d["labels"]), np.asarray(d["centroids"], dtype=np.float64),
            Standardizer.from_dict(d["standardization"]),
        )


def _check_k(k: int, n_train: int) -> int:
    k = int(k)
    if k < 1 or k % 2 == 0:
        raise InvalidArgument(f"k must be an odd positive integer, got {k}")
    if k > n_train:
        raise InvalidArgument(f"k={k} exceeds the {n_train} training points")
    return k


def _neighbour_order(Z_train: np.ndarray, Z: np.ndarray, kmax: int, chunk: int = 2048) -> np.ndarray:
    """Indices of the ``kmax`` nearest training points, ties in insertion order."""
    out = np.empty((len(Z), kmax), dtype=np.int64)
    for a in range(0, len(Z), chunk):
        block = Z[a : a + chunk]
        d = ((block[:, None, :] - Z_train[None, :, :]) ** 2).sum(axis=2)
        out[a : a + chunk] = np.argsort(d, axis=1, kind="stable")[:, :kmax]
    return out


def _vote(neighbour_labels: np.ndarray, n_labels: int) -> np.ndarray:
    counts = np.zeros((len(neighbour_labels), n_labels), dtype=np.int64)
    for c in range(n_labels):
        counts[:, c] = (neighbour_labels == c).sum(axis=1)
    return np.argmax(counts, axis=1)


@dataclass
class KNearest(_Classifier):
    """Majority vote among the ``k`` nearest training points (``k`` odd)."""

    features: tuple[str, ...]
    labels: tuple[str, ...]
    k: int
    points: np.ndarray
    codes: np.ndarray
    scaler: Standardizer
    kind = "knn"

    def __post_init__(self):
        self.k = _check_k(self.k, len(self.points))
        self._z = self.scaler(self.points)

    @classmethod
    def fit(cls, X, y, features: Sequence[str] = ("nm", "cv"), k: int = 1) -> "KNearest":
        X, y, features = _check_training(X, y, features)
        labels, codes = np.unique(y, return_inverse=True)
        return cls(features, tuple(labels.tolist()), k, X, codes.astype(np.int64), Standardizer.fit(X, y))

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = self.scaler(np.atleast_2d(X))
        nb = _neighbour_order(self._z, Z, self.k)
        return np.asarray(self.labels, dtype=object)[_vote(self.codes[nb], len(self.labels))]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.features),
            "labels": list(self.labels),
            "k": self.k,
            "points": self.points.tolist(),
            "codes": self.codes.tolist(),
            "standardization": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KNearest":
        return cls(
            tuple(d["features"]), tuple(d["labels"]), int(d["k"]),
            np.asarray(d["points"], dtype=np.float64), np.asarray(d["codes"], dtype=np.int64),
            Standardizer.from_dict(d["standardization"]),
        )


def tune_k(
    X_train, y_train, X_val, y_val, features: Sequence[str] = ("nm", "cv"), ks: Sequence[int] | None = None
) -> tuple[int, list[tuple[int, float]]]:
    """Odd ``k`` with the lowest validation error (smallest ``k`` on ties).

    Returns the chosen ``k`` and the whole ``(k, error)`` scan.
    """
    model = KNearest.fit(X_train, y_train, features, k=1)
    if ks is None:
        ks = range(1, min(101, len(model.points)) + 1, 2)
    ks = [_check_k(k, len(model.points)) for k in ks]
    nb = _neighbour_order(model._z, model.scaler(np.atleast_2d(X_val)), max(ks))
    truth = np.asarray(y_val).astype(str)
    lab = np.asarray(model.labels, dtype=object)
    scan = []
    for k in ks:
        pred = lab[_vote(model.codes[nb[:, :k]], len(model.labels))]
        scan.append((k, float(np.mean(pred != truth))))
    best = min(scan, key=lambda row: (row[1], row[0]))[0]
    return best, scan


@dataclass
class LinearSVM(_Classifier):
    """Soft-margin linear SVM trained by stochastic subgradient descent.

    The objective is ``lam/2 |w|^2 + mean(hinge)`` with ``lam = 1/(C N)``. Each
    epoch visits the standardized training set in a seeded order, in
    mini-batches, with step ``1/(lam t)`` and a projection onto the ball of
    radius ``1/sqrt(lam)``. The bias is the weight of a constant feature and
    is left out of the regularization and the projection.
    ``labels[1]`` is the positive class.
    """

    features: tuple[str, ...]
    labels: tuple[str, ...]
    weights: np.ndarray
    bias: float
    scaler: Standardizer
    history: tuple[int, ...] = ()
    kind = "svm"

    @classmethod
    def fit(
        cls,
        X,
        y,
        features: Sequence[str] = ("nm", "cv"),
        C: float = 1.0,
        epochs: int = 200,
        seed: int = 0,
        batch: int = 32,
    ) -> "LinearSVM":
        X, y, features = _check_training(X, y, features)
        labels = tuple(np.unique(y).tolist())
        if len(labels) != 2:
            raise InvalidArgument(f"a linear SVM separates two labels, got {len(labels)}")
        if C <= 0 or epochs < 1 or batch < 1:
            raise InvalidArgument("C, epochs and batch must be positive")
        scaler = Standardizer.fit(X, y)
        Z = np.hstack([scaler(X), np.ones((len(X), 1))])
        s = np.where(y == labels[1], 1.0, -1.0)
        N = len(Z)
        lam = 1.0 / (C * N)
        radius = 1.0 / np.sqrt(lam)
        w = np.zeros(Z.shape[1])
        t = 0
        history = []
        for epoch in range(epochs):
            order = derive_rng(seed, "svm-epoch", epoch).permutation(N)
            for a in range(0, N, batch):
                rows = order[a : a + batch]
                t += 1
                eta = 1.0 / (lam * t)
                margin = s[rows] * (Z[rows] @ w)
                viol = rows[margin < 1.0]
                w[:-1] *= 1.0 - eta * lam
                if len(viol):
                    w += (eta / len(rows)) * (s[viol] @ Z[viol])
                norm = np.linalg.norm(w[:-1])
                if norm > radius:
                    w[:-1] *= radius / norm
            history.append(int(np.count_nonzero(s * (Z @ w) < 1.0)))
        return cls(features, labels, w[:-1].copy(), float(w[-1]), scaler, tuple(history))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.scaler(np.atleast_2d(X)) @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        lab = np.asarray(self.labels, dtype=object)
        return lab[(self.decision_function(X) > 0).astype(np.int64)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": list(self.features),
            "labels": list(self.labels),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "standardization": self.scaler.to_dict(),
            "violations": list(self.history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSVM":
        return cls(
            tuple(d["features"]), tuple(d["labels"]), np.asarray(d["weights"], dtype=np.float64),
            float(d["bias"]), Standardizer.from_dict(d["standardization"]), tuple(d.get("violations", ())),
        )


def misassignment_rate(model, cloud: Cloud, true_label: str | None = None) -> float:
    """Fraction of ``cloud`` assigned to a label other than its own."""
    if len(cloud.points) == 0:
        raise InvalidArgument("empty test cloud")
    label = cloud.label if true_label is None else true_label
    return float(np.mean(model.predict_cloud(cloud) != label))


def error_probability(model, test_i: Cloud, test_d: Cloud) -> float:
    """Symmetric error: mean of the I-to-D and D-to-I misassignment rates."""
    return 0.5 * (misassignment_rate(model, test_i) + misassignment_rate(model, test_d))
