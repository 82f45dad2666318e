"""Cloud-level analyses: overlaps, the indistinguishable-to-distinguishable
transition, misassignment under partial distinguishability, and feature
importance studies."""
from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..correlators import FEATURE_NAMES, cdataset_batch, summary_statistics_batch
from ..errors import InvalidArgument
from ..optics.distributions import (
    Distinguishable,
    Indistinguishable,
    bosonic_distribution,
    configurations,
    distinguishable_distribution,
    grouping_distribution,
    validate_partition,
)
from ..seeding import derive_rng
from .classifiers import LinearSVM
from .clouds import Cloud, generate_cloud
from .ensembles import Ensemble
from .forest import RandomForest, rank_of

MIN_BINS = 10


def hist_overlap(p: np.ndarray, q: np.ndarray, bins: int = 60, pad: float = 0.05) -> tuple[float, float]:
    """TVD and similarity ``sum sqrt(p q)`` of two 2-D point sets.

    Both sets are histogrammed on one ``bins x bins`` grid spanning their joint
    bounding box, padded by ``pad`` of the range on every side.
    """
    if bins < MIN_BINS:
        raise InvalidArgument(f"need at least {MIN_BINS} bins per axis, got {bins}")
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 2 or q.ndim != 2 or p.shape[1] != 2 or q.shape[1] != 2 or not len(p) or not len(q):
        raise InvalidArgument("overlap needs two non-empty (N, 2) point sets")
    both = np.vstack([p, q])
    lo, hi = both.min(axis=0), both.max(axis=0)
    span = hi - lo
    widen = np.where(span > 0, pad * span, 0.5 * np.maximum(np.abs(lo), 1.0))
    edges = [np.linspace(lo[a] - widen[a], hi[a] + widen[a], bins + 1) for a in range(2)]
    hp = np.histogram2d(p[:, 0], p[:, 1], bins=edges)[0].ravel() / len(p)
    hq = np.histogram2d(q[:, 0], q[:, 1], bins=edges)[0].ravel() / len(q)
    return float(0.5 * np.abs(hp - hq).sum()), float(np.sqrt(hp * hq).sum())


def plane_similarity(a: Cloud, b: Cloud, plane: Sequence[str] = ("nm", "cv"), bins: int = 60) -> float:
    if len(plane) != 2:
        raise InvalidArgument("a plane is two statistics")
    return hist_overlap(a.features(plane), b.features(plane), bins)[1]


# ---------------------------------------------------------------- mixtures over shared unitaries


def _stats(probs: np.ndarray, n: int, m: int) -> np.ndarray:
    return summary_statistics_batch(cdataset_batch(probs, n, m), n, m).values


def _subset_components(
    ensemble: Ensemble, modes: Sequence[int], m: int, count: int, seed: int, stream: str
) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Per-unitary distributions for every shared-mode photon subset.

    Returns the subsets (1-based photon labels) and a ``(count, 2**n, C)``
    array; subsets of size 0 or 1 are the distinguishable law.
    """
    n = len(modes)
    subsets = [s for r in range(n + 1) for s in itertools.combinations(range(1, n + 1), r)]
    out = np.empty((count, len(subsets), len(configurations(n, m))))
    for i in range(count):
        u, drawn = ensemble.draw(m, n, seed, i, stream)
        mm = drawn if drawn is not None else modes
        dist = distinguishable_distribution(u, mm).probs
        for k, s in enumerate(subsets):
            if len(s) <= 1:
                out[i, k] = dist
            elif len(s) == n:
                out[i, k] = bosonic_distribution(u, mm).probs
            else:
                rest = [(p,) for p in range(1, n + 1) if p not in s]
                out[i, k] = grouping_distribution(u, mm, [s, *rest]).probs
    return subsets, out


def _delta_weights(subsets: list[tuple[int, ...]], deltas: np.ndarray) -> np.ndarray:
    w = np.empty(len(subsets))
    for k, s in enumerate(subsets):
        inside = np.zeros(len(deltas), dtype=bool)
        inside[[p - 1 for p in s]] = True
        w[k] = np.prod(np.where(inside, deltas, 1.0 - deltas))
    return w


def parse_grid(text: str) -> np.ndarray:
    """``"a:b:step"`` (inclusive) or a comma list, values in [0, 1]."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
        else:
            grid = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        raise InvalidArgument(f"cannot parse grid {text!r}; use 'start:stop:step' or a comma list") from exc
    if ":" in text:
        if step <= 0 or b < a:
            raise InvalidArgument("grid step must be positive and stop >= start")
        k = int(np.floor((b - a) / step + 1e-9))
        grid = np.round(a + step * np.arange(k + 1), 12)
    if not len(grid) or np.any(grid < 0) or np.any(grid > 1):
        raise InvalidArgument(f"grid {text!r} must be non-empty and inside [0, 1]")
    return grid


@dataclass
class TransitionRow:
    delta: float
    nm: float
    cv: float
    tvd: float
    similarity: float


def transition_analysis(
    ensemble: Ensemble,
    modes: Sequence[int],
    m: int,
    deltas: Sequence[float],
    count: int,
    seed: int,
    bins: int = 60,
    stream: str = "",
) -> tuple[list[TransitionRow], Cloud]:
    """Centroid path and NM-CV overlap with the distinguishable cloud versus ``delta``.

    Every ``delta`` cloud reuses the unitaries of the distinguishable cloud
    (same seed and stream), so ``delta = 0`` reproduces it exactly.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if not len(deltas) or np.any(deltas < 0) or np.any(deltas > 1):
        raise InvalidArgument("delta grid must be non-empty and inside [0, 1]")
    if bins < MIN_BINS:
        raise InvalidArgument(f"need at least {MIN_BINS} bins per axis, got {bins}")
    n = len(modes)
    subsets, comp = _subset_components(ensemble, modes, m, count, seed, stream)
    d_points = _stats(comp[:, 0], n, m)
    cols = [FEATURE_NAMES.index("nm"), FEATURE_NAMES.index("cv")]
    d_cloud = Cloud("D", ensemble.tag, n, m, seed, d_points, model=Distinguishable.tag, stream=stream)
    rows = []
    for d in deltas:
        probs = np.einsum("s,isc->ic", _delta_weights(subsets, np.full(n, d)), comp)
        pts = _stats(probs, n, m)[:, cols]
        tvd, sim = hist_overlap(pts, d_points[:, cols], bins)
        rows.append(TransitionRow(float(d), float(pts[:, 0].mean()), float(pts[:, 1].mean()), tvd, sim))
    return rows, d_cloud


def photon_paths(u: np.ndarray, modes: Sequence[int], deltas: Sequence[float]) -> dict[str, np.ndarray]:
    """NM-CV paths of one unitary as photons lose indistinguishability.

    ``"all"`` lowers every delta together. Path ``"k"`` first lowers photon
    ``k`` alone (others at 1) and then the remaining photons together. Grids
    are walked from 1 down to 0.
    """
    from ..optics.distributions import DeltaMixture, mixture_distribution

    n, m = len(modes), len(u)
    grid = np.sort(np.asarray(deltas, dtype=np.float64))[::-1]

    def point(dv):
        probs = mixture_distribution(u, modes, DeltaMixture(tuple(dv))).probs
        return _stats(probs[None, :], n, m)[0, :2]

    paths = {"all": np.array([point([d] * n) for d in grid])}
    for k in range(n):
        first = [point([d if j == k else 1.0 for j in range(n)]) for d in grid]
        second = [point([0.0 if j == k else d for j in range(n)]) for d in grid[1:]]
        paths[str(k + 1)] = np.array(first + second)
    return paths


# ---------------------------------------------------------------- misassignment


PAIRINGS = {
    "haar/haar": ("haar", "haar"),
    "structured/haar": ("structured", "haar"),
    "structured/structured": ("structured", "structured"),
}


@dataclass
class MisassignmentRow:
    pairing: str
    beta: float
    p_to_i: float
    spread: float


def _labelled_training(ensemble: Ensemble, modes, m: int, size: int, seed: int, stream: str):
    half = size // 2
    ci = generate_cloud(ensemble, Indistinguishable(), modes, m, half, seed, stream=stream)
    cd = generate_cloud(ensemble, Distinguishable(), modes, m, size - half, seed, stream=stream)
    return ci, cd


def misassignment_curve(
    sample_ensemble: Ensemble,
    train_ensemble: Ensemble,
    betas: Sequence[float],
    seed: int,
    modes: Sequence[int] = (1, 2, 3),
    m: int = 7,
    training_sets: int = 100,
    training_size: int = 1000,
    samples: int = 1000,
    grouping: Sequence[Sequence[int]] = ((1, 3), (2,)),
    plane: Sequence[str] = ("nm", "cv"),
    pairing: str = "",
) -> list[MisassignmentRow]:
    """Mean probability of assigning partially distinguishable data to ``I``.

    For each of ``training_sets`` linear SVMs (trained on ``training_size``
    points split evenly between I and D), ``samples`` fresh matrices are
    evaluated under ``beta^2 I + (1 - beta^2) grouping`` for every beta.
    Training set ``r`` and its sample matrices are seeded by ``(seed, r)``,
    so the same ``r`` sees the same unitaries at every beta.
    """
    betas = np.asarray(betas, dtype=np.float64)
    if not len(betas) or np.any(betas < 0) or np.any(betas > 1):
        raise InvalidArgument("beta grid must be non-empty and inside [0, 1]")
    modes = tuple(int(x) for x in modes)
    n = len(modes)
    grouping = validate_partition(grouping, n)
    cols = [FEATURE_NAMES.index(s) for s in plane]
    rates = np.zeros((training_sets, len(betas)))
    for r in range(training_sets):
        ci, cd = _labelled_training(train_ensemble, modes, m, training_size, seed, f"train-{r}")
        svm = LinearSVM.fit_clouds([ci, cd], plane, seed=seed)
        bos = np.empty((samples, len(configurations(n, m))))
        grp = np.empty_like(bos)
        for i in range(samples):
            u, drawn = sample_ensemble.draw(m, n, seed, i, f"sample-{r}")
            mm = drawn if drawn is not None else modes
            bos[i] = bosonic_distribution(u, mm).probs
            grp[i] = grouping_distribution(u, mm, grouping).probs
        for b, beta in enumerate(betas):
            b2 = beta * beta
            pts = _stats(b2 * bos + (1.0 - b2) * grp, n, m)[:, cols]
            rates[r, b] = np.mean(svm.predict(pts) == "I")
    label = pairing or f"{sample_ensemble.tag}/{train_ensemble.tag}"
    return [
        MisassignmentRow(label, float(beta), float(rates[:, b].mean()), float(rates[:, b].std()))
        for b, beta in enumerate(betas)
    ]


# ---------------------------------------------------------------- importance


@dataclass
class ImportanceResult:
    n: int
    m: int
    features: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    per_extraction: np.ndarray  # (extractions, F)

    def ranking(self) -> list[tuple[str, float]]:
        order = np.argsort(-self.mean, kind="stable")
        return [(self.features[i], float(self.mean[i])) for i in order]


def importance_from_clouds(
    clouds: Sequence[Cloud],
    extractions: int = 200,
    train_size: int = 1000,
    seed: int = 0,
    trees: int = 200,
    max_features: int = 3,
    bag_fraction: float = 0.63,
    features: Sequence[str] = FEATURE_NAMES,
) -> ImportanceResult:
    """MDI averaged over forests trained on random extractions of the clouds.

    Extraction ``e`` takes ``train_size`` points from each cloud without
    replacement, using ``(seed, "extract", e)``.
    """
    if extractions < 1:
        raise InvalidArgument("need at least one extraction")
    if any(len(c) < train_size for c in clouds):
        raise InvalidArgument(f"every cloud needs at least {train_size} points")
    per = np.empty((extractions, len(features)))
    for e in range(extractions):
        rng = derive_rng(seed, "extract", e)
        parts = [c.subset(np.sort(rng.choice(len(c), train_size, replace=False))) for c in clouds]
        rf = RandomForest.fit_clouds(
            parts, features, trees=trees, max_features=max_features, bag_fraction=bag_fraction,
            seed=int(rng.integers(2**62)),
        )
        per[e] = rf.feature_importance()
    c0 = clouds[0]
    return ImportanceResult(c0.n, c0.m, tuple(features), per.mean(axis=0), per.std(axis=0), per)


def importance_levels(importance: np.ndarray, features: Sequence[str]) -> dict[str, int]:
    """Importance level of each feature: ``F`` for the top one down to 1."""
    ranking = [(features[i], importance[i]) for i in np.argsort(-np.asarray(importance), kind="stable")]
    F = len(features)
    return {name: F + 1 - rank_of(ranking, name) for name in features}


def rank_trends(results_by_size: Sequence[np.ndarray], features: Sequence[str] = FEATURE_NAMES) -> dict[str, bool]:
    """Whether NM's importance level never rises and CV's never falls along the sizes."""
    levels = [importance_levels(r, features) for r in results_by_size]
    nm = [lv["nm"] for lv in levels]
    cv = [lv["cv"] for lv in levels]
    return {
        "nm_non_increasing": all(a >= b for a, b in zip(nm, nm[1:])),
        "cv_non_decreasing": all(a <= b for a, b in zip(cv, cv[1:])),
    }
