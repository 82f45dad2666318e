"""Clouds: summary statistics over an ensemble of unitaries, one hypothesis each."""
from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..correlators import FEATURE_NAMES, cdataset_batch, summary_statistics_batch
from ..errors import InvalidArgument
from ..optics.distributions import DistinguishabilityModel, configurations, distribution
from .ensembles import Ensemble


@dataclass
class Cloud:
    label: str
    ensemble: str
    n: int
    m: int
    seed: int
    points: np.ndarray  # (count, len(FEATURE_NAMES))
    degenerate: np.ndarray | None = None
    model: str = ""
    stream: str = ""
    input: tuple[int, ...] | None = None
    feature_names: tuple[str, ...] = field(default=FEATURE_NAMES)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.points.shape[1] != len(self.feature_names):
            raise InvalidArgument("points do not match the feature names")
        if len(self.points) < 1:
            raise InvalidArgument("a cloud needs at least one point")
        if self.degenerate is None:
            self.degenerate = np.zeros(self.points.shape, dtype=bool)

    def __len__(self) -> int:
        return len(self.points)

    def features(self, names: Sequence[str]) -> np.ndarray:
        try:
            cols = [self.feature_names.index(name) for name in names]
        except ValueError as exc:
            raise InvalidArgument(f"unknown statistic in {list(names)}") from exc
        return self.points[:, cols]

    def subset(self, rows) -> "Cloud":
        return Cloud(
            self.label, self.ensemble, self.n, self.m, self.seed,
            self.points[rows], self.degenerate[rows], self.model, self.stream, self.input, self.feature_names,
        )

    def centroid(self, names: Sequence[str] = ("nm", "cv")) -> np.ndarray:
        return self.features(names).mean(axis=0)


def _cloud_chunk(args):
    ensemble, model, modes, n, m, seed, stream, start, stop = args
    probs = np.empty((stop - start, len(configurations(n, m))))
    for row, i in enumerate(range(start, stop)):
        u, drawn = ensemble.draw(m, n, seed, i, stream)
        probs[row] = distribution(u, drawn if drawn is not None else modes, model).probs
    stats = summary_statistics_batch(cdataset_batch(probs, n, m), n, m)
    return stats.values, stats.degenerate


def generate_cloud(
    ensemble: Ensemble,
    model: DistinguishabilityModel,
    modes: Sequence[int],
    m: int,
    count: int,
    seed: int,
    label: str | None = None,
    stream: str = "",
    jobs: int = 1,
    chunk: int = 500,
) -> Cloud:
    """Summary statistics of ``count`` exact distributions under ``model``.

    Unitary ``i`` is seeded from ``(seed, ensemble, stream, i)`` and not from
    the hypothesis, so clouds built with the same seed for different models
    share their unitaries. ``jobs > 1`` spreads chunks over processes without
    changing the result.
    """
    if count < 1:
        raise InvalidArgument(f"cloud size must be >= 1, got {count}")
    modes = tuple(int(x) for x in modes)
    n = len(modes)
    bounds = [(a, min(a + chunk, count)) for a in range(0, count, chunk)]
    tasks = [(ensemble, model, modes, n, m, int(seed), stream, a, b) for a, b in bounds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_cloud_chunk, tasks))
    else:
        parts = [_cloud_chunk(t) for t in tasks]
    values = np.concatenate([p[0] for p in parts])
    degenerate = np.concatenate([p[1] for p in parts])
    return Cloud(
        label=label if label is not None else model.tag,
        ensemble=ensemble.tag,
        n=n,
        m=m,
        seed=int(seed),
        points=values,
        degenerate=degenerate,
        model=model.tag,
        stream=stream,
        input=None if ensemble.varies_input else modes,
    )


def stack(clouds: Sequence[Cloud], names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and label vector over several labelled clouds."""
    if not clouds:
        raise InvalidArgument("no clouds given")
    X = np.concatenate([c.features(names) for c in clouds])
    y = np.concatenate([np.full(len(c), c.label, dtype=object) for c in clouds])
    return X, y
