"""Two-mode correlators, their summary statistics, and resource scans."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .detection import EventSample
from .errors import InvalidArgument
from .optics.distributions import OutputDistribution, configurations
from .seeding import SeedLike, as_rng

#: Statistic names, in feature-vector order.
FEATURE_NAMES = ("nm", "cv", "s", "k", "m", "md", "hm", "iqr", "roc", "tvd")
DEGENERATE_TOL = 1e-14
HM_FLOOR = 1e-12


@lru_cache(maxsize=None)
def mode_pairs(m: int) -> np.ndarray:
    """``(C(m,2), 2)`` array of 0-based pairs ``i < j`` in lexicographic order."""
    return np.array(list(combinations(range(m), 2)), dtype=np.int64).reshape(-1, 2)


@dataclass
class CDataset:
    n: int
    m: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(mode_pairs(self.m)),):
            raise InvalidArgument(f"a C-dataset over {self.m} modes has {len(mode_pairs(self.m))} entries")

    def __getitem__(self, pair: tuple[int, int]) -> float:
        """Correlator for 1-based modes ``(i, j)``."""
        i, j = sorted(pair)
        m = self.m
        k = (i - 1) * m - (i - 1) * i // 2 + (j - i - 1)
        return float(self.values[k])

    def to_dict(self) -> dict[str, float]:
        return {f"{i + 1}-{j + 1}": float(v) for (i, j), v in zip(mode_pairs(self.m).tolist(), self.values)}

    @classmethod
    def from_dict(cls, n: int, m: int, d: dict[str, float]) -> "CDataset":
        values = np.zeros(len(mode_pairs(m)))
        lookup = {(i + 1, j + 1): k for k, (i, j) in enumerate(mode_pairs(m).tolist())}
        for key, v in d.items():
            i, j = (int(x) for x in key.split("-"))
            values[lookup[(min(i, j), max(i, j))]] = v
        return cls(n, m, values)


def _moments(freqs: np.ndarray, occ: np.ndarray) -> np.ndarray:
    """Correlators from (batched) configuration frequencies."""
    m = occ.shape[1]
    pairs = mode_pairs(m)
    mean = freqs @ occ
    second = freqs @ (occ[:, pairs[:, 0]] * occ[:, pairs[:, 1]])
    return second - mean[..., pairs[:, 0]] * mean[..., pairs[:, 1]]


def cdataset_exact(dist: OutputDistribution) -> CDataset:
    """``C_ij = <n_i n_j> - <n_i><n_j>`` with expectations over ``dist``."""
    return CDataset(dist.n, dist.m, _moments(dist.probs, dist.table.occupations.astype(np.float64)))


def cdataset_batch(probs: np.ndarray, n: int, m: int) -> np.ndarray:
    """Correlators for a ``(B, configs)`` stack of distributions or frequencies."""
    return _moments(np.asarray(probs, dtype=np.float64), configurations(n, m).occupations.astype(np.float64))


def cdataset_estimate(events: EventSample) -> CDataset:
    """Plug-in correlators from counts, or from real-valued reconstruction weights."""
    if events.total <= 0:
        raise InvalidArgument("cannot estimate correlators from an empty sample")
    return CDataset(events.n, events.m, _moments(events.frequencies(), configurations(events.n, events.m).occupations.astype(np.float64)))


def covariance_sum_residual(dist: OutputDistribution) -> float:
    """``sum_i Var(n_i) + 2 sum_{i<j} C_ij``; zero whenever photon number is fixed."""
    occ = dist.table.occupations.astype(np.float64)
    mean = dist.probs @ occ
    var = dist.probs @ occ**2 - mean**2
    return float(var.sum() + 2.0 * cdataset_exact(dist).values.sum())


# ---------------------------------------------------------------- statistics


@dataclass
class FeatureVector:
    nm: float
    cv: float
    s: float
    k: float
    m: float
    md: float
    hm: float
    iqr: float
    roc: float
    tvd: float
    degenerate: frozenset = field(default_factory=frozenset)
    hm_excluded: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])

    def to_dict(self) -> dict:
        out = {name: float(getattr(self, name)) for name in FEATURE_NAMES}
        if self.degenerate:
            out["degenerate"] = sorted(self.degenerate)
        if self.hm_excluded:
            out["hm_excluded"] = int(self.hm_excluded)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        return cls(
            **{name: float(d[name]) for name in FEATURE_NAMES},
            degenerate=frozenset(d.get("degenerate", ())),
            hm_excluded=int(d.get("hm_excluded", 0)),
        )


@dataclass
class StatisticsBatch:
    values: np.ndarray  # (B, 10), degenerate entries set to 0
    degenerate: np.ndarray  # (B, 10) bool
    hm_excluded: np.ndarray  # (B,)

    def vector(self, i: int) -> FeatureVector:
        flags = frozenset(name for name, bad in zip(FEATURE_NAMES, self.degenerate[i]) if bad)
        return FeatureVector(*self.values[i].tolist(), degenerate=flags, hm_excluded=int(self.hm_excluded[i]))


def summary_statistics_batch(c: np.ndarray, n: int, m: int) -> StatisticsBatch:
    """The ten summary statistics for each row of a ``(B, L)`` correlator stack.

    Dispersion uses population moments; percentiles interpolate linearly.
    Undefined statistics (zero mean for CV, zero spread for S and K, an
    all-zero dataset for HM, TVD and ROC) are reported as 0 and flagged.
    """
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    b, length = c.shape
    if length < 1:
        raise InvalidArgument("empty C-dataset")
    out = np.zeros((b, len(FEATURE_NAMES)))
    bad = np.zeros((b, len(FEATURE_NAMES)), dtype=bool)
    col = {name: i for i, name in enumerate(FEATURE_NAMES)}

    mean = c.mean(axis=1)
    dev = c - mean[:, None]
    var = (dev**2).mean(axis=1)
    std = np.sqrt(var)
    out[:, col["nm"]] = mean * m * m / n

    zero_mean = np.abs(mean) <= DEGENERATE_TOL
    out[:, col["cv"]] = np.where(zero_mean, 0.0, std / np.where(zero_mean, 1.0, mean))
    bad[:, col["cv"]] = zero_mean

    flat = std <= DEGENERATE_TOL
    safe_std = np.where(flat, 1.0, std)
    out[:, col["s"]] = np.where(flat, 0.0, (dev**3).mean(axis=1) / safe_std**3)
    out[:, col["k"]] = np.where(flat, 0.0, (dev**4).mean(axis=1) / safe_std**4)
    bad[:, col["s"]] = flat
    bad[:, col["k"]] = flat

    med = np.median(c, axis=1)
    out[:, col["m"]] = med
    out[:, col["md"]] = np.median(np.abs(c - med[:, None]), axis=1)
    q75, q25 = np.percentile(c, [75, 25], axis=1)
    out[:, col["iqr"]] = q75 - q25

    a = np.abs(c)
    keep = a >= HM_FLOOR
    kept = keep.sum(axis=1)
    inv = np.where(keep, 1.0 / np.where(keep, a, 1.0), 0.0).sum(axis=1)
    out[:, col["hm"]] = np.where(kept > 0, kept / np.where(kept > 0, inv, 1.0), 0.0)
    bad[:, col["hm"]] = kept == 0
    excluded = length - kept

    total = a.sum(axis=1)
    empty = total <= DEGENERATE_TOL
    share = a / np.where(empty, 1.0, total)[:, None]
    out[:, col["tvd"]] = np.where(empty, 0.0, 0.5 * np.abs(share - 1.0 / length).sum(axis=1))
    ranked = -np.sort(-share, axis=1)
    curve = np.concatenate([np.zeros((b, 1)), np.cumsum(ranked, axis=1)], axis=1)
    # trapezoid over equally spaced rank fractions 0, 1/L, ..., 1
    area = (curve[:, :-1] + curve[:, 1:]).sum(axis=1) / (2.0 * length)
    out[:, col["roc"]] = np.where(empty, 0.0, area)
    bad[:, col["tvd"]] = empty
    bad[:, col["roc"]] = empty
    out += 0.0  # no negative zeros in serialized output
    return StatisticsBatch(out, bad, excluded)


def summary_statistics(c: CDataset) -> FeatureVector:
    return summary_statistics_batch(c.values[None, :], c.n, c.m).vector(0)


# ---------------------------------------------------------------- resource scans


@dataclass
class SubsetAnalysis:
    points: dict[tuple[int, ...], tuple[float, float]]  # 1-based modes -> (NM, CV)
    per_size: dict[int, dict[str, float]]
    excluded: list[tuple[int, ...]]


def _subset_point(events: EventSample, subset0: tuple[int, ...]) -> tuple[float, float] | None:
    table = configurations(events.n, events.m)
    outside = np.ones(events.m, dtype=bool)
    outside[list(subset0)] = False
    inside = table.occupations[:, outside].sum(axis=1) == 0
    counts = events.counts[inside]
    if counts.sum() <= 0:
        return None
    occ = table.occupations[inside][:, list(subset0)].astype(np.float64)
    c = _moments(counts / counts.sum(), occ)
    stats = summary_statistics_batch(c[None, :], events.n, len(subset0))
    return float(stats.values[0, 0]), float(stats.values[0, 1])


def mode_subset_analysis(events: EventSample, subset_sizes) -> SubsetAnalysis:
    """(NM, CV) over every output-mode subset of the requested sizes.

    Only events with all photons inside the subset are kept; NM is normalised
    with the subset size.
    """
    points: dict[tuple[int, ...], tuple[float, float]] = {}
    per_size: dict[int, dict[str, float]] = {}
    excluded: list[tuple[int, ...]] = []
    for size in subset_sizes:
        size = int(size)
        if not 2 <= size <= events.m:
            raise InvalidArgument(f"subset size {size} outside 2..{events.m}")
        got = []
        for subset0 in combinations(range(events.m), size):
            label = tuple(i + 1 for i in subset0)
            pt = _subset_point(events, subset0)
            if pt is None:
                excluded.append(label)
                continue
            points[label] = pt
            got.append(pt)
        arr = np.array(got).reshape(-1, 2)
        per_size[size] = {
            "subsets": len(got),
            "mean_nm": float(arr[:, 0].mean()) if len(got) else float("nan"),
            "mean_cv": float(arr[:, 1].mean()) if len(got) else float("nan"),
            "std_nm": float(arr[:, 0].std()) if len(got) else float("nan"),
            "std_cv": float(arr[:, 1].std()) if len(got) else float("nan"),
        }
    return SubsetAnalysis(points, per_size, excluded)


@dataclass(frozen=True)
class ScanRow:
    size: int
    mean_nm: float
    mean_cv: float
    std_nm: float
    std_cv: float


def _integral_counts(events: EventSample) -> np.ndarray:
    if not events.is_integral:
        raise InvalidArgument("sample-size scans need integer event counts")
    return events.counts.astype(np.int64)


def sample_size_scan(events: EventSample, step: int = 200, extractions: int = 300, seed: SeedLike = 0) -> list[ScanRow]:
    """Mean and spread of (NM, CV) over random sub-samples of growing size.

    Sizes are ``step, 2*step, ...`` up to the sample size; each size is
    extracted ``extractions`` times without replacement.
    """
    counts = _integral_counts(events)
    total = int(counts.sum())
    if step < 1 or step > total:
        raise InvalidArgument(f"step {step} must lie in 1..{total}")
    rng = as_rng(seed)
    rows = []
    for size in range(step, total + 1, step):
        draws = rng.multivariate_hypergeometric(counts, size, size=extractions)
        c = cdataset_batch(draws / size, events.n, events.m)
        v = summary_statistics_batch(c, events.n, events.m).values[:, :2]
        # identical extractions (size == N) must report exactly zero spread
        std = np.where(np.ptp(v, axis=0) == 0, 0.0, v.std(axis=0))
        rows.append(ScanRow(size, float(v[:, 0].mean()), float(v[:, 1].mean()), float(std[0]), float(std[1])))
    return rows


def convergence_sizes(
    events: EventSample,
    step: int = 200,
    seed: SeedLike = 0,
    band: float = 0.05,
    reference: tuple[float, float] | None = None,
) -> tuple[int, int]:
    """Sample sizes at which NM and CV settle inside a relative ``band``.

    Events are accumulated in a random order, as an experiment would collect
    them. An estimate has settled at the first size after which every later
    prefix stays within ``band`` of the reference. The reference defaults to
    the full-sample values; returns ``total + step`` for a statistic that
    never settles.
    """
    counts = _integral_counts(events)
    total = int(counts.sum())
    if step < 1 or step > total:
        raise InvalidArgument(f"step {step} must lie in 1..{total}")
    rng = as_rng(seed)
    order = rng.permutation(np.repeat(np.arange(len(counts)), counts))
    sizes = np.arange(step, total + 1, step)
    prefix = np.zeros((len(sizes), len(counts)))
    for r, s in enumerate(sizes):
        prefix[r] = np.bincount(order[:s], minlength=len(counts)) / s
    v = summary_statistics_batch(cdataset_batch(prefix, events.n, events.m), events.n, events.m).values
    if reference is None:
        full = summary_statistics_batch(cdataset_batch(counts[None, :] / total, events.n, events.m), events.n, events.m).values[0]
        reference = (float(full[0]), float(full[1]))
    out = []
    for col, ref in ((0, reference[0]), (1, reference[1])):
        inside = np.abs(v[:, col] - ref) <= band * abs(ref)
        # last size outside the band; settled from the next one on
        outside = np.flatnonzero(~inside)
        first = 0 if len(outside) == 0 else outside[-1] + 1
        out.append(int(sizes[first]) if first < len(sizes) else total + step)
    return out[0], out[1]
