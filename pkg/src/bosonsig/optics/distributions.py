"""Exact n-photon output distributions under several distinguishability models.

Configurations of ``n`` photons over ``m`` modes are enumerated once per
``(n, m)`` in lexicographic order of their sorted mode lists, so every
distribution is a dense probability vector aligned with that table.
Mode indices in the public API are 1-based, as in lab notation.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import _kernels
from ..errors import InvalidArgument, SizeLimitError

PROB_FLOOR = 1e-15
MAX_PERMANENT_ORDER = 12


@dataclass(frozen=True)
class ConfigTable:
    n: int
    m: int
    modes: np.ndarray  # (C, n) sorted 0-based mode lists
    occupations: np.ndarray  # (C, m)
    index: dict

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def collision_free(self) -> np.ndarray:
        return self.occupations.max(axis=1) <= 1


@lru_cache(maxsize=None)
def configurations(n: int, m: int) -> ConfigTable:
    """All ``C(m+n-1, n)`` occupation patterns of ``n`` photons in ``m`` modes."""
    if n < 1 or m < 1:
        raise InvalidArgument(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    modes = np.array(list(itertools.combinations_with_replacement(range(m), n)), dtype=np.int64)
    occ = np.zeros((len(modes), m), dtype=np.int64)
    for j in range(n):
        np.add.at(occ, (np.arange(len(modes)), modes[:, j]), 1)
    modes.setflags(write=False)
    occ.setflags(write=False)
    index = {tuple(row): i for i, row in enumerate(occ.tolist())}
    return ConfigTable(n, m, modes, occ, index)


def occupation_key(occ: Sequence[int]) -> str:
    return ",".join(str(int(x)) for x in occ)


def parse_occupation_key(key: str) -> tuple[int, ...]:
    return tuple(int(x) for x in key.split(","))


@dataclass
class OutputDistribution:
    n: int
    m: int
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (len(configurations(self.n, self.m)),):
            raise InvalidArgument(
                f"expected {len(configurations(self.n, self.m))} probabilities for n={self.n}, m={self.m}"
            )

    @property
    def table(self) -> ConfigTable:
        return configurations(self.n, self.m)

    def prob(self, occupations: Sequence[int]) -> float:
        i = self.table.index.get(tuple(int(x) for x in occupations))
        if i is None:
            raise InvalidArgument(f"{tuple(occupations)} is not an {self.n}-photon configuration on {self.m} modes")
        return float(self.probs[i])

    def to_dict(self, drop_zeros: bool = True) -> dict[str, float]:
        occ = self.table.occupations
        return {
            occupation_key(occ[i]): float(p)
            for i, p in enumerate(self.probs)
            if not (drop_zeros and p == 0.0)
        }

    @classmethod
    def from_dict(cls, n: int, m: int, probs: dict[str, float]) -> "OutputDistribution":
        table = configurations(n, m)
        out = np.zeros(len(table))
        for key, p in probs.items():
            i = table.index.get(parse_occupation_key(key))
            if i is None:
                raise InvalidArgument(f"configuration {key!r} does not hold {n} photons on {m} modes")
            out[i] = p
        return cls(n, m, out)


def _finalize(probs: np.ndarray) -> np.ndarray:
    probs = np.where(probs < PROB_FLOOR, 0.0, probs)
    return probs / probs.sum()


def permanent(matrix) -> complex:
    """Permanent of a square matrix via Ryser's formula in Gray-code order."""
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidArgument(f"permanent needs a non-empty square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_PERMANENT_ORDER:
        raise SizeLimitError(f"permanent order {a.shape[0]} exceeds limit {MAX_PERMANENT_ORDER}")
    return _kernels.permanent(a.astype(np.complex128))


def _validate(u: np.ndarray, modes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgument(f"unitary must be square, got shape {u.shape}")
    m = u.shape[0]
    if len(modes) < 1:
        raise InvalidArgument("input state needs at least one photon")
    cols = np.sort(np.asarray([int(x) for x in modes], dtype=np.int64)) - 1
    if cols.min() < 0 or cols.max() >= m:
        raise InvalidArgument(f"input modes {tuple(modes)} outside 1..{m}")
    if len(cols) > MAX_PERMANENT_ORDER:
        raise SizeLimitError(f"{len(cols)} photons exceed the permanent order limit {MAX_PERMANENT_ORDER}")
    return u, cols


@lru_cache(maxsize=None)
def _output_factorials(n: int, m: int) -> np.ndarray:
    occ = configurations(n, m).occupations
    return np.array([math.prod(math.factorial(int(t)) for t in row) for row in occ], dtype=np.float64)


def bosonic_distribution(u: np.ndarray, modes: Sequence[int]) -> OutputDistribution:
    """Indistinguishable bosons: ``|Perm(U_{T,S})|^2 / (prod s! prod t!)``."""
    u, cols = _validate(u, modes)
    n, m = len(cols), u.shape[0]
    table = configurations(n, m)
    perms = _kernels.submatrix_permanents(u, cols, table.modes)
    in_fact = math.prod(math.factorial(c) for c in np.bincount(cols))
    probs = (perms.real**2 + perms.imag**2) / (in_fact * _output_factorials(n, m))
    return OutputDistribution(n, m, _finalize(probs))


def distinguishable_distribution(u: np.ndarray, modes: Sequence[int]) -> OutputDistribution:
    """Independently routed photons: ``Perm(|U|^2_{T,S}) / prod t!``."""
    u, cols = _validate(u, modes)
    n, m = len(cols), u.shape[0]
    table = configurations(n, m)
    w = (u.real**2 + u.imag**2).astype(np.complex128)
    perms = _kernels.submatrix_permanents(w, cols, table.modes)
    probs = perms.real / _output_factorials(n, m)
    return OutputDistribution(n, m, _finalize(probs))


@lru_cache(maxsize=None)
def _convolution_map(m: int, k1: int, k2: int) -> np.ndarray:
    a = configurations(k1, m).occupations
    b = configurations(k2, m).occupations
    target = configurations(k1 + k2, m).index
    summed = a[:, None, :] + b[None, :, :]
    out = np.array([target[tuple(row)] for row in summed.reshape(-1, m).tolist()], dtype=np.int64)
    return out.reshape(len(a), len(b))


def convolve(p: OutputDistribution, q: OutputDistribution) -> OutputDistribution:
    """Distribution of the summed occupations of two independent photon groups."""
    if p.m != q.m:
        raise InvalidArgument("cannot convolve distributions over different mode counts")
    idx = _convolution_map(p.m, p.n, q.n)
    weights = np.outer(p.probs, q.probs)
    n = p.n + q.n
    probs = np.bincount(idx.ravel(), weights=weights.ravel(), minlength=len(configurations(n, p.m)))
    return OutputDistribution(n, p.m, probs)


def validate_partition(partition: Sequence[Sequence[int]], n: int) -> tuple[tuple[int, ...], ...]:
    blocks = tuple(tuple(sorted(int(x) for x in block)) for block in partition)
    labels = sorted(x for block in blocks for x in block)
    if any(len(b) == 0 for b in blocks) or labels != list(range(1, n + 1)):
        raise InvalidArgument(f"partition {partition!r} must cover photon labels 1..{n} exactly once")
    return blocks


def grouping_distribution(
    u: np.ndarray, modes: Sequence[int], partition: Sequence[Sequence[int]]
) -> OutputDistribution:
    """Photons interfere within a block; separate blocks add classically.

    ``partition`` groups photon labels ``1..n``, where label ``k`` is the
    photon entering through ``modes[k-1]``.
    """
    modes = [int(x) for x in modes]
    blocks = validate_partition(partition, len(modes))
    _validate(u, modes)
    out: OutputDistribution | None = None
    for block in blocks:
        sub = [modes[k - 1] for k in block]
        part = bosonic_distribution(u, sub) if len(block) > 1 else distinguishable_distribution(u, sub)
        out = part if out is None else convolve(out, part)
    assert out is not None
    return OutputDistribution(out.n, out.m, _finalize(out.probs))


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class Indistinguishable:
    tag = "I"


@dataclass(frozen=True)
class Distinguishable:
    tag = "D"


@dataclass(frozen=True)
class Grouping:
    partition: tuple[tuple[int, ...], ...]

    @property
    def tag(self) -> str:
        return "G[" + "|".join(",".join(map(str, b)) for b in self.partition) + "]"


@dataclass(frozen=True)
class DeltaMixture:
    """Each photon sits in a shared internal mode with probability ``deltas[i]``."""

    deltas: tuple[float, ...]

    def __post_init__(self):
        for d in self.deltas:
            if not 0.0 <= d <= 1.0:
                raise InvalidArgument(f"indistinguishability {d} outside [0, 1]")

    @property
    def tag(self) -> str:
        return "delta[" + ",".join(repr(float(d)) for d in self.deltas) + "]"


@dataclass(frozen=True)
class BetaMixture:
    """``beta^2`` fully indistinguishable plus ``1 - beta^2`` of ``grouping``."""

    beta: float
    grouping: tuple[tuple[int, ...], ...] = ((1, 3), (2,))

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidArgument(f"beta {self.beta} outside [0, 1]")

    @property
    def tag(self) -> str:
        return f"beta[{float(self.beta)!r}]"


DistinguishabilityModel = Indistinguishable | Distinguishable | Grouping | DeltaMixture | BetaMixture


def mixture_distribution(u: np.ndarray, modes: Sequence[int], model: DeltaMixture | BetaMixture) -> OutputDistribution:
    modes = [int(x) for x in modes]
    n = len(modes)
    if isinstance(model, BetaMixture):
        b2 = model.beta**2
        probs = b2 * bosonic_distribution(u, modes).probs
        if b2 < 1.0:
            probs = probs + (1.0 - b2) * grouping_distribution(u, modes, model.grouping).probs
        return OutputDistribution(n, len(u), _finalize(probs))
    if isinstance(model, DeltaMixture):
        deltas = np.asarray(model.deltas, dtype=np.float64)
        if deltas.shape != (n,):
            raise InvalidArgument(f"need one delta per photon ({n}), got {len(deltas)}")
        probs = np.zeros(len(configurations(n, len(u))))
        dist_probs = None
        for r in range(n + 1):
            for shared in itertools.combinations(range(1, n + 1), r):
                inside = np.zeros(n, dtype=bool)
                inside[[k - 1 for k in shared]] = True
                weight = float(np.prod(np.where(inside, deltas, 1.0 - deltas)))
                if weight == 0.0:
                    continue
                if r <= 1:
                    if dist_probs is None:
                        dist_probs = distinguishable_distribution(u, modes).probs
                    part = dist_probs
                elif r == n:
                    part = bosonic_distribution(u, modes).probs
                else:
                    rest = [(k,) for k in range(1, n + 1) if k not in shared]
                    part = grouping_distribution(u, modes, [shared, *rest]).probs
                probs = probs + weight * part
        return OutputDistribution(n, len(u), _finalize(probs))
    raise InvalidArgument(f"not a mixture model: {model!r}")


def distribution(u: np.ndarray, modes: Sequence[int], model: DistinguishabilityModel) -> OutputDistribution:
    """Dispatch on the distinguishability hypothesis."""
    if isinstance(model, Indistinguishable):
        return bosonic_distribution(u, modes)
    if isinstance(model, Distinguishable):
        return distinguishable_distribution(u, modes)
    if isinstance(model, Grouping):
        return grouping_distribution(u, modes, model.partition)
    if isinstance(model, (DeltaMixture, BetaMixture)):
        return mixture_distribution(u, modes, model)
    raise InvalidArgument(f"unknown distinguishability model {model!r}")


def total_variation_distance(p, q) -> float:
    """Half the L1 distance between two distributions over the same configurations.

    Accepts ``OutputDistribution``s, ``EventSample``s (via their empirical
    frequencies) or plain arrays.
    """
    pa, qa = _as_probs(p), _as_probs(q)
    shape_p = (getattr(p, "n", None), getattr(p, "m", None))
    shape_q = (getattr(q, "n", None), getattr(q, "m", None))
    if None not in shape_p and None not in shape_q and shape_p != shape_q:
        raise InvalidArgument(f"distributions over different (n, m): {shape_p} vs {shape_q}")
    if pa.shape != qa.shape:
        raise InvalidArgument(f"shape mismatch {pa.shape} vs {qa.shape}")
    return float(0.5 * np.abs(pa - qa).sum())


def _as_probs(x) -> np.ndarray:
    if hasattr(x, "frequencies"):
        return np.asarray(x.frequencies(), dtype=np.float64)
    if hasattr(x, "probs"):
        return np.asarray(x.probs, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)
