"""Finite samples, the fibre-splitter cascade, and bias-corrected reconstruction.

Each interferometer output mode feeds a two-layer cascade with three
threshold detectors ("ports"). Port 1 takes the light transmitted by the
first, unbalanced splitter; ports 2 and 3 split the reflected arm on a second
splitter. Ports are numbered 1..3 per mode, modes 1..m.
"""
from __future__ import annotations

import json
import math
import warnings
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import FormatError, InconsistencyError, InvalidArgument
from .optics.distributions import OutputDistribution, configurations
from .seeding import SeedLike, as_rng

PORTS_PER_MODE = 3


@dataclass
class EventSample:
    """Counts (or real-valued weights) per output configuration."""

    n: int
    m: int
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.shape != (len(configurations(self.n, self.m)),):
            raise InvalidArgument(f"counts do not match the n={self.n}, m={self.m} configuration table")
        if np.any(self.counts < 0):
            raise InvalidArgument("counts must be non-negative")

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        total = self.total
        if total <= 0:
            raise InvalidArgument("empty sample")
        return self.counts / total

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.counts == np.round(self.counts)))

    def config_labels(self) -> list[str]:
        return [config_label(row) for row in configurations(self.n, self.m).modes]


def config_label(modes0: Sequence[int]) -> str:
    """``(0, 3, 3)`` -> ``"1.4.4"``: sorted 1-based occupied modes with repeats."""
    return ".".join(str(int(x) + 1) for x in modes0)


def parse_config_label(label: str, m: int) -> tuple[int, ...]:
    try:
        modes = sorted(int(x) for x in label.split("."))
    except ValueError as exc:
        raise FormatError(f"bad configuration label {label!r}") from exc
    if not modes or modes[0] < 1 or modes[-1] > m:
        raise FormatError(f"configuration {label!r} outside modes 1..{m}")
    occ = [0] * m
    for x in modes:
        occ[x - 1] += 1
    return tuple(occ)


def sample_events(dist: OutputDistribution, count: int, seed: SeedLike) -> EventSample:
    """``count`` i.i.d. draws from ``dist``."""
    if count < 1:
        raise InvalidArgument(f"sample size must be >= 1, got {count}")
    p = np.asarray(dist.probs, dtype=np.float64)
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise InvalidArgument("distribution is not normalized")
    rng = as_rng(seed)
    return EventSample(dist.n, dist.m, rng.multinomial(count, p / p.sum()))


def bootstrap_resample(events: EventSample, replicates: int, seed: SeedLike) -> list[EventSample]:
    """Multinomial resamples of the empirical frequencies, same size as the sample."""
    if replicates < 1:
        raise InvalidArgument(f"replicates must be >= 1, got {replicates}")
    rng = as_rng(seed)
    size = int(round(events.total))
    draws = rng.multinomial(size, events.frequencies(), size=replicates)
    return [EventSample(events.n, events.m, row) for row in draws]


# ---------------------------------------------------------------- cascade


@dataclass
class CascadeSpec:
    m: int
    first_layer_reflectivity: float = 0.66
    second_layer_reflectivity: float = 0.50
    port_efficiencies: np.ndarray | None = None
    trigger_efficiency: float = 1.0

    def __post_init__(self):
        for name in ("first_layer_reflectivity", "second_layer_reflectivity", "trigger_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument(f"{name} = {v} outside [0, 1]")
        if self.port_efficiencies is None:
            self.port_efficiencies = np.ones((self.m, PORTS_PER_MODE))
        eta = np.asarray(self.port_efficiencies, dtype=np.float64)
        if eta.ndim == 0:
            eta = np.full((self.m, PORTS_PER_MODE), float(eta))
        if eta.shape != (self.m, PORTS_PER_MODE):
            raise InvalidArgument(f"need {PORTS_PER_MODE} port efficiencies per mode, got shape {eta.shape}")
        if np.any((eta < 0) | (eta > 1)):
            raise InvalidArgument("port efficiencies must lie in [0, 1]")
        self.port_efficiencies = eta

    def port_probabilities(self) -> np.ndarray:
        """Routing probabilities of one photon onto ports 1, 2, 3."""
        r1, r2 = self.first_layer_reflectivity, self.second_layer_reflectivity
        p1 = 1.0 - r1
        p2 = r1 * r2
        return np.array([p1, p2, 1.0 - (p1 + p2)])

    def resolution_probability(self, photons: int) -> float:
        """Probability that ``photons`` photons in one mode hit distinct ports."""
        if photons <= 1:
            return 1.0
        if photons > PORTS_PER_MODE:
            return 0.0
        p = self.port_probabilities()
        esym = sum(math.prod(p[list(c)]) for c in combinations(range(PORTS_PER_MODE), photons))
        return math.factorial(photons) * esym

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "first_layer_reflectivity": self.first_layer_reflectivity,
            "second_layer_reflectivity": self.second_layer_reflectivity,
            "port_efficiencies": self.port_efficiencies.tolist(),
            "trigger_efficiency": self.trigger_efficiency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CascadeSpec":
        try:
            return cls(
                m=int(d["m"]),
                first_layer_reflectivity=float(d.get("first_layer_reflectivity", 0.66)),
                second_layer_reflectivity=float(d.get("second_layer_reflectivity", 0.50)),
                port_efficiencies=d.get("port_efficiencies"),
                trigger_efficiency=float(d.get("trigger_efficiency", 1.0)),
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad cascade spec: {exc}") from exc


@dataclass(frozen=True)
class ClickRecord:
    ports: frozenset = field(default_factory=frozenset)  # {(mode, port)}, both 1-based
    trigger: bool = True

    def to_json(self) -> str:
        return json.dumps({"ports": [list(p) for p in sorted(self.ports)], "trigger": self.trigger})

    @classmethod
    def from_json(cls, line: str) -> "ClickRecord":
        try:
            d = json.loads(line)
            ports = frozenset((int(a), int(b)) for a, b in d["ports"])
            return cls(ports, bool(d.get("trigger", True)))
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"bad click record {line.strip()!r}") from exc


class ClickStream:
    """Array-backed sequence of click records.

    ``fired[r, i, p]`` says whether port ``p`` of mode ``i`` (0-based) clicked
    in record ``r``.
    """

    def __init__(self, fired: np.ndarray, trigger: np.ndarray):
        self.fired = np.asarray(fired, dtype=bool)
        self.trigger = np.asarray(trigger, dtype=bool)
        if self.fired.ndim != 3 or self.fired.shape[2] != PORTS_PER_MODE:
            raise InvalidArgument("fired array must have shape (records, modes, 3)")
        if self.trigger.shape != self.fired.shape[:1]:
            raise InvalidArgument("one trigger flag per record required")

    @property
    def m(self) -> int:
        return self.fired.shape[1]

    def __len__(self) -> int:
        return len(self.trigger)

    def __iter__(self) -> Iterator[ClickRecord]:
        for r in range(len(self)):
            modes, ports = np.nonzero(self.fired[r])
            yield ClickRecord(frozenset(zip((modes + 1).tolist(), (ports + 1).tolist())), bool(self.trigger[r]))

    @classmethod
    def from_records(cls, records: Iterable[ClickRecord], m: int) -> "ClickStream":
        records = list(records)
        fired = np.zeros((len(records), m, PORTS_PER_MODE), dtype=bool)
        trigger = np.zeros(len(records), dtype=bool)
        for r, rec in enumerate(records):
            trigger[r] = rec.trigger
            for mode, port in rec.ports:
                if not (1 <= mode <= m and 1 <= port <= PORTS_PER_MODE):
                    raise FormatError(f"port ({mode}, {port}) outside [1, {m}] x [1, {PORTS_PER_MODE}]")
                fired[r, mode - 1, port - 1] = True
        return cls(fired, trigger)

    def to_ndjson(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self)

    @classmethod
    def from_ndjson(cls, text: str, m: int) -> "ClickStream":
        return cls.from_records((ClickRecord.from_json(line) for line in text.splitlines() if line.strip()), m)


def route_through_cascade(events: EventSample, spec: CascadeSpec, seed: SeedLike) -> ClickStream:
    """Send every photon of every event through its mode's splitter cascade.

    Events are expanded in configuration-table order. Each photon picks a
    port independently, then survives with that port's efficiency; a port
    clicks if at least one photon survives on it.
    """
    if spec.m != events.m:
        raise InvalidArgument(f"cascade spec has {spec.m} modes, events have {events.m}")
    if not events.is_integral:
        raise InvalidArgument("cascade routing needs integer event counts")
    rng = as_rng(seed)
    table = configurations(events.n, events.m)
    reps = events.counts.astype(np.int64)
    modes = np.repeat(table.modes, reps, axis=0)  # (R, n)
    n_rec = len(modes)
    cum = np.cumsum(spec.port_probabilities())
    u = rng.random(modes.shape)
    port = np.minimum(np.searchsorted(cum, u, side="right"), PORTS_PER_MODE - 1)
    survive = rng.random(modes.shape) < spec.port_efficiencies[modes, port]
    trigger = rng.random(n_rec) < spec.trigger_efficiency
    fired = np.zeros((n_rec, events.m, PORTS_PER_MODE), dtype=bool)
    rec = np.broadcast_to(np.arange(n_rec)[:, None], modes.shape)
    fired[rec[survive], modes[survive], port[survive]] = True
    return ClickStream(fired, trigger)


def reconstruct_counts(clicks: ClickStream | Iterable[ClickRecord], spec: CascadeSpec, n: int) -> EventSample:
    """Postselect ``n``-click triggered records and undo the cascade bias.

    Each kept record is weighted by ``1 / (resolution x efficiency)``: the
    first factor is the probability that the photons sharing a mode landed on
    distinct ports, the second the product of the fired ports' efficiencies.
    Weights are rescaled so they sum to the number of kept records.
    """
    if n < 1:
        raise InvalidArgument(f"photon count must be >= 1, got {n}")
    if not isinstance(clicks, ClickStream):
        clicks = ClickStream.from_records(clicks, spec.m)
    if clicks.m != spec.m:
        raise InvalidArgument(f"click stream has {clicks.m} modes, cascade spec has {spec.m}")
    table = configurations(n, spec.m)
    n_fired = clicks.fired.sum(axis=(1, 2))
    if np.any(n_fired[clicks.trigger] > n):
        bad = int(np.flatnonzero(clicks.trigger & (n_fired > n))[0])
        raise InconsistencyError(f"record {bad} fired {int(n_fired[bad])} ports for an {n}-photon experiment")
    keep = clicks.trigger & (n_fired == n)
    counts = np.zeros(len(table))
    kept = int(keep.sum())
    if kept == 0:
        warnings.warn("no records survived postselection", RuntimeWarning, stacklevel=2)
        return EventSample(n, spec.m, counts)
    fired = clicks.fired[keep]
    occ = fired.sum(axis=2)
    res = np.array([spec.resolution_probability(t) for t in range(n + 1)])
    resolution = np.prod(res[occ], axis=1)
    log_eta = np.where(fired, np.log(np.where(spec.port_efficiencies > 0, spec.port_efficiencies, 1.0)), 0.0)
    efficiency = np.exp(log_eta.sum(axis=(1, 2)))
    weights = 1.0 / (resolution * efficiency)
    radix = (n + 1) ** np.arange(spec.m)
    key_of_config = {int(k): i for i, k in enumerate(table.occupations @ radix)}
    idx = np.array([key_of_config[int(k)] for k in occ @ radix], dtype=np.int64)
    counts = np.bincount(idx, weights=weights, minlength=len(table))
    counts *= kept / counts.sum()
    return EventSample(n, spec.m, counts)
