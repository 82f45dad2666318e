"""File formats. Every JSON artifact carries a versioned ``schema`` field.

Writers are deterministic: the same object always serializes to the same
bytes, which is what run manifests rely on.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .classify import MODEL_KINDS, Cloud
from .correlators import FEATURE_NAMES, CDataset, FeatureVector
from .detection import PORTS_PER_MODE, CascadeSpec, ClickStream, EventSample, config_label, parse_config_label
from .errors import FormatError, InvalidArgument
from .optics.distributions import OutputDistribution, configurations
from .optics.unitaries import check_unitary

SCHEMA_VERSION = 1


def schema(kind: str) -> str:
    return f"bosonsig.{kind}/{SCHEMA_VERSION}"


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path: str | Path, kind: str | None = None) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"{path}: no such file") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if kind is not None:
        check_schema(data, kind, str(path))
    return data


def check_schema(data, kind: str, where: str = "input") -> None:
    if not isinstance(data, dict):
        raise FormatError(f"{where}: expected a JSON object")
    found = data.get("schema")
    if found != schema(kind):
        raise FormatError(f"{where}: schema {found!r}, expected {schema(kind)!r}")


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _field(data: dict, key: str, where: str):
    try:
        return data[key]
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {key!r}") from exc


# ---------------------------------------------------------------- unitaries


def unitary_to_dict(u: np.ndarray, meta: dict | None = None) -> dict:
    u = np.asarray(u, dtype=np.complex128)
    out = {"schema": schema("unitary"), "dim": int(u.shape[0]), "re": u.real.tolist(), "im": u.imag.tolist()}
    if meta:
        out["meta"] = meta
    return out


def unitary_from_dict(data: dict, where: str = "unitary") -> np.ndarray:
    check_schema(data, "unitary", where)
    try:
        dim = int(_field(data, "dim", where))
        u = np.asarray(_field(data, "re", where), dtype=np.float64) + 1j * np.asarray(
            _field(data, "im", where), dtype=np.float64
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: malformed matrix ({exc})") from exc
    if u.shape != (dim, dim):
        raise FormatError(f"{where}: matrix shape {u.shape} does not match dim {dim}")
    try:
        return check_unitary(u)
    except InvalidArgument as exc:
        raise FormatError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------- distributions


def distribution_to_dict(dist: OutputDistribution, meta: dict | None = None, drop_zeros: bool = True) -> dict:
    out = {
        "schema": schema("distribution"),
        "n": dist.n,
        "m": dist.m,
        "probabilities": dist.to_dict(drop_zeros=drop_zeros),
    }
    if meta:
        out["meta"] = meta
    return out


def distribution_from_dict(data: dict, where: str = "distribution") -> OutputDistribution:
    check_schema(data, "distribution", where)
    try:
        return OutputDistribution.from_dict(
            int(_field(data, "n", where)), int(_field(data, "m", where)), _field(data, "probabilities", where)
        )
    except (InvalidArgument, ValueError, TypeError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------- events


def _event_items(events: EventSample) -> list[tuple[str, float]]:
    labels = events.config_labels()
    return [(labels[i], float(c)) for i, c in enumerate(events.counts) if c != 0]


def _count_value(c: float):
    return int(c) if float(c).is_integer() else float(c)


def events_to_dict(events: EventSample) -> dict:
    return {
        "schema": schema("events"),
        "n": events.n,
        "m": events.m,
        "counts": {label: _count_value(c) for label, c in _event_items(events)},
    }


def events_from_dict(data: dict, where: str = "events") -> EventSample:
    check_schema(data, "events", where)
    n, m = int(_field(data, "n", where)), int(_field(data, "m", where))
    return _events_from_pairs(_field(data, "counts", where).items(), n, m, where)


def _events_from_pairs(pairs: Iterable[tuple[str, object]], n: int, m: int, where: str) -> EventSample:
    table = configurations(n, m)
    counts = np.zeros(len(table))
    for label, value in pairs:
        occ = parse_config_label(str(label), m)
        if sum(occ) != n:
            raise FormatError(f"{where}: configuration {label!r} does not hold {n} photons")
        try:
            c = float(value)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{where}: count {value!r} is not a number") from exc
        if not np.isfinite(c) or c < 0:
            raise FormatError(f"{where}: count {value!r} must be finite and non-negative")
        counts[table.index[occ]] += c
    return EventSample(n, m, counts)


def events_to_csv(events: EventSample) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config", "count"])
    for label, c in _event_items(events):
        w.writerow([label, repr(_count_value(c))])
    return buf.getvalue()


def events_from_csv(text: str, m: int, where: str = "events.csv") -> EventSample:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["config", "count"]:
        raise FormatError(f"{where}: header must be 'config,count'")
    body = [r for r in rows[1:] if r]
    if not body:
        raise FormatError(f"{where}: no events")
    if any(len(r) != 2 for r in body):
        raise FormatError(f"{where}: every row needs exactly two fields")
    n = sum(parse_config_label(body[0][0].strip(), m))
    return _events_from_pairs(((r[0].strip(), r[1].strip()) for r in body), n, m, where)


def read_events(path: str | Path, m: int | None = None) -> EventSample:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if m is None:
            raise InvalidArgument("reading events from CSV needs the mode count --m")
        try:
            text = path.read_text()
        except FileNotFoundError as exc:
            raise FormatError(f"{path}: no such file") from exc
        return events_from_csv(text, m, str(path))
    return events_from_dict(read_json(path), str(path))


def write_events(path: str | Path, events: EventSample) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        path.write_text(events_to_csv(events))
        return path
    return write_json(path, events_to_dict(events))


# ---------------------------------------------------------------- detection


def cascade_to_dict(spec: CascadeSpec) -> dict:
    return {"schema": schema("cascade"), **spec.to_dict()}


def cascade_from_dict(data: dict, where: str = "cascade") -> CascadeSpec:
    check_schema(data, "cascade", where)
    body = {k: v for k, v in data.items() if k != "schema"}
    try:
        return CascadeSpec.from_dict(body)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def clicks_to_ndjson(clicks: ClickStream) -> str:
    header = json.dumps({"schema": schema("clicks"), "m": clicks.m, "ports_per_mode": PORTS_PER_MODE})
    return header + "\n" + clicks.to_ndjson()


def clicks_from_ndjson(text: str, m: int | None = None, where: str = "clicks") -> ClickStream:
    lines = [line for line in text.splitlines() if line.strip()]
    if lines:
        try:
            first = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{where}: line 1 is not JSON") from exc
        if isinstance(first, dict) and "schema" in first:
            check_schema(first, "clicks", where)
            m = int(first["m"])
            lines = lines[1:]
    if m is None:
        raise FormatError(f"{where}: no header line and no mode count given")
    try:
        return ClickStream.from_ndjson("\n".join(lines), m)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------- statistics


def cdataset_to_dict(c: CDataset) -> dict:
    return {"schema": schema("cdataset"), "n": c.n, "m": c.m, "values": c.to_dict()}


def cdataset_from_dict(data: dict, where: str = "cdataset") -> CDataset:
    check_schema(data, "cdataset", where)
    return CDataset.from_dict(int(data["n"]), int(data["m"]), data["values"])


def features_to_dict(f: FeatureVector, meta: dict | None = None) -> dict:
    out = {"schema": schema("features"), **f.to_dict()}
    if meta:
        out["meta"] = meta
    return out


def features_from_dict(data: dict, where: str = "features") -> FeatureVector:
    check_schema(data, "features", where)
    try:
        return FeatureVector.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------- clouds and models


def cloud_to_dict(cloud: Cloud) -> dict:
    names = cloud.feature_names
    flagged = [[int(r), names[c]] for r, c in zip(*np.nonzero(cloud.degenerate))]
    return {
        "schema": schema("cloud"),
        "label": cloud.label,
        "ensemble": cloud.ensemble,
        "model": cloud.model,
        "n": cloud.n,
        "m": cloud.m,
        "seed": cloud.seed,
        "stream": cloud.stream,
        "count": len(cloud),
        "input": list(cloud.input) if cloud.input is not None else None,
        "points": [dict(zip(names, row)) for row in cloud.points.tolist()],
        "degenerate": flagged,
    }


def cloud_from_dict(data: dict, where: str = "cloud") -> Cloud:
    check_schema(data, "cloud", where)
    try:
        names = tuple(data["points"][0].keys()) if data["points"] else FEATURE_NAMES
        points = np.array([[p[k] for k in names] for p in data["points"]], dtype=np.float64)
        degenerate = np.zeros(points.shape, dtype=bool)
        for r, name in data.get("degenerate", []):
            degenerate[int(r), names.index(name)] = True
        return Cloud(
            label=str(data["label"]),
            ensemble=str(data["ensemble"]),
            n=int(data["n"]),
            m=int(data["m"]),
            seed=int(data["seed"]),
            points=points,
            degenerate=degenerate,
            model=str(data.get("model", "")),
            stream=str(data.get("stream", "")),
            input=tuple(data["input"]) if data.get("input") is not None else None,
            feature_names=names,
        )
    except (KeyError, IndexError, TypeError, ValueError, InvalidArgument) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def model_to_dict(model) -> dict:
    return {"schema": schema("model"), **model.to_dict()}


def model_from_dict(data: dict, where: str = "model"):
    check_schema(data, "model", where)
    kind = data.get("kind")
    if kind not in MODEL_KINDS:
        raise FormatError(f"{where}: unknown model kind {kind!r}")
    try:
        return MODEL_KINDS[kind].from_dict(data)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------- tabular output


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def read_csv_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    return rows[0], [r for r in rows[1:] if r]


def plot_manifest(data_file: str, kind: str, x: str, y: str | Sequence[str], title: str, **extra) -> dict:
    """Declarative description of a plot over a CSV; rendering is left to the reader."""
    return {
        "schema": schema("plot"),
        "data": data_file,
        "kind": kind,
        "x": x,
        "y": [y] if isinstance(y, str) else list(y),
        "title": title,
        **extra,
    }


__all__ = [
    "SCHEMA_VERSION",
    "cascade_from_dict",
    "cascade_to_dict",
    "cdataset_from_dict",
    "cdataset_to_dict",
    "check_schema",
    "clicks_from_ndjson",
    "clicks_to_ndjson",
    "cloud_from_dict",
    "cloud_to_dict",
    "config_label",
    "distribution_from_dict",
    "distribution_to_dict",
    "dumps",
    "events_from_csv",
    "events_from_dict",
    "events_to_csv",
    "events_to_dict",
    "features_from_dict",
    "features_to_dict",
    "file_digest",
    "model_from_dict",
    "model_to_dict",
    "plot_manifest",
    "read_csv_rows",
    "read_events",
    "read_json",
    "rows_to_csv",
    "schema",
    "unitary_from_dict",
    "unitary_to_dict",
    "write_events",
    "write_json",
]
