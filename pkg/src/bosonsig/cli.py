"""Command-line entry point.

Every subcommand writes its artifacts under ``--out-dir`` together with a
``<command>.manifest.json`` recording the resolved configuration, its hash,
input digests, the tool version, wall-clock time and output digests.
``bosonsig replay MANIFEST`` re-runs a manifest and checks the outputs match
byte for byte.

Exit codes: 0 success, 2 usage or configuration error, 3 data or format
error, 4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as bio
from .classify import (
    MODEL_KINDS,
    PAIRINGS,
    Ensemble,
    KNearest,
    LinearSVM,
    NearestCentroid,
    RandomForest,
    check_layout_for,
    error_probability,
    generate_cloud,
    importance_from_clouds,
    misassignment_curve,
    parse_ensemble,
    parse_grid,
    rank_trends,
    stack,
    transition_analysis,
    tune_k,
)
from .correlators import (
    FEATURE_NAMES,
    cdataset_estimate,
    cdataset_exact,
    covariance_sum_residual,
    mode_pairs,
    mode_subset_analysis,
    sample_size_scan,
    summary_statistics,
)
from .detection import (
    CascadeSpec,
    EventSample,
    bootstrap_resample,
    reconstruct_counts,
    route_through_cascade,
    sample_events,
)
from .errors import BosonSigError, FormatError, InconsistencyError, InvalidArgument
from .optics.distributions import (
    BetaMixture,
    DeltaMixture,
    Distinguishable,
    Grouping,
    Indistinguishable,
    configurations,
    distribution,
    total_variation_distance,
)
from .optics.unitaries import default_layout, haar_random_unitary, structured_random_unitary, validate_layout
from .seeding import derive_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

# arguments that never change results and stay out of the config hash
_RUNTIME_KEYS = ("out_dir", "jobs", "func", "manifest")


class _UsageError(Exception):
    pass


class Run:
    """Per-invocation bookkeeping for outputs, inputs and the manifest."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def input(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        if not p.is_file():
            raise FormatError(f"{path}: no such file")
        self.inputs[str(p.resolve())] = bio.file_digest(p)
        return p

    def path(self, name: str) -> Path:
        rel = Path(name)
        if rel.is_absolute() or ".." in rel.parts:
            raise _UsageError(f"output name {name!r} must be relative to --out-dir")
        p = self.out_dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        if name not in self.outputs:
            self.outputs.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        return bio.write_json(self.path(name), obj)

    def text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        return p

    def table(self, name: str, header, rows, plot: dict | None = None) -> None:
        rows = list(rows)
        self.text(name + ".csv", bio.rows_to_csv(header, rows))
        if self.args.format == "json":
            self.json(name + ".json", {"schema": bio.schema("table"), "columns": list(header), "rows": _plain(rows)})
        if plot is not None:
            self.json(name + ".plot.json", plot)

    def manifest(self, wall: float) -> Path:
        config = run_config(self.command, self.args)
        out = {
            "schema": bio.schema("manifest"),
            "tool": "bosonsig",
            "version": __version__,
            "command": self.command,
            "config": config,
            "config_hash": config_hash(config),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {name: bio.file_digest(self.out_dir / name) for name in self.outputs},
            "wall_clock_seconds": round(wall, 6),
        }
        return bio.write_json(self.out_dir / f"{self.command}.manifest.json", out)


def _plain(rows):
    return [[v.item() if isinstance(v, np.generic) else v for v in row] for row in rows]


def run_config(command: str, args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _RUNTIME_KEYS and k != "command"}
    return {"command": command, "schema_version": bio.SCHEMA_VERSION, **cfg}


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------- parsing helpers


def _modes(text: str) -> tuple[int, ...]:
    try:
        modes = tuple(sorted(int(x) for x in text.split(",") if x.strip()))
    except ValueError as exc:
        raise _UsageError(f"input modes {text!r} must be a comma list of integers") from exc
    if not modes:
        raise _UsageError("input state needs at least one photon")
    return modes


def _partition(text: str) -> tuple[tuple[int, ...], ...]:
    try:
        return tuple(tuple(int(x) for x in block.split(",")) for block in text.split("|"))
    except ValueError as exc:
        raise _UsageError(f"partition {text!r} must look like '1,3|2'") from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise _UsageError(f"{text!r} is not a comma list of numbers") from exc


def build_model(args, n: int):
    name = args.model.lower()
    if name in ("indistinguishable", "i"):
        return Indistinguishable()
    if name in ("distinguishable", "d"):
        return Distinguishable()
    if name == "grouping":
        if args.partition is None:
            raise _UsageError("--model grouping needs --partition")
        return Grouping(_partition(args.partition))
    if name == "delta":
        if args.delta is None:
            raise _UsageError("--model delta needs --delta")
        deltas = _floats(args.delta)
        if len(deltas) == 1:
            deltas = deltas * n
        return DeltaMixture(deltas)
    if name == "beta":
        if args.beta is None:
            raise _UsageError("--model beta needs --beta")
        part = _partition(args.partition) if args.partition else ((1, 3), (2,))
        return BetaMixture(float(args.beta), part)
    raise _UsageError(f"unknown model {args.model!r}")


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        try:
            n, m = (int(x) for x in item.lower().split("x"))
        except ValueError as exc:
            raise _UsageError(f"size {item!r} must look like '3x7'") from exc
        out.append((n, m))
    return out


def _ensemble(run: Run) -> Ensemble:
    args = run.args
    layout_json = None
    if getattr(args, "layout", None) not in (None, "default7"):
        layout_path = Path(args.layout)
        if not layout_path.is_file():
            raise _UsageError(f"layout file {args.layout!r} not found")
        run.input(layout_path)
        layout_json = layout_path.read_text()
        try:
            json.loads(layout_json)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"layout file {args.layout!r} is not JSON") from exc
    ens = parse_ensemble(args.ensemble, layout_json, getattr(args, "phase_mode", "step"))
    if args.vary_input is not None:
        ens = Ensemble(ens.kind, ens.layout, ens.layout_name, ens.phase_mode, args.vary_input == "yes")
    return ens


def _echo(*parts) -> None:
    print(*parts, flush=True)


# ---------------------------------------------------------------- commands


def cmd_gen_unitary(run: Run) -> None:
    a = run.args
    if a.m < 2:
        raise _UsageError(f"--m must be at least 2, got {a.m}")
    rng = derive_rng(a.seed, "gen-unitary")
    meta = {"ensemble": a.ensemble, "seed": a.seed}
    if a.ensemble == "haar":
        u = haar_random_unitary(a.m, rng)
    elif a.ensemble == "structured":
        if a.layout in (None, "default7"):
            layout = default_layout(a.m)
            meta["layout"] = "default7"
        else:
            run.input(a.layout)
            try:
                layout = json.loads(Path(a.layout).read_text())
            except json.JSONDecodeError as exc:
                raise _UsageError(f"layout file {a.layout!r} is not JSON") from exc
            meta["layout"] = layout
        layout = validate_layout(a.m, layout)
        u = structured_random_unitary(a.m, layout, rng, a.phase_mode)
        meta["phase_mode"] = a.phase_mode
    else:
        raise _UsageError(f"unknown ensemble {a.ensemble!r}")
    run.json(a.out, bio.unitary_to_dict(u, meta))
    _echo(f"{a.m}x{a.m} {a.ensemble} unitary written to {run.out_dir / a.out}")


def cmd_simulate(run: Run) -> None:
    a = run.args
    run.input(a.unitary)
    u = bio.unitary_from_dict(bio.read_json(a.unitary), a.unitary)
    modes = _modes(a.input)
    model = build_model(a, len(modes))
    dist = distribution(u, modes, model)
    table = configurations(dist.n, dist.m)
    residual = abs(float(dist.probs.sum()) - 1.0)
    _echo(f"{len(table)} configurations")
    _echo(f"normalization residual: {residual:.3e}")
    _echo(f"covariance sum residual: {abs(covariance_sum_residual(dist)):.3e}")
    doc = bio.distribution_to_dict(dist)
    if a.collision_free_only:
        cf = table.collision_free
        _echo(f"{int(cf.sum())} collision-free configurations, probability {dist.probs[cf].sum():.6f}")
        keys = {k for k, free in zip(dist.to_dict(drop_zeros=False), cf) if free}
        doc["probabilities"] = {k: v for k, v in doc["probabilities"].items() if k in keys}
        doc["collision_free_only"] = True
    run.json(a.out, doc)


def cmd_sample(run: Run) -> None:
    a = run.args
    run.input(a.distribution)
    dist = bio.distribution_from_dict(bio.read_json(a.distribution), a.distribution)
    events = sample_events(dist, a.count, derive_rng(a.seed, "sample"))
    out = a.out or ("events.csv" if a.format == "csv" else "events.json")
    bio.write_events(run.path(out), events)
    _echo(f"{int(events.total)} events over {int(np.count_nonzero(events.counts))} configurations")


def _read_events(run: Run, path: str, m: int | None) -> EventSample:
    run.input(path)
    return bio.read_events(path, m)


def cmd_cascade(run: Run) -> None:
    a = run.args
    events = _read_events(run, a.events, a.m)
    eta = None
    if a.eta is not None:
        try:
            eta = float(a.eta)
        except ValueError:
            run.input(a.eta)
            eta = bio.read_json(a.eta)
    spec = CascadeSpec(events.m, a.r1, a.r2, eta, a.trigger_efficiency)
    _echo(f"cascade: r1={spec.first_layer_reflectivity:.2f}, r2={spec.second_layer_reflectivity:.2f}, "
          f"ports {np.array2string(spec.port_probabilities(), precision=4)}")
    clicks = route_through_cascade(events, spec, derive_rng(a.seed, "cascade"))
    run.json(a.spec_out, bio.cascade_to_dict(spec))
    run.text(a.out, bio.clicks_to_ndjson(clicks))
    triggered = int(clicks.trigger.sum())
    if triggered == 0:
        warnings.warn("zero postselected events: no record passed the trigger", RuntimeWarning, stacklevel=1)
    _echo(f"{len(clicks)} records, {triggered} triggered")


def cmd_reconstruct(run: Run) -> None:
    a = run.args
    run.input(a.clicks)
    run.input(a.cascade)
    spec = bio.cascade_from_dict(bio.read_json(a.cascade), a.cascade)
    clicks = bio.clicks_from_ndjson(Path(a.clicks).read_text(), spec.m, a.clicks)
    events = reconstruct_counts(clicks, spec, a.n)
    out = a.out or ("corrected.csv" if a.format == "csv" else "corrected.json")
    bio.write_events(run.path(out), events)
    _echo(f"{int(round(events.total))} postselected {a.n}-photon events")


def cmd_analyze(run: Run) -> None:
    a = run.args
    if (a.events is None) == (a.distribution is None):
        raise _UsageError("give exactly one of --events and --distribution")
    events = None
    if a.events is not None:
        events = _read_events(run, a.events, a.m)
        c = cdataset_estimate(events)
        probs = events.frequencies()
        n, m = events.n, events.m
    else:
        run.input(a.distribution)
        dist = bio.distribution_from_dict(bio.read_json(a.distribution), a.distribution)
        c = cdataset_exact(dist)
        probs = dist.probs
        n, m = dist.n, dist.m
    feats = summary_statistics(c)
    _echo(f"{len(mode_pairs(m))} correlators")
    _echo(f"NM = {feats.nm:.6f}, CV = {feats.cv:.6f}")
    if feats.degenerate:
        _echo(f"degenerate statistics: {', '.join(sorted(feats.degenerate))}")
    run.json("cdataset.json", bio.cdataset_to_dict(c))
    run.json("features.json", bio.features_to_dict(feats))
    if a.against is not None:
        run.input(a.against)
        ref = bio.distribution_from_dict(bio.read_json(a.against), a.against)
        if (ref.n, ref.m) != (n, m):
            raise FormatError("--against distribution has a different (n, m)")
        tvd = total_variation_distance(probs, ref.probs)
        _echo(f"TVD = {tvd:.6f}")
        run.json("tvd.json", {"schema": bio.schema("tvd"), "tvd": tvd})
    if a.bootstrap:
        if events is None:
            raise _UsageError("--bootstrap needs --events")
        reps = bootstrap_resample(events, a.bootstrap, derive_rng(a.seed, "bootstrap"))
        vals = np.array([summary_statistics(cdataset_estimate(r)).as_array() for r in reps])
        rows = [(name, float(feats.as_array()[i]), float(vals[:, i].mean()), float(vals[:, i].std()))
                for i, name in enumerate(FEATURE_NAMES)]
        run.table("bootstrap", ["statistic", "value", "bootstrap_mean", "bootstrap_std"], rows)
        _echo(f"NM = {feats.nm:.4f} +- {vals[:, 0].std():.4f}, CV = {feats.cv:.4f} +- {vals[:, 1].std():.4f}"
              f" ({a.bootstrap} bootstrap replicates)")
    if a.subset_scan:
        if events is None:
            raise _UsageError("--subset-scan needs --events")
        sizes = [int(x) for x in a.subset_scan.split(",")]
        res = mode_subset_analysis(events, sizes)
        rows = [(len(s), ".".join(str(x) for x in s), nm, cv) for s, (nm, cv) in res.points.items()]
        run.table("subset_scan", ["size", "subset", "nm", "cv"], rows,
                  bio.plot_manifest("subset_scan.csv", "scatter", "nm", "cv", "Mode-subset NM-CV points",
                                    group="size"))
        if res.excluded:
            _echo(f"{len(res.excluded)} subsets had no surviving events and were excluded")
    if a.size_scan:
        try:
            step, extractions = (int(x) for x in a.size_scan.lower().split("x"))
        except ValueError as exc:
            raise _UsageError("--size-scan must look like 200x300") from exc
        if events is None:
            raise _UsageError("--size-scan needs --events")
        scan = sample_size_scan(events, step, extractions, derive_rng(a.seed, "size-scan"))
        rows = [(r.size, r.mean_nm, r.mean_cv, r.std_nm, r.std_cv) for r in scan]
        run.table("size_scan", ["size", "mean_nm", "mean_cv", "std_nm", "std_cv"], rows,
                  bio.plot_manifest("size_scan.csv", "ellipses", "mean_nm", "mean_cv",
                                    "Sample-size scan", width="std_nm", height="std_cv"))


def cmd_cloud(run: Run) -> None:
    a = run.args
    ens = _ensemble(run)
    check_layout_for(ens, a.m)
    modes = _modes(a.input)
    if max(modes) > a.m:
        raise _UsageError(f"input modes {modes} exceed m={a.m}")
    model = build_model(a, len(modes))
    cloud = generate_cloud(ens, model, modes, a.m, a.count, a.seed, label=a.label, stream=a.stream, jobs=a.jobs)
    if a.format == "csv":
        rows = [tuple(row) for row in cloud.points.tolist()]
        run.text(a.out.rsplit(".", 1)[0] + ".csv", bio.rows_to_csv(list(cloud.feature_names), rows))
    run.json(a.out, bio.cloud_to_dict(cloud))
    c = cloud.centroid()
    _echo(f"cloud {cloud.label!r}: {len(cloud)} points, {ens.tag}, centroid NM = {c[0]:.4f}, CV = {c[1]:.4f}")


def _load_clouds(run: Run, paths):
    out = []
    for p in paths:
        run.input(p)
        out.append(bio.cloud_from_dict(bio.read_json(p), p))
    return out


def cmd_classify(run: Run) -> None:
    a = run.args
    train = _load_clouds(run, a.train)
    test = _load_clouds(run, a.test or [])
    features = tuple(a.features.split(",")) if a.features else (
        FEATURE_NAMES if a.method == "rf" else ("nm", "cv"))
    if a.method == "centroid":
        model = NearestCentroid.fit_clouds(train, features)
    elif a.method == "knn":
        k = a.k
        if k == "auto":
            if not a.validate:
                raise _UsageError("--k auto needs --validate clouds")
            val = _load_clouds(run, a.validate)
            Xt, yt = stack(train, features)
            Xv, yv = stack(val, features)
            k, scan = tune_k(Xt, yt, Xv, yv, features)
            run.table("k_scan", ["k", "validation_error"], scan,
                      bio.plot_manifest("k_scan.csv", "line", "k", "validation_error", "k-NN validation scan"))
            _echo(f"tuned k = {k}")
        model = KNearest.fit_clouds(train, features, k=int(k))
    elif a.method == "svm":
        model = LinearSVM.fit_clouds(train, features, C=a.C, epochs=a.epochs, seed=a.seed)
    elif a.method == "rf":
        model = RandomForest.fit_clouds(train, features, trees=a.trees, bag_fraction=a.bag_fraction,
                                        max_features=a.features_per_split, seed=a.seed)
        _echo(f"out-of-bag error = {model.oob_error:.4f}")
    else:
        raise _UsageError(f"unknown method {a.method!r}")
    run.json(a.out, bio.model_to_dict(model))
    if not test:
        return
    rows = []
    rates = {}
    for ci, cloud in enumerate(test):
        pred = model.predict_cloud(cloud)
        rates[cloud.label] = float(np.mean(pred != cloud.label))
        rows.extend((ci, cloud.label, i, p) for i, p in enumerate(pred.tolist()))
    run.table("assignments", ["cloud", "label", "index", "assigned"], rows)
    for label, r in rates.items():
        _echo(f"misassignment rate for {label}: {r:.4f}")
    by_label = {c.label: c for c in test}
    if "I" in by_label and "D" in by_label:
        p_err = error_probability(model, by_label["I"], by_label["D"])
        _echo(f"P_err = {p_err:.4f}")
        run.json("evaluation.json", {"schema": bio.schema("evaluation"), "p_err": p_err, "rates": rates})
    else:
        run.json("evaluation.json", {"schema": bio.schema("evaluation"), "rates": rates})


def cmd_importance(run: Run) -> None:
    a = run.args
    ens = _ensemble(run)
    sizes = _sizes(a.sizes)
    rows = []
    per_size = []
    for n, m in sizes:
        modes = tuple(range(1, n + 1))
        clouds = [
            generate_cloud(ens, Indistinguishable(), modes, m, a.cloud_size, a.seed, label="I", jobs=a.jobs),
            generate_cloud(ens, Distinguishable(), modes, m, a.cloud_size, a.seed, label="D", jobs=a.jobs),
        ]
        res = importance_from_clouds(clouds, a.extractions, a.train_size, a.seed, a.trees, a.features_per_split)
        per_size.append(res.mean)
        for rank, (name, score) in enumerate(res.ranking(), start=1):
            rows.append((f"{n}x{m}", rank, name, score, float(res.std[res.features.index(name)])))
        top = ", ".join(f"{name}={score:.3f}" for name, score in res.ranking()[:3])
        _echo(f"({n},{m}) top features: {top}")
    run.table("importance", ["size", "rank", "statistic", "mdi", "mdi_std"], rows,
              bio.plot_manifest("importance.csv", "bar", "statistic", "mdi", "Mean decrease in impurity",
                                group="size", error="mdi_std"))
    if len(per_size) > 1:
        trends = rank_trends(per_size)
        _echo(f"NM importance rank non-increasing: {trends['nm_non_increasing']}; "
              f"CV non-decreasing: {trends['cv_non_decreasing']}")


def cmd_transition(run: Run) -> None:
    a = run.args
    ens = _ensemble(run)
    deltas = parse_grid(a.delta_grid)
    rows, _ = transition_analysis(ens, _modes(a.input), a.m, deltas, a.count, a.seed, a.bins)
    run.table("transition", ["delta", "centroid_nm", "centroid_cv", "tvd", "similarity"],
              [(r.delta, r.nm, r.cv, r.tvd, r.similarity) for r in rows],
              bio.plot_manifest("transition.csv", "line", "delta", ["tvd", "similarity"],
                                "Overlap with the distinguishable cloud"))
    _echo(f"TVD at delta={rows[0].delta:g}: {rows[0].tvd:.4f}; at delta={rows[-1].delta:g}: {rows[-1].tvd:.4f}")


def cmd_misassignment(run: Run) -> None:
    a = run.args
    betas = parse_grid(a.beta_grid)
    names = [p.strip() for p in a.pairings.split(",")]
    rows = []
    for name in names:
        if name not in PAIRINGS:
            raise _UsageError(f"unknown pairing {name!r}; choose from {', '.join(PAIRINGS)}")
        sample_kind, train_kind = PAIRINGS[name]
        curve = misassignment_curve(
            Ensemble(sample_kind), Ensemble(train_kind), betas, a.seed, _modes(a.input), a.m,
            a.training_sets, a.training_size, a.samples, _partition(a.partition), pairing=name,
        )
        rows.extend((r.pairing, r.beta, 1.0 - r.beta, r.p_to_i, r.spread) for r in curve)
        end = min(curve, key=lambda r: r.beta)
        _echo(f"{name}: P(P->I) at beta={end.beta:g} is {end.p_to_i:.4f}")
    run.table("misassignment", ["pairing", "beta", "one_minus_beta", "p_to_i", "std"], rows,
              bio.plot_manifest("misassignment.csv", "line", "one_minus_beta", "p_to_i",
                                "Assignment to the indistinguishable hypothesis", group="pairing"))


def cmd_replay(run: Run) -> None:
    raise AssertionError("replay is dispatched before a Run is created")


COMMANDS = {
    "gen-unitary": cmd_gen_unitary,
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "cascade": cmd_cascade,
    "reconstruct": cmd_reconstruct,
    "analyze": cmd_analyze,
    "cloud": cmd_cloud,
    "classify": cmd_classify,
    "importance": cmd_importance,
    "transition": cmd_transition,
    "misassignment": cmd_misassignment,
}


# ---------------------------------------------------------------- parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    p.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default .)")
    p.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS,
                   help="preferred format for tabular and event output (default json)")
    return p


_GLOBAL_DEFAULTS = {"seed": 0, "jobs": 1, "out_dir": ".", "format": "json"}


def _model_args(p: argparse.ArgumentParser, default: str = "indistinguishable") -> None:
    p.add_argument("--model", default=default,
                   help="indistinguishable | distinguishable | grouping | delta | beta")
    p.add_argument("--partition", help="photon groups for grouping/beta, e.g. '1,3|2'")
    p.add_argument("--delta", help="one delta for all photons or one per photon")
    p.add_argument("--beta", type=float)


def _ensemble_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ensemble", default="haar", help="haar | structured[:default7] | identity")
    p.add_argument("--layout", help="JSON layout file for a structured ensemble")
    p.add_argument("--phase-mode", choices=("step", "coupler"), default="step")
    p.add_argument("--vary-input", choices=("yes", "no"),
                   help="draw a random input per matrix (structured default: yes)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="bosonsig", description=__doc__.split("\n\n")[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"bosonsig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-unitary", parents=[common], help="draw a random unitary")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--ensemble", choices=("haar", "structured"), default="haar")
    p.add_argument("--layout", help="'default7' or a JSON layout file")
    p.add_argument("--phase-mode", choices=("step", "coupler"), default="step")
    p.add_argument("--out", default="unitary.json")

    p = sub.add_parser("simulate", parents=[common], help="exact output distribution")
    p.add_argument("--unitary", required=True)
    p.add_argument("--input", default="1,2,3", help="1-based input modes")
    _model_args(p)
    p.add_argument("--collision-free-only", action="store_true")
    p.add_argument("--out", default="distribution.json")

    p = sub.add_parser("sample", parents=[common], help="draw events from a distribution")
    p.add_argument("--distribution", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("cascade", parents=[common], help="route events through the detector cascade")
    p.add_argument("--events", required=True)
    p.add_argument("--m", type=int, help="mode count (needed for CSV events)")
    p.add_argument("--r1", type=float, default=0.66)
    p.add_argument("--r2", type=float, default=0.50)
    p.add_argument("--eta", help="one efficiency for every port, or a JSON (m x 3) file")
    p.add_argument("--trigger-efficiency", type=float, default=1.0)
    p.add_argument("--out", default="clicks.ndjson")
    p.add_argument("--spec-out", default="cascade.json")

    p = sub.add_parser("reconstruct", parents=[common], help="postselect and correct click records")
    p.add_argument("--clicks", required=True)
    p.add_argument("--cascade", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("analyze", parents=[common], help="C-dataset, statistics and resource scans")
    p.add_argument("--events")
    p.add_argument("--distribution")
    p.add_argument("--m", type=int)
    p.add_argument("--against", help="distribution to compute the TVD against")
    p.add_argument("--bootstrap", type=int, default=0, metavar="R")
    p.add_argument("--subset-scan", help="subset sizes, e.g. 4,5,6")
    p.add_argument("--size-scan", help="STEPxEXTRACTIONS, e.g. 200x300")

    p = sub.add_parser("cloud", parents=[common], help="statistics over an ensemble of unitaries")
    _ensemble_args(p)
    _model_args(p)
    p.add_argument("--m", type=int, default=7)
    p.add_argument("--input", default="1,2,3")
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--label")
    p.add_argument("--stream", default="", help="independent unitary stream name")
    p.add_argument("--out", default="cloud.json")

    p = sub.add_parser("classify", parents=[common], help="train and evaluate a classifier")
    p.add_argument("--method", choices=sorted(MODEL_KINDS), required=True)
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--test", nargs="*")
    p.add_argument("--validate", nargs="*")
    p.add_argument("--features", help="comma list of statistics (default nm,cv; all ten for rf)")
    p.add_argument("--k", default="auto", help="odd k or 'auto'")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--bag-fraction", type=float, default=0.63)
    p.add_argument("--features-per-split", type=int, default=3)
    p.add_argument("--out", default="model.json")

    p = sub.add_parser("importance", parents=[common], help="random-forest MDI ranking")
    _ensemble_args(p)
    p.add_argument("--sizes", default="3x7", help="comma list of NxM, e.g. 2x5,3x7,4x9")
    p.add_argument("--cloud-size", type=int, default=10000)
    p.add_argument("--extractions", type=int, default=200)
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--features-per-split", type=int, default=3)

    p = sub.add_parser("transition", parents=[common], help="indistinguishable-to-distinguishable sweep")
    _ensemble_args(p)
    p.add_argument("--m", type=int, default=7)
    p.add_argument("--input", default="1,2,3")
    p.add_argument("--delta-grid", default="0:1:0.1")
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--bins", type=int, default=60)

    p = sub.add_parser("misassignment", parents=[common], help="assignment under partial distinguishability")
    p.add_argument("--m", type=int, default=7)
    p.add_argument("--input", default="1,2,3")
    p.add_argument("--beta-grid", default="0:1:0.1")
    p.add_argument("--pairings", default=",".join(PAIRINGS))
    p.add_argument("--training-sets", type=int, default=100)
    p.add_argument("--training-size", type=int, default=1000)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--partition", default="1,3|2")

    p = sub.add_parser("replay", parents=[common], help="re-run a manifest and compare outputs")
    p.add_argument("manifest")
    return parser


# ---------------------------------------------------------------- entry


def _absolutize(args: argparse.Namespace) -> None:
    for key in ("unitary", "distribution", "events", "clicks", "cascade", "against", "layout", "eta"):
        val = getattr(args, key, None)
        if isinstance(val, str) and Path(val).is_file():
            setattr(args, key, str(Path(val).resolve()))
    for key in ("train", "test", "validate"):
        val = getattr(args, key, None)
        if val:
            setattr(args, key, [str(Path(v).resolve()) for v in val])


def execute(command: str, args: argparse.Namespace) -> Run:
    run = Run(command, args)
    start = time.perf_counter()
    COMMANDS[command](run)
    run.manifest(time.perf_counter() - start)
    return run


def replay(args: argparse.Namespace) -> int:
    data = bio.read_json(args.manifest, "manifest")
    config = dict(data["config"])
    if config_hash(config) != data["config_hash"]:
        raise FormatError(f"{args.manifest}: config does not match its hash")
    for path, digest in data["inputs"].items():
        if not Path(path).is_file() or bio.file_digest(path) != digest:
            raise FormatError(f"input {path} is missing or has changed since the recorded run")
    command = config.pop("command")
    config.pop("schema_version", None)
    if args.out_dir == ".":
        args.out_dir = tempfile.mkdtemp(prefix="bosonsig-replay-")
    ns = argparse.Namespace(**config, out_dir=args.out_dir, jobs=args.jobs)
    run = execute(command, ns)
    bad = [name for name, digest in data["outputs"].items()
           if bio.file_digest(run.out_dir / name) != digest]
    if bad:
        raise InconsistencyError(f"replay differs in: {', '.join(bad)}")
    _echo(f"replayed {command} into {run.out_dir}: {len(data['outputs'])} outputs identical")
    return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    for key, value in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    command = args.command
    del args.command
    warnings.showwarning = _show_warning
    try:
        if args.jobs < 1:
            raise _UsageError("--jobs must be at least 1")
        if command == "replay":
            return replay(args)
        _absolutize(args)
        execute(command, args)
    except (_UsageError, InvalidArgument) as exc:
        print(f"bosonsig {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"bosonsig {command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InconsistencyError, AssertionError) as exc:
        print(f"bosonsig {command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except BosonSigError as exc:
        print(f"bosonsig {command}: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
