import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bosonsig import io as bio
from bosonsig.cli import main
from bosonsig.optics import total_variation_distance


@pytest.fixture
def cli(capsys):
    def run(*argv):
        code = main([str(a) for a in argv])
        out = capsys.readouterr()
        return code, out.out, out.err

    return run


@pytest.fixture
def unitary(tmp_path, cli):
    code, _, _ = cli("gen-unitary", "--m", 7, "--seed", 42, "--out-dir", tmp_path)
    assert code == 0
    return tmp_path / "unitary.json"


# ------------------------------------------------------------------ gen-unitary


def test_gen_unitary_deterministic(tmp_path, cli):
    for sub in ("a", "b"):
        assert cli("gen-unitary", "--m", 7, "--ensemble", "haar", "--seed", 42, "--out-dir", tmp_path / sub)[0] == 0
    assert (tmp_path / "a/unitary.json").read_bytes() == (tmp_path / "b/unitary.json").read_bytes()
    manifest = json.loads((tmp_path / "a/gen-unitary.manifest.json").read_text())
    assert manifest["outputs"]["unitary.json"] == bio.file_digest(tmp_path / "a/unitary.json")
    assert manifest["config"]["seed"] == 42


def test_gen_unitary_structured(tmp_path, cli):
    code, _, _ = cli("--seed", 3, "gen-unitary", "--m", 7, "--ensemble", "structured", "--layout", "default7",
                     "--out-dir", tmp_path)
    assert code == 0
    bio.unitary_from_dict(bio.read_json(tmp_path / "unitary.json"))  # unitarity checked on read


def test_gen_unitary_errors(tmp_path, cli):
    code, _, err = cli("gen-unitary", "--m", 1, "--out-dir", tmp_path)
    assert code == 2 and "m" in err
    bad = tmp_path / "layout.json"
    bad.write_text("[[[1,2],[2,3]]]")
    assert cli("gen-unitary", "--m", 7, "--ensemble", "structured", "--layout", bad, "--out-dir", tmp_path)[0] == 2
    bad.write_text("not json")
    assert cli("gen-unitary", "--m", 7, "--ensemble", "structured", "--layout", bad, "--out-dir", tmp_path)[0] == 2


def test_unknown_subcommand_and_flags(cli):
    assert cli("frobnicate")[0] == 2
    assert cli("gen-unitary")[0] == 2


# ------------------------------------------------------------------ simulate


def test_simulate_counts(tmp_path, cli, unitary):
    code, out, _ = cli("simulate", "--unitary", unitary, "--input", "1,2,3", "--out-dir", tmp_path)
    assert code == 0
    assert "84 configurations" in out
    code, out, _ = cli("simulate", "--unitary", unitary, "--collision-free-only", "--out", "cf.json",
                       "--out-dir", tmp_path)
    assert "35 collision-free configurations" in out
    doc = bio.read_json(tmp_path / "cf.json")
    assert len(doc["probabilities"]) <= 35


def test_simulate_delta_one_matches_indistinguishable(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--model", "indistinguishable", "--out", "i.json", "--out-dir", tmp_path)
    cli("simulate", "--unitary", unitary, "--model", "delta", "--delta", "1.0", "--out", "d.json", "--out-dir", tmp_path)
    assert (tmp_path / "i.json").read_bytes() == (tmp_path / "d.json").read_bytes()


@pytest.mark.parametrize("extra", [
    ["--model", "delta", "--delta", "1.5"],
    ["--model", "beta", "--beta", "-0.2"],
    ["--model", "grouping", "--partition", "1,2"],
    ["--model", "grouping"],
    ["--model", "banana"],
    ["--input", "1,2,9"],
])
def test_simulate_bad_models(tmp_path, cli, unitary, extra):
    assert cli("simulate", "--unitary", unitary, *extra, "--out-dir", tmp_path)[0] == 2


def test_data_errors_exit_3(tmp_path, cli):
    bad = tmp_path / "u.json"
    bad.write_text("{}")
    assert cli("simulate", "--unitary", bad, "--out-dir", tmp_path)[0] == 3
    bad.write_text("garbage")
    assert cli("simulate", "--unitary", bad, "--out-dir", tmp_path)[0] == 3
    assert cli("simulate", "--unitary", tmp_path / "missing.json", "--out-dir", tmp_path)[0] == 3


# ------------------------------------------------------------------ detection pipeline


def test_pipeline_round_trip(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path)
    assert cli("sample", "--distribution", tmp_path / "distribution.json", "--count", 100_000,
               "--out-dir", tmp_path)[0] == 0
    code, out, _ = cli("cascade", "--events", tmp_path / "events.json", "--out-dir", tmp_path)
    assert code == 0
    assert "r1=0.66, r2=0.50" in out
    assert bio.read_json(tmp_path / "cascade.json")["first_layer_reflectivity"] == 0.66
    code, out, _ = cli("reconstruct", "--clicks", tmp_path / "clicks.ndjson", "--cascade", tmp_path / "cascade.json",
                       "--n", 3, "--out-dir", tmp_path)
    assert code == 0
    sample = bio.read_events(tmp_path / "events.json")
    corrected = bio.read_events(tmp_path / "corrected.json")
    dist = bio.distribution_from_dict(bio.read_json(tmp_path / "distribution.json"))
    rng = np.random.default_rng(0)
    noise = np.mean([total_variation_distance(rng.multinomial(100_000, dist.probs) / 100_000, dist.probs)
                     for _ in range(100)])
    assert total_variation_distance(corrected, sample) < 1.5 * noise


def test_csv_events_pipeline(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path)
    cli("--format", "csv", "sample", "--distribution", tmp_path / "distribution.json", "--count", 500,
        "--out-dir", tmp_path)
    assert (tmp_path / "events.csv").read_text().startswith("config,count\n")
    assert cli("cascade", "--events", tmp_path / "events.csv", "--out-dir", tmp_path)[0] == 2  # needs --m
    assert cli("cascade", "--events", tmp_path / "events.csv", "--m", 7, "--out-dir", tmp_path)[0] == 0


def test_zero_trigger_efficiency(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path)
    cli("sample", "--distribution", tmp_path / "distribution.json", "--count", 200, "--out-dir", tmp_path)
    code, _, err = cli("cascade", "--events", tmp_path / "events.json", "--trigger-efficiency", 0, "--out-dir", tmp_path)
    assert code == 0 and "warning" in err
    code, out, err = cli("reconstruct", "--clicks", tmp_path / "clicks.ndjson", "--cascade", tmp_path / "cascade.json",
                         "--n", 3, "--out-dir", tmp_path)
    assert code == 0
    assert "warning" in err
    assert "0 postselected" in out


def test_inconsistent_clicks_exit_4(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path)
    cli("sample", "--distribution", tmp_path / "distribution.json", "--count", 50, "--out-dir", tmp_path)
    cli("cascade", "--events", tmp_path / "events.json", "--out-dir", tmp_path)
    code, _, err = cli("reconstruct", "--clicks", tmp_path / "clicks.ndjson", "--cascade", tmp_path / "cascade.json",
                       "--n", 2, "--out-dir", tmp_path)
    assert code == 4 and "internal" in err


# ------------------------------------------------------------------ analyze


def test_analyze(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path)
    cli("sample", "--distribution", tmp_path / "distribution.json", "--count", 2000, "--out-dir", tmp_path)
    code, out, _ = cli("analyze", "--events", tmp_path / "events.json", "--against", tmp_path / "distribution.json",
                       "--bootstrap", 20, "--subset-scan", "4,5,6", "--size-scan", "200x30", "--out-dir", tmp_path)
    assert code == 0
    assert "21 correlators" in out
    assert "TVD = " in out
    header, rows = bio.read_csv_rows(tmp_path / "size_scan.csv")
    assert header == ["size", "mean_nm", "mean_cv", "std_nm", "std_cv"]
    assert [int(r[0]) for r in rows] == list(range(200, 2001, 200))
    header, rows = bio.read_csv_rows(tmp_path / "subset_scan.csv")
    assert sum(1 for r in rows if r[0] == "5") == 21
    assert len(bio.read_json(tmp_path / "cdataset.json")["values"]) == 21
    assert bio.read_json(tmp_path / "subset_scan.plot.json")["kind"] == "scatter"


def test_analyze_usage_errors(tmp_path, cli, unitary):
    assert cli("analyze", "--out-dir", tmp_path)[0] == 2
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path)
    assert cli("analyze", "--distribution", tmp_path / "distribution.json", "--bootstrap", 3, "--out-dir", tmp_path)[0] == 2
    assert cli("analyze", "--distribution", tmp_path / "distribution.json", "--out-dir", tmp_path)[0] == 0


# ------------------------------------------------------------------ classification


@pytest.fixture
def cloud_files(tmp_path, cli):
    for label, model, stream in [("I", "i", "train"), ("D", "d", "train"), ("I", "i", "test"), ("D", "d", "test")]:
        code, _, _ = cli("cloud", "--model", model, "--count", 300, "--stream", stream, "--label", label,
                         "--out", f"{stream}_{label}.json", "--out-dir", tmp_path)
        assert code == 0
    return tmp_path


@pytest.mark.parametrize("method", ["centroid", "knn", "svm", "rf"])
def test_classify_accepts_same_clouds(cli, cloud_files, method):
    d = cloud_files
    extra = ["--k", "5"] if method == "knn" else []
    extra += ["--trees", "20"] if method == "rf" else []
    code, out, _ = cli("classify", "--method", method, "--train", d / "train_I.json", d / "train_D.json",
                       "--test", d / "test_I.json", d / "test_D.json", *extra, "--out-dir", d / method)
    assert code == 0
    p_err = bio.read_json(d / method / "evaluation.json")["p_err"]
    assert 0 <= p_err < 0.2
    assert bio.read_json(d / method / "model.json")["kind"] == method


def test_classify_knn_auto(cli, cloud_files):
    d = cloud_files
    assert cli("classify", "--method", "knn", "--train", d / "train_I.json", d / "train_D.json",
               "--out-dir", d / "k")[0] == 2
    code, out, _ = cli("classify", "--method", "knn", "--train", d / "train_I.json", d / "train_D.json",
                       "--validate", d / "test_I.json", d / "test_D.json", "--out-dir", d / "k")
    assert code == 0 and "tuned k" in out
    assert (d / "k/k_scan.csv").exists()


def test_cloud_csv_and_jobs(tmp_path, cli):
    cli("--format", "csv", "cloud", "--count", 60, "--out-dir", tmp_path / "a")
    cli("cloud", "--count", 60, "--jobs", 2, "--out-dir", tmp_path / "b")
    assert (tmp_path / "a/cloud.csv").exists()
    assert (tmp_path / "a/cloud.json").read_bytes() == (tmp_path / "b/cloud.json").read_bytes()


def test_importance_transition_misassignment(tmp_path, cli):
    code, out, _ = cli("importance", "--cloud-size", 400, "--extractions", 2, "--train-size", 200, "--trees", 10,
                       "--sizes", "2x5,3x7", "--out-dir", tmp_path)
    assert code == 0
    header, rows = bio.read_csv_rows(tmp_path / "importance.csv")
    assert header == ["size", "rank", "statistic", "mdi", "mdi_std"]
    assert len(rows) == 20
    code, out, _ = cli("transition", "--delta-grid", "0:1:0.025", "--count", 100, "--out-dir", tmp_path)
    assert code == 0
    _, rows = bio.read_csv_rows(tmp_path / "transition.csv")
    assert len(rows) == 41
    code, out, _ = cli("misassignment", "--beta-grid", "0,1", "--pairings", "haar/haar", "--training-sets", 2,
                       "--training-size", 200, "--samples", 100, "--out-dir", tmp_path)
    assert code == 0
    assert cli("misassignment", "--pairings", "haar/gauss", "--out-dir", tmp_path)[0] == 2
    assert cli("transition", "--delta-grid", "0:1.5:0.5", "--out-dir", tmp_path)[0] == 2


# ------------------------------------------------------------------ replay and entry point


def test_replay(tmp_path, cli, unitary):
    cli("simulate", "--unitary", unitary, "--out-dir", tmp_path / "run")
    manifest = tmp_path / "run/simulate.manifest.json"
    code, out, _ = cli("replay", manifest, "--out-dir", tmp_path / "again")
    assert code == 0 and "identical" in out
    assert (tmp_path / "again/distribution.json").read_bytes() == (tmp_path / "run/distribution.json").read_bytes()
    doc = json.loads(manifest.read_text())
    doc["outputs"]["distribution.json"] = "0" * 64
    manifest.write_text(json.dumps(doc))
    assert cli("replay", manifest, "--out-dir", tmp_path / "third")[0] == 4
    unitary.write_text(unitary.read_text().replace("1", "2", 1))
    assert cli("replay", manifest, "--out-dir", tmp_path / "fourth")[0] == 3


def test_console_entry_point(tmp_path):
    env = dict(os.environ)
    out = subprocess.run([sys.executable, "-m", "bosonsig.cli", "gen-unitary", "--m", "3", "--out-dir", str(tmp_path)],
                         capture_output=True, text=True, env=env)
    assert out.returncode == 0
    assert Path(tmp_path / "unitary.json").exists()
