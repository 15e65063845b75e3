import csv
import io
import json

import pytest

from helpers import mirrored_corpus
from verigauge.report.cli import main

SCENARIO = {
    "seed": 5,
    "groups": [
        {"group_label": "A", "n_subjects": 15, "images_per_subject": 3, "genuine_mean": 2.5},
        {"group_label": "B", "n_subjects": 15, "images_per_subject": 3, "genuine_mean": 1.5},
    ],
}


@pytest.fixture
def corpus(tmp_path):
    (tmp_path / "scenario.json").write_text(json.dumps(SCENARIO))
    assert main(["simulate", "--config", str(tmp_path / "scenario.json"), "--out", str(tmp_path / "data")]) == 0
    return tmp_path / "data"


def test_simulate_writes_corpus(corpus):
    assert {p.name for p in corpus.iterdir()} == {"metadata.csv", "scores.csv", "audit_config.json"}
    cfg = json.loads((corpus / "audit_config.json").read_text())
    assert cfg["yoking"] == [["race"]] and cfg["scores"] == "scores.csv"


def test_audit_then_plot(corpus, tmp_path):
    out = tmp_path / "run"
    assert main(["audit", "--config", str(corpus / "audit_config.json"), "--out", str(out), "--far", "1e-2"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert {r["group"] for r in report["results"]} == {"<all>", "A", "B"}
    names = sorted(p.name for p in (out / "plots").iterdir())
    assert "roc__race__~3c~all~3e~.svg" in names and "hist__race__A.svg" in names
    assert (out / "curves" / "index.csv").exists()
    assert main(["plot", "--input", str(out / "curves"), "--out", str(tmp_path / "replot")]) == 0
    for name in names:
        assert (out / "plots" / name).read_bytes() == (tmp_path / "replot" / name).read_bytes()


def test_csv_bundle(corpus, tmp_path):
    out = tmp_path / "run"
    assert main(["audit", "--config", str(corpus / "audit_config.json"), "--out", str(out), "--format", "csv"]) == 0
    assert (out / "manifest.json").exists() and (out / "operating_points.csv").exists()


def test_thresholds(corpus, capsys):
    assert main(["thresholds", "--config", str(corpus / "audit_config.json"), "--far", "1e-2,1e-1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2 * 2
    assert {(r["group"], r["far_target"]) for r in rows} == {("A", "0.01"), ("A", "0.10000000000000001"),
                                                            ("B", "0.01"), ("B", "0.10000000000000001")}
    assert all(r["resolved"] == "true" and float(r["achieved_far"]) <= float(r["far_target"]) for r in rows)


def test_thresholds_floor(corpus, capsys):
    assert main(["thresholds", "--config", str(corpus / "audit_config.json"), "--far", "1e-5"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert all(r["threshold"] == "+inf" and r["resolved"] == "false" for r in rows)


def test_partition(corpus, tmp_path):
    out = tmp_path / "tiers"
    assert main(["partition", "--config", str(corpus / "audit_config.json"), "--out", str(out)]) == 0
    tiers = list(csv.DictReader(open(out / "tiers.csv")))
    assert {t["tier"] for t in tiers} == {"good", "bad", "ugly"}
    summary = (out / "tier_summary.csv").read_text().splitlines()
    assert len(summary) > 1


def test_embeddings_kind(tmp_path):
    scenario = dict(SCENARIO)
    emb = {"dimension": 8, "center_dispersion": 1.0, "within_subject_sd": 0.5}
    scenario["groups"] = [{**g, "embedding_spec": emb} for g in SCENARIO["groups"]]
    (tmp_path / "s.json").write_text(json.dumps(scenario))
    assert main(["simulate", "--config", str(tmp_path / "s.json"), "--out", str(tmp_path / "d"),
                 "--kind", "embeddings", "--seed", "0x10"]) == 0
    assert (tmp_path / "d" / "embeddings.vge").exists()
    assert main(["audit", "--config", str(tmp_path / "d" / "audit_config.json"), "--out", str(tmp_path / "r"),
                 "--far", "0.1", "--metric", "dot"]) == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["config"]["metric"] == "dot"


def test_override_yoke_none(tmp_path):
    cfg = mirrored_corpus(tmp_path)
    out = tmp_path / "r"
    assert main(["audit", "--config", str(cfg), "--out", str(out), "--yoke", "race", "--yoke", "none"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert {r["policy"] for r in report["results"]} == {"race", "none"}


def test_missing_config(tmp_path, capsys):
    assert main(["audit", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_invalid_metadata(tmp_path, capsys):
    (tmp_path / "m.csv").write_text("image_id,subject_id,race\na,s,X\nb,s,Y\n")
    (tmp_path / "s.csv").write_text("probe_id,gallery_id,score\na,b,0.5\n")
    (tmp_path / "c.json").write_text(json.dumps({"metadata": "m.csv", "scores": "s.csv"}))
    assert main(["audit", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 1
    assert "AttributeConflict" in capsys.readouterr().err


def test_bad_override_value(corpus, tmp_path, capsys):
    assert main(["audit", "--config", str(corpus / "audit_config.json"), "--out", str(tmp_path / "o"),
                 "--far", "2"]) == 1


@pytest.mark.parametrize("argv", [["audit", "--bogus"], ["frobnicate"], [], ["simulate", "--config", "x"],
                                  ["audit", "--config", "c", "--out", "o", "--seed", "-1"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
