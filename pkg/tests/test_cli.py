"""CLI behavior: exit codes, report schema, config precedence, determinism."""

from __future__ import annotations

import json

import pytest

from linklab.cli import run_command
from linklab.dataset import load_dataset
from linklab.ingestion import save_dataset
from linklab.synth import generate_synthetic


@pytest.fixture(scope="module")
def dataset_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.json"
    ds = generate_synthetic(260, labels=4, noise=0.1, seed=5, links_per_issue=0.9)
    save_dataset(ds, path)
    return path


def run(argv, capsys):
    code = run_command([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_unknown_model_is_usage_error(self, dataset_file, capsys):
        code, _, err = run(["recover", "--data", dataset_file, "--model", "svm"], capsys)
        assert code == 2
        assert "invalid choice" in err

    def test_unknown_flag_is_usage_error(self, dataset_file, capsys):
        code, _, err = run(["stats", "--data", dataset_file, "--bogus"], capsys)
        assert code == 2
        assert "usage" in err

    def test_unknown_subcommand(self, capsys):
        code, _, _ = run(["frobnicate"], capsys)
        assert code == 2

    def test_missing_file_is_runtime_error(self, capsys):
        code, _, err = run(["stats", "--data", "/nonexistent/x.json"], capsys)
        assert code == 1
        assert "error:" in err


class TestStats:
    def test_json_payload(self, dataset_file, capsys):
        code, out, _ = run(["stats", "--data", dataset_file, "--format", "json"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["project"] == "SYNTH"
        assert 0.0 <= payload["linked_issue_ratio"] <= 1.0
        assert payload["labels"]
        fractions = sum(entry["fraction"] for entry in payload["labels"].values())
        assert fractions == pytest.approx(1.0)

    def test_directory_mode_reports_ratio_moments(self, tmp_path, capsys):
        for seed in range(3):
            ds = generate_synthetic(60, labels=3, noise=0.0, seed=seed, project=f"P{seed}")
            save_dataset(ds, tmp_path / f"p{seed}.json")
        code, out, _ = run(["stats", "--data", tmp_path], capsys)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["datasets"]) == 3
        assert "linked_issue_ratio_mean" in payload
        assert payload["linked_issue_ratio_std"] >= 0.0

    def test_csv_format(self, dataset_file, capsys):
        code, out, _ = run(["stats", "--data", dataset_file, "--format", "csv"], capsys)
        assert code == 0
        assert out.splitlines()[0] == "project,label,count,fraction"


class TestRecover:
    def test_report_schema(self, dataset_file, tmp_path, capsys):
        out_path = tmp_path / "report.json"
        code, _, _ = run(
            ["recover", "--data", dataset_file, "--encoder", "tfidf", "--meta",
             "--model", "zeror", "--seed", "7", "--out", out_path, "--no-timestamp"],
            capsys,
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert set(payload) >= {"weighted_f1", "per_label", "confusion", "config", "seed", "folds"}
        assert payload["seed"] == 7
        assert payload["config"]["cli"]["subcommand"] == "recover"
        assert len(payload["folds"]) == 5
        for stats in payload["per_label"].values():
            assert set(stats) == {"precision", "recall", "f1", "support"}
        cm = payload["confusion"]
        assert len(cm["counts"]) == len(cm["labels"])

    def test_byte_identical_reports_with_no_timestamp(self, dataset_file, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            code, _, _ = run(
                ["recover", "--data", dataset_file, "--encoder", "tfidf", "--model", "rf",
                 "--seed", "3", "--out", path, "--no-timestamp"],
                capsys,
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_timestamp_present_by_default(self, dataset_file, capsys):
        code, out, _ = run(
            ["recover", "--data", dataset_file, "--model", "zeror", "--format", "json"], capsys
        )
        assert code == 0
        assert "generated_at" in json.loads(out)

    def test_save_model_then_suggest(self, dataset_file, tmp_path, capsys):
        bundle_path = tmp_path / "model.json"
        code, _, _ = run(
            ["recover", "--data", dataset_file, "--encoder", "tfidf", "--meta",
             "--model", "lr", "--seed", "1", "--out", tmp_path / "r.json",
             "--save-model", bundle_path, "--no-timestamp"],
            capsys,
        )
        assert code == 0 and bundle_path.exists()
        ds = load_dataset(dataset_file)
        code, out, _ = run(
            ["suggest", "--bundle", bundle_path, "--data", dataset_file,
             "--source", ds.issues[0].id, "--target", ds.issues[1].id, "--top-k", "2"],
            capsys,
        )
        assert code == 0
        ranked = json.loads(out)
        assert len(ranked) == 2
        assert ranked[0]["probability"] >= ranked[1]["probability"]

    def test_trial_log_written(self, dataset_file, tmp_path, capsys):
        log_path = tmp_path / "trials.jsonl"
        code, _, _ = run(
            ["recover", "--data", dataset_file, "--model", "lr", "--tune", "2",
             "--seed", "0", "--out", tmp_path / "r.json", "--trial-log", log_path,
             "--no-timestamp"],
            capsys,
        )
        assert code == 0
        lines = log_path.read_text().splitlines()
        assert len(lines) == 10  # 2 trials for each of 5 outer folds
        assert all("score" in json.loads(line) for line in lines)


class TestPredictFuture:
    def test_split_report(self, dataset_file, tmp_path, capsys):
        out_path = tmp_path / "pred.json"
        code, _, _ = run(
            ["predict-future", "--data", dataset_file, "--split", "60-20",
             "--model", "zeror", "--out", out_path, "--no-timestamp"],
            capsys,
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert payload["split"] == {"train_fraction": 0.6, "test_fraction": 0.2}
        assert "folds" not in payload

    def test_invalid_split_rejected(self, dataset_file, capsys):
        code, _, _ = run(
            ["predict-future", "--data", dataset_file, "--split", "50-50"], capsys
        )
        assert code == 2


class TestSynthCommand:
    def test_byte_identical_per_seed(self, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            code, _, _ = run(
                ["synth", "--n-issues", "80", "--labels", "3", "--noise", "0.2",
                 "--seed", "11", "--out", path],
                capsys,
            )
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_loadable(self, tmp_path, capsys):
        path = tmp_path / "d.json"
        run(["synth", "--n-issues", "40", "--labels", "2", "--seed", "0", "--out", path], capsys)
        ds = load_dataset(path)
        assert len(ds.issues) == 40


class TestConfigPrecedence:
    def test_cli_beats_config_beats_default(self, dataset_file, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"model": "zeror", "seed": 42, "no_timestamp": True}))
        out_path = tmp_path / "r.json"
        code, _, _ = run(
            ["recover", "--data", dataset_file, "--config", config, "--seed", "7",
             "--out", out_path],
            capsys,
        )
        assert code == 0
        payload = json.loads(out_path.read_text())
        assert payload["seed"] == 7  # CLI wins
        assert payload["config"]["model"] == "zeror"  # config file beats default
        assert "generated_at" not in payload  # config file set no_timestamp


class TestLoadCommand:
    def test_dump_to_dataset(self, tmp_path, capsys):
        dump = [
            {"key": "P-1", "fields": {
                "summary": "s1", "description": "", "issuetype": {"name": "Bug"},
                "status": {"name": "Open"}, "created": "2020-01-01T00:00:00.000+0000",
                "assignee": None, "reporter": {"name": "r"},
                "issuelinks": [{"type": {"name": "blocks", "outward": "blocks"},
                                "outwardIssue": {"key": "P-2"}}]}},
            {"key": "P-2", "fields": {
                "summary": "s2", "description": "", "issuetype": {"name": "Bug"},
                "status": {"name": "Open"}, "created": "2020-01-02T00:00:00.000+0000",
                "assignee": None, "reporter": {"name": "r"},
                "issuelinks": [{"type": {"name": "blocks", "inward": "is blocked by"},
                                "inwardIssue": {"key": "P-1"}}]}},
        ]
        dump_path = tmp_path / "dump.json"
        dump_path.write_text(json.dumps(dump))
        out_path = tmp_path / "dataset.json"
        code, _, _ = run(["load", "--data", dump_path, "--out", out_path], capsys)
        assert code == 0
        ds = load_dataset(out_path)
        assert len(ds.issues) == 2
        assert [(l.source, l.target, l.label) for l in ds.links] == [("P-1", "P-2", "blocks")]


class TestTrainEmbeddingsCommand:
    def test_trains_and_saves(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("the king rules the realm\nthe queen rules the court\n" * 30)
        out = tmp_path / "vectors.txt"
        code, _, _ = run(
            ["train-embeddings", "--corpus", corpus, "--out", out, "--dims", "8",
             "--epochs", "2", "--window", "2", "--negatives", "2", "--min-count", "1",
             "--buckets", "100", "--seed", "0"],
            capsys,
        )
        assert code == 0
        header = out.read_text().splitlines()[0].split()
        assert header[1] == "8"
        # stopword "the" was normalized away before training
        assert all(not line.startswith("the ") for line in out.read_text().splitlines()[1:])
