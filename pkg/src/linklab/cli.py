"""Command-line front door.

Subcommands: ingest, load, stats, train-embeddings, recover, predict-future,
suggest, synth.  Flag precedence is CLI > config file (flat JSON keyed by
flag name) > built-in defaults.  Machine-readable output goes to stdout (or
--out); logs go to stderr.  Exit codes: 0 success, 1 runtime error, 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from linklab.dataset import (
    LabelFilterPolicy,
    ProjectDataset,
    filter_labels,
    label_distribution,
    linked_issue_ratio,
    validate_dataset,
)
from linklab.embeddings import load_embeddings, save_embeddings, train_embeddings
from linklab.encoders import EMBEDDING_ENCODERS, LinkFeatureConfig
from linklab.experiments import (
    EvalReport,
    ModelBundle,
    TimeSplitSpec,
    fit_model_bundle,
    run_prediction_experiment,
    run_recovery_experiment,
    suggest_label,
    time_split,
)
from linklab.ingestion import (
    JiraSourceConfig,
    canonicalize_links,
    fetch_project,
    load_dataset,
    load_dump,
    save_dataset,
)
from linklab.synth import generate_synthetic
from linklab.textprep import default_config as default_norm_config, normalize_text
from linklab.tuning import write_trial_log

log = logging.getLogger(__name__)

SPLIT_CHOICES = {"60-20": TimeSplitSpec(0.6, 0.2), "80-20": TimeSplitSpec(0.8, 0.2)}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat JSON file of flag defaults")
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    parser.add_argument("--out", default=None, help="output file (default stdout)")
    parser.add_argument("--format", choices=("json", "csv", "text"), default=None)
    parser.add_argument(
        "--no-timestamp", action="store_true", default=None, help="omit the timestamp from reports"
    )


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", default=None, help="dataset JSON file")
    parser.add_argument("--encoder", choices=("tfidf", "embedding", "none"), default=None)
    parser.add_argument("--embeddings", default=None, help="pretrained vectors (word2vec text format)")
    parser.add_argument("--meta", action="store_true", default=None, help="append metadata features")
    parser.add_argument("--model", choices=("lr", "rf", "nn", "zeror"), default=None)
    parser.add_argument("--smote", action="store_true", default=None)
    parser.add_argument("--tune", type=int, default=None, metavar="N",
                        help="random-search trials (omit to use the bold defaults)")
    parser.add_argument("--min-label-count", type=int, default=None)
    parser.add_argument("--min-label-fraction", type=float, default=None)
    parser.add_argument("--fit-encoders-once", action="store_true", default=None)
    parser.add_argument("--finetune-epochs", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--save-model", default=None, help="write the final model bundle here")
    parser.add_argument("--trial-log", default=None, help="write tuning trials as JSON lines here")


EXPERIMENT_DEFAULTS = {
    "seed": 0,
    "format": "json",
    "encoder": "tfidf",
    "meta": False,
    "smote": False,
    "tune": None,
    "min_label_count": 20,
    "min_label_fraction": 0.01,
    "fit_encoders_once": False,
    "finetune_epochs": 5,
    "jobs": 1,
    "no_timestamp": False,
}


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge CLI > config file > defaults into one concrete mapping."""
    file_config = {}
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as handle:
            file_config = json.load(handle)
    resolved = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_config:
            resolved[key] = file_config[key]
        elif key.replace("_", "-") in file_config:
            resolved[key] = file_config[key.replace("_", "-")]
        else:
            resolved[key] = default
    return resolved


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _report_text(payload: dict) -> str:
    lines = [f"weighted F1: {payload['weighted_f1']:.4f}"]
    if "folds" in payload:
        lines.append("fold scores: " + ", ".join(f"{s:.4f}" for s in payload["folds"]))
    lines.append(f"{'label':<20} {'prec':>7} {'recall':>7} {'f1':>7} {'support':>8}")
    for label, stats in sorted(payload["per_label"].items()):
        lines.append(
            f"{label:<20} {stats['precision']:>7.4f} {stats['recall']:>7.4f} "
            f"{stats['f1']:>7.4f} {stats['support']:>8d}"
        )
    return "\n".join(lines) + "\n"


def _emit_report(report: EvalReport, resolved: dict, subcommand: str) -> None:
    payload = report.to_dict()
    payload["config"]["cli"] = {
        "subcommand": subcommand,
        **{k: v for k, v in sorted(resolved.items()) if k not in ("format", "out")},
    }
    if not resolved["no_timestamp"]:
        payload["generated_at"] = datetime.now(timezone.utc).isoformat()
    fmt = resolved["format"]
    if fmt == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        text = report.per_label_csv()
    else:
        text = _report_text(payload)
    _write_output(text, resolved.get("out"))


def _load_filtered(resolved: dict) -> ProjectDataset:
    if not resolved.get("data"):
        raise ValueError("--data is required")
    dataset = load_dataset(resolved["data"])
    policy = LabelFilterPolicy(
        min_fraction=float(resolved["min_label_fraction"]),
        min_count=int(resolved["min_label_count"]),
    )
    return filter_labels(dataset, policy)


def _feature_config(resolved: dict) -> LinkFeatureConfig:
    return LinkFeatureConfig(
        text_encoder=resolved["encoder"],
        include_metadata=bool(resolved["meta"]),
        finetune_epochs=int(resolved["finetune_epochs"]),
    )


def _base_embedding(resolved: dict):
    if resolved["encoder"] in EMBEDDING_ENCODERS:
        if not resolved.get("embeddings"):
            raise ValueError("--embeddings FILE is required with --encoder embedding")
        return load_embeddings(resolved["embeddings"])
    return None


# --- Subcommand handlers -----------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    defaults = {
        "base_url": None, "project": None, "token": None, "page_size": 100,
        "timeout": 30.0, "max_retries": 3, "out": None, "seed": 0,
    }
    resolved = _resolve(args, defaults)
    if not resolved["base_url"] or not resolved["project"]:
        raise ValueError("--base-url and --project are required")
    config = JiraSourceConfig(
        base_url=resolved["base_url"],
        project_key=resolved["project"],
        auth_token=resolved["token"],
        page_size=int(resolved["page_size"]),
        request_timeout=float(resolved["timeout"]),
        max_retries=int(resolved["max_retries"]),
    )
    records = fetch_project(config)
    dataset, report = canonicalize_links(records, project=resolved["project"])
    log.info(
        "ingested %d issues, %d links (%d external dropped, %d duplicates collapsed)",
        len(dataset.issues), len(dataset.links), report.dropped_external, report.duplicates_collapsed,
    )
    validation = validate_dataset(dataset)
    for violation in validation.violations:
        log.warning("validation: %s", violation.message)
    if resolved["out"]:
        save_dataset(dataset, resolved["out"])
    else:
        sys.stdout.write(json.dumps({"issues": len(dataset.issues), "links": len(dataset.links)}) + "\n")
    return 0


def cmd_load(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"data": None, "project": None, "out": None})
    if not resolved["data"]:
        raise ValueError("--data is required")
    records = load_dump(resolved["data"])
    dataset, report = canonicalize_links(records, project=resolved["project"])
    log.info(
        "loaded %d issues, %d links (%d external dropped)",
        len(dataset.issues), len(dataset.links), report.dropped_external,
    )
    if resolved["out"]:
        save_dataset(dataset, resolved["out"])
    else:
        sys.stdout.write(json.dumps({"issues": len(dataset.issues), "links": len(dataset.links)}) + "\n")
    return 0


def _stats_payload(dataset: ProjectDataset) -> dict:
    return {
        "project": dataset.project,
        "issues": len(dataset.issues),
        "links": len(dataset.links),
        "linked_issue_ratio": linked_issue_ratio(dataset) if dataset.issues else None,
        "labels": {
            label: {"count": count, "fraction": fraction}
            for label, (count, fraction) in label_distribution(dataset).items()
        },
    }


def cmd_stats(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"data": None, "format": "json", "out": None})
    if not resolved["data"]:
        raise ValueError("--data is required")
    path = Path(resolved["data"])
    if path.is_dir():
        datasets = [load_dataset(p) for p in sorted(path.glob("*.json"))]
        if not datasets:
            raise ValueError(f"no dataset JSON files in {path}")
        ratios = [linked_issue_ratio(d) for d in datasets if d.issues]
        payload: dict = {
            "datasets": [_stats_payload(d) for d in datasets],
            "linked_issue_ratio_mean": float(np.mean(ratios)),
            "linked_issue_ratio_std": float(np.std(ratios)),
        }
    else:
        payload = _stats_payload(load_dataset(path))

    if resolved["format"] == "csv":
        lines = ["project,label,count,fraction"]
        for entry in payload.get("datasets", [payload]):
            for label, stats in entry["labels"].items():
                lines.append(f"{entry['project']},{label},{stats['count']},{stats['fraction']:.6f}")
        text = "\n".join(lines) + "\n"
    elif resolved["format"] == "text":
        lines = []
        for entry in payload.get("datasets", [payload]):
            lines.append(
                f"{entry['project']}: {entry['issues']} issues, {entry['links']} links, "
                f"linked ratio {entry['linked_issue_ratio']:.4f}"
            )
            for label, stats in entry["labels"].items():
                lines.append(f"  {label:<20} {stats['count']:>6}  {stats['fraction'] * 100:6.2f}%")
        if "linked_issue_ratio_mean" in payload:
            lines.append(
                f"mean linked ratio {payload['linked_issue_ratio_mean']:.4f} "
                f"(std {payload['linked_issue_ratio_std']:.4f})"
            )
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _write_output(text, resolved["out"])
    return 0


def cmd_train_embeddings(args: argparse.Namespace) -> int:
    defaults = {
        "corpus": None, "out": None, "dims": 300, "epochs": 5, "window": 5,
        "negatives": 5, "min_count": 5, "buckets": 2_000_000, "seed": 0,
    }
    resolved = _resolve(args, defaults)
    if not resolved["corpus"] or not resolved["out"]:
        raise ValueError("--corpus and --out are required")
    norm = default_norm_config()
    # Normalization is idempotent, so already-clean corpora pass through.
    with tempfile.NamedTemporaryFile("w", encoding="utf-8", suffix=".txt", delete=False) as temp:
        with open(resolved["corpus"], encoding="utf-8") as source:
            for line in source:
                tokens = normalize_text(line, norm)
                if tokens:
                    temp.write(" ".join(tokens) + "\n")
        temp_path = temp.name
    try:
        model = train_embeddings(
            temp_path,
            dims=int(resolved["dims"]),
            epochs=int(resolved["epochs"]),
            window=int(resolved["window"]),
            negatives=int(resolved["negatives"]),
            min_count=int(resolved["min_count"]),
            seed=int(resolved["seed"]),
            bucket_count=int(resolved["buckets"]),
        )
    finally:
        Path(temp_path).unlink(missing_ok=True)
    save_embeddings(model, resolved["out"])
    log.info("trained %d vectors of %d dims -> %s", len(model.vocab), model.dims, resolved["out"])
    return 0


def cmd_recover(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {**EXPERIMENT_DEFAULTS, "data": None, "embeddings": None,
                               "model": "lr", "save_model": None, "trial_log": None, "out": None})
    dataset = _load_filtered(resolved)
    feature_config = _feature_config(resolved)
    base_embedding = _base_embedding(resolved)
    trials: list = []
    report = run_recovery_experiment(
        dataset,
        feature_config,
        kind=resolved["model"],
        smote=bool(resolved["smote"]),
        tune=resolved["tune"],
        seed=int(resolved["seed"]),
        embedding_model=base_embedding,
        fit_encoders_once=bool(resolved["fit_encoders_once"]),
        jobs=int(resolved["jobs"]),
        trial_results=trials,
    )
    _emit_report(report, resolved, "recover")
    if resolved["trial_log"]:
        with open(resolved["trial_log"], "w", encoding="utf-8") as handle:
            write_trial_log(trials, handle)
    if resolved["save_model"]:
        bundle = fit_model_bundle(
            dataset, feature_config, kind=resolved["model"], smote=bool(resolved["smote"]),
            tune=resolved["tune"], seed=int(resolved["seed"]), embedding_model=base_embedding,
            jobs=int(resolved["jobs"]),
        )
        bundle.save(resolved["save_model"])
    return 0


def cmd_predict_future(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {**EXPERIMENT_DEFAULTS, "data": None, "embeddings": None,
                               "model": "lr", "split": "60-20", "save_model": None,
                               "trial_log": None, "out": None})
    dataset = _load_filtered(resolved)
    split_spec = SPLIT_CHOICES[resolved["split"]]
    feature_config = _feature_config(resolved)
    base_embedding = _base_embedding(resolved)
    trials: list = []
    report = run_prediction_experiment(
        dataset,
        split_spec,
        feature_config,
        kind=resolved["model"],
        smote=bool(resolved["smote"]),
        tune=resolved["tune"],
        seed=int(resolved["seed"]),
        embedding_model=base_embedding,
        jobs=int(resolved["jobs"]),
        trial_results=trials,
    )
    _emit_report(report, resolved, "predict-future")
    if resolved["trial_log"]:
        with open(resolved["trial_log"], "w", encoding="utf-8") as handle:
            write_trial_log(trials, handle)
    if resolved["save_model"]:
        train_links, _ = time_split(dataset, split_spec)
        bundle = fit_model_bundle(
            dataset, feature_config, kind=resolved["model"], smote=bool(resolved["smote"]),
            tune=resolved["tune"], seed=int(resolved["seed"]), embedding_model=base_embedding,
            train_links=train_links, jobs=int(resolved["jobs"]),
        )
        bundle.save(resolved["save_model"])
    return 0


def cmd_suggest(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"bundle": None, "data": None, "source": None, "target": None,
                               "top_k": 3, "format": "json", "out": None})
    for key in ("bundle", "data", "source", "target"):
        if not resolved[key]:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    bundle = ModelBundle.load(resolved["bundle"])
    dataset = load_dataset(resolved["data"])
    issues = dataset.issue_map()
    try:
        issue_a, issue_b = issues[resolved["source"]], issues[resolved["target"]]
    except KeyError as exc:
        raise ValueError(f"issue {exc.args[0]!r} not found in {resolved['data']}") from exc
    ranked = suggest_label(bundle, issue_a, issue_b, top_k=int(resolved["top_k"]))
    if resolved["format"] == "text":
        text = "\n".join(f"{label}\t{probability:.4f}" for label, probability in ranked) + "\n"
    else:
        text = json.dumps(
            [{"label": label, "probability": probability} for label, probability in ranked],
            indent=2,
        ) + "\n"
    _write_output(text, resolved["out"])
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"n_issues": 1000, "labels": 5, "noise": 0.0,
                               "links_per_issue": 0.4, "seed": 0, "out": None})
    dataset = generate_synthetic(
        n_issues=int(resolved["n_issues"]),
        labels=int(resolved["labels"]),
        noise=float(resolved["noise"]),
        seed=int(resolved["seed"]),
        links_per_issue=float(resolved["links_per_issue"]),
    )
    if resolved["out"]:
        save_dataset(dataset, resolved["out"])
        log.info("wrote %d issues, %d links -> %s", len(dataset.issues), len(dataset.links), resolved["out"])
    else:
        from linklab.dataset import dataset_to_dict

        sys.stdout.write(json.dumps(dataset_to_dict(dataset), ensure_ascii=False, indent=2) + "\n")
    return 0


# --- Parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linklab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="fetch a project from a Jira-style REST endpoint")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--project")
    p.add_argument("--token")
    p.add_argument("--page-size", dest="page_size", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--max-retries", dest="max_retries", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("load", help="convert an exported JSON dump into a dataset")
    p.add_argument("--data")
    p.add_argument("--project")
    _add_common(p)
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("stats", help="label distribution and linked-issue ratio")
    p.add_argument("--data", help="dataset file, or a directory of datasets")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train-embeddings", help="train subword skip-gram vectors on a text corpus")
    p.add_argument("--corpus")
    p.add_argument("--dims", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--negatives", type=int, default=None)
    p.add_argument("--min-count", dest="min_count", type=int, default=None)
    p.add_argument("--buckets", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_train_embeddings)

    p = sub.add_parser("recover", help="stratified-CV link label recovery evaluation")
    _add_experiment_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("predict-future", help="time-split future link label prediction")
    p.add_argument("--split", choices=tuple(SPLIT_CHOICES), default=None)
    _add_experiment_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_predict_future)

    p = sub.add_parser("suggest", help="rank labels for one issue pair using a saved model")
    p.add_argument("--bundle")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--top-k", dest="top_k", type=int, default=None)
    p.add_argument("--data")
    _add_common(p)
    p.set_defaults(func=cmd_suggest)

    p = sub.add_parser("synth", help="generate a synthetic dataset with a planted rule")
    p.add_argument("--n-issues", dest="n_issues", type=int, default=None)
    p.add_argument("--labels", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--links-per-issue", dest="links_per_issue", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def run_command(argv: list[str]) -> int:
    """Parse and run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not logging.getLogger().handlers:
        logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # runtime errors exit 1; usage errors exited 2 above
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
