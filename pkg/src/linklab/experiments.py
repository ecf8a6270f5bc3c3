"""Evaluation metrics and the two evaluation protocols.

Recovery asks how well labels of existing links can be recovered: an outer
stratified 5-fold CV over links, where each fold fits encoders on the
training links' issues, optionally tunes, trains, and scores the held-out
fold; the report averages fold scores and pools the confusion matrices.

Prediction asks how well labels of future links can be predicted: issues are
ordered by creation time, links among the first 60% (or 80%) train the
model, and links whose later endpoint falls in the next 20% window form the
test set.  Everything (vocabulary, metadata categories, embedding updates)
is fitted on the training side only; unseen test tokens are simply skipped.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from linklab.dataset import Issue, IssueLink, ProjectDataset
from linklab.embeddings import EmbeddingModel
from linklab.encoders import LinkEncoder, LinkFeatureConfig, MetadataRegistry, TfidfModel
from linklab.learners import (
    Classifier,
    ClassifierSpec,
    classifier_from_dict,
    classifier_to_dict,
    smote_oversample,
    train_classifier,
)
from linklab.textprep import NormalizationConfig, TokenizedIssue, default_config as default_norm_config, preprocess_issue
from linklab.tuning import DEFAULT_SPACE, HyperParamSpace, default_config, stratified_kfold, tune_random_search

__all__ = [
    "PerLabelStats",
    "ConfusionMatrix",
    "EvalReport",
    "TimeSplitSpec",
    "RunAudit",
    "ModelBundle",
    "weighted_f1",
    "confusion_matrix",
    "analytic_zeror_f1",
    "time_split",
    "run_recovery_experiment",
    "run_prediction_experiment",
    "fit_model_bundle",
    "suggest_label",
]

log = logging.getLogger(__name__)

OUTER_FOLDS = 5
MIN_LABEL_INSTANCES = OUTER_FOLDS  # below this, outer stratification is impossible


# --- Metrics ---------------------------------------------------------------


@dataclass(frozen=True)
class PerLabelStats:
    precision: float
    recall: float
    f1: float
    support: int


def weighted_f1(
    y_true: Sequence[str], y_pred: Sequence[str]
) -> tuple[float, dict[str, PerLabelStats]]:
    """Support-weighted mean of per-label F1 scores.

    Per label: precision = tp / predicted, recall = tp / support, and
    F1 = 2PR / (P + R) (zero when P + R is zero).  Labels that are predicted
    but never true still get stats, with zero support and zero weight.
    """
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if not y_true:
        raise ValueError("empty label sequences")

    labels = sorted(set(y_true) | set(y_pred))
    tp: dict[str, int] = {label: 0 for label in labels}
    pred_count: dict[str, int] = {label: 0 for label in labels}
    support: dict[str, int] = {label: 0 for label in labels}
    for truth, guess in zip(y_true, y_pred):
        support[truth] += 1
        pred_count[guess] += 1
        if truth == guess:
            tp[truth] += 1

    per_label: dict[str, PerLabelStats] = {}
    total = len(y_true)
    weighted = 0.0
    for label in labels:
        precision = tp[label] / pred_count[label] if pred_count[label] else 0.0
        recall = tp[label] / support[label] if support[label] else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_label[label] = PerLabelStats(precision, recall, f1, support[label])
        weighted += (support[label] / total) * f1
    return weighted, per_label


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[str, ...]
    counts: np.ndarray  # rows = true, cols = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ConfusionMatrix":
        return cls(tuple(data["labels"]), np.array(data["counts"], dtype=np.int64))


def confusion_matrix(
    y_true: Sequence[str], y_pred: Sequence[str], label_order: Sequence[str]
) -> ConfusionMatrix:
    """Counts of (true label, predicted label) pairs in the given label order."""
    index = {label: i for i, label in enumerate(label_order)}
    counts = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    for truth, guess in zip(y_true, y_pred):
        if truth not in index:
            raise ValueError(f"unknown true label {truth!r}")
        if guess not in index:
            raise ValueError(f"unknown predicted label {guess!r}")
        counts[index[truth], index[guess]] += 1
    return ConfusionMatrix(tuple(label_order), counts)


def analytic_zeror_f1(y: Sequence[str]) -> float:
    """Closed-form weighted F1 of the majority classifier on distribution y.

    With majority fraction p, only the majority label scores: precision p,
    recall 1, F1 = 2p / (1 + p), weighted by p.
    """
    y = list(y)
    if not y:
        raise ValueError("empty label sequence")
    # max() keeps the first maximum, so sorted labels give a lexicographic tie-break
    majority = max(sorted(set(y)), key=y.count)
    p = y.count(majority) / len(y)
    return p * 2.0 * p / (1.0 + p)


# --- Reports -----------------------------------------------------------------


@dataclass
class EvalReport:
    """Metrics plus the exact configuration and seed that produced them."""

    weighted_f1: float
    per_label: dict[str, PerLabelStats]
    confusion: ConfusionMatrix
    config: dict
    seed: int
    fold_scores: list[float] | None = None
    split: dict | None = None

    def to_dict(self) -> dict:
        payload: dict = {
            "weighted_f1": self.weighted_f1,
            "per_label": {
                label: {
                    "precision": stats.precision,
                    "recall": stats.recall,
                    "f1": stats.f1,
                    "support": stats.support,
                }
                for label, stats in self.per_label.items()
            },
            "confusion": self.confusion.to_dict(),
            "config": self.config,
            "seed": self.seed,
        }
        if self.fold_scores is not None:
            payload["folds"] = self.fold_scores
        if self.split is not None:
            payload["split"] = self.split
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def per_label_csv(self) -> str:
        lines = ["label,precision,recall,f1,support"]
        for label, stats in sorted(self.per_label.items()):
            lines.append(
                f"{label},{stats.precision:.6f},{stats.recall:.6f},{stats.f1:.6f},{stats.support}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class RunAudit:
    """Optional provenance collected during an experiment run.

    ``encoder_fit_issue_ids`` holds, per fitted encoder, the ids of issues
    whose text was visible during fitting; ``smote_inputs`` records, per
    SMOTE call, which link row keys went in.  Used by leakage tests.
    """

    encoder_fit_issue_ids: list[frozenset[str]] = field(default_factory=list)
    vocabularies: list[frozenset[str]] = field(default_factory=list)
    smote_inputs: list[list[tuple[str, str, str]]] = field(default_factory=list)
    fold_test_keys: list[list[tuple[str, str, str]]] = field(default_factory=list)


# --- Time split --------------------------------------------------------------


@dataclass(frozen=True)
class TimeSplitSpec:
    """Train on links among the first ``train_fraction`` of issues by creation
    time; test on links whose later endpoint falls in the next
    ``test_fraction`` window."""

    train_fraction: float = 0.6
    test_fraction: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0 or not 0.0 < self.test_fraction <= 1.0:
            raise ValueError("fractions must be in (0, 1)")
        if self.train_fraction + self.test_fraction > 1.0 + 1e-9:
            raise ValueError("train_fraction + test_fraction must not exceed 1")

    @property
    def name(self) -> str:
        return f"{round(self.train_fraction * 100)}-{round(self.test_fraction * 100)}"


def _issue_time_order(dataset: ProjectDataset) -> list[str]:
    return [issue.id for issue in sorted(dataset.issues, key=lambda i: (i.created, i.id))]


def _time_partition(dataset: ProjectDataset, spec: TimeSplitSpec) -> tuple[set[str], set[str]]:
    """(train issue ids, test-window issue ids) under the split spec."""
    order = _issue_time_order(dataset)
    n = len(order)
    cutoff = int(np.ceil(spec.train_fraction * n))
    window = int(np.ceil(spec.test_fraction * n))
    return set(order[:cutoff]), set(order[cutoff : cutoff + window])


def time_split(
    dataset: ProjectDataset, spec: TimeSplitSpec
) -> tuple[list[IssueLink], list[IssueLink]]:
    """Partition links into (train, test) by issue creation time.

    Train links have both endpoints among the first ``train_fraction`` of
    issues.  Test links are those from the next window of issues to any
    earlier-or-window issue, i.e. the later-created endpoint lies in the
    window; links reaching past the window are discarded so the 60-20 and
    80-20 test populations stay comparable.  Creation ties break by issue id.
    """
    train_ids, window_ids = _time_partition(dataset, spec)
    issues = dataset.issue_map()

    def later_endpoint(link: IssueLink) -> str:
        a, b = issues[link.source], issues[link.target]
        return max((a, b), key=lambda i: (i.created, i.id)).id

    train_links: list[IssueLink] = []
    test_links: list[IssueLink] = []
    for link in dataset.links:
        if link.source in train_ids and link.target in train_ids:
            train_links.append(link)
        elif later_endpoint(link) in window_ids:
            test_links.append(link)
    return train_links, test_links


# --- Experiment helpers -------------------------------------------------------


def _tokenize_all(
    dataset: ProjectDataset, norm_config: NormalizationConfig
) -> dict[str, TokenizedIssue]:
    return {issue.id: preprocess_issue(issue, norm_config) for issue in dataset.issues}


def _drop_rare_labels(links: Sequence[IssueLink], minimum: int) -> list[IssueLink]:
    counts: dict[str, int] = {}
    for link in links:
        counts[link.label] = counts.get(link.label, 0) + 1
    rare = sorted(label for label, count in counts.items() if count < minimum)
    if rare:
        warnings.warn(
            f"dropping labels with fewer than {minimum} links: {', '.join(rare)}",
            stacklevel=3,
        )
    return [link for link in links if link.label not in rare]


def _link_key(link: IssueLink) -> tuple[str, str, str]:
    return (link.source, link.target, link.label)


def _resolve_spec(
    kind: str,
    X_train: np.ndarray,
    y_train: list[str],
    smote: bool,
    tune: int | None,
    seed: int,
    space: HyperParamSpace,
    jobs: int,
) -> tuple[ClassifierSpec, list]:
    if tune is None:
        return default_config(kind, smote_enabled=smote, seed=seed), []
    best, trials = tune_random_search(
        kind, X_train, y_train, space=space, n_trials=tune, seed=seed, smote_enabled=smote, jobs=jobs
    )
    return replace(best, seed=seed), trials


def _fit_and_predict(
    spec: ClassifierSpec,
    X_train: np.ndarray,
    y_train: list[str],
    X_test: np.ndarray,
    smote: bool,
    smote_seed: int,
) -> tuple[Classifier, list[str]]:
    if smote:
        X_train, y_train = smote_oversample(
            X_train, y_train, k=int(spec.hyper_params.get("SM_k", 5)), seed=smote_seed
        )
    model = train_classifier(spec, X_train, y_train)
    return model, model.predict(X_test)


def _spec_params(spec: ClassifierSpec) -> dict:
    return dict(spec.hyper_params)


# --- Recovery experiment ------------------------------------------------------


def run_recovery_experiment(
    dataset: ProjectDataset,
    feature_config: LinkFeatureConfig,
    kind: str,
    smote: bool = False,
    tune: int | None = None,
    seed: int = 0,
    norm_config: NormalizationConfig | None = None,
    embedding_model: EmbeddingModel | None = None,
    fit_encoders_once: bool = False,
    jobs: int = 1,
    space: HyperParamSpace = DEFAULT_SPACE,
    audit: RunAudit | None = None,
    trial_results: list | None = None,
) -> EvalReport:
    """Outer stratified 5-fold CV over links; every link is tested exactly once.

    Labels with fewer than 5 links cannot be stratified and are dropped with
    a warning.  Per fold, encoders are fitted on the training links' issues
    (or once on the whole dataset with ``fit_encoders_once``), hyper-params
    come from random search when ``tune`` is set and from the defaults
    otherwise, and the held-out fold is scored.  The reported weighted F1 is
    the unweighted mean of the five fold scores; confusion matrices are
    pooled.
    """
    norm = norm_config or default_norm_config()
    links = _drop_rare_labels(list(dataset.links), MIN_LABEL_INSTANCES)
    labels_present = sorted({link.label for link in links})
    if len(labels_present) < 2:
        raise ValueError("need at least 2 labels with enough links for recovery evaluation")

    tokenized = _tokenize_all(dataset, norm)
    issues = dataset.issue_map()
    y = [link.label for link in links]
    folds = stratified_kfold(y, OUTER_FOLDS, seed)

    global_encoder = None
    if fit_encoders_once:
        global_encoder = LinkEncoder.fit(
            feature_config, links, issues, tokenized, base_embedding=embedding_model, seed=seed
        )

    fold_scores: list[float] = []
    fold_configs: list[dict] = []
    pooled_true: list[str] = []
    pooled_pred: list[str] = []

    everything = np.arange(len(links))
    for fold_index, test_idx in enumerate(folds):
        fold_seed = seed + fold_index
        train_idx = np.setdiff1d(everything, test_idx)
        train_links = [links[i] for i in train_idx]
        test_links = [links[i] for i in test_idx]

        encoder = global_encoder or LinkEncoder.fit(
            feature_config, train_links, issues, tokenized, base_embedding=embedding_model, seed=fold_seed
        )
        X_train = encoder.encode_links(train_links)
        X_test = encoder.encode_links(test_links)
        y_train = [link.label for link in train_links]
        y_test = [link.label for link in test_links]

        spec, trials = _resolve_spec(kind, X_train, y_train, smote, tune, fold_seed, space, jobs)
        if trial_results is not None:
            trial_results.extend(trials)
        if audit is not None and smote:
            audit.smote_inputs.append([_link_key(l) for l in train_links])
        model, predictions = _fit_and_predict(spec, X_train, y_train, X_test, smote, fold_seed)

        score, _ = weighted_f1(y_test, predictions)
        fold_scores.append(score)
        fold_configs.append(_spec_params(spec))
        pooled_true.extend(y_test)
        pooled_pred.extend(predictions)
        if audit is not None:
            audit.encoder_fit_issue_ids.append(frozenset(encoder.fit_issue_ids))
            if encoder.tfidf is not None:
                audit.vocabularies.append(frozenset(encoder.tfidf.vocabulary))
            audit.fold_test_keys.append([_link_key(l) for l in test_links])
        log.info("recovery fold %d/%d: weighted F1 %.4f", fold_index + 1, OUTER_FOLDS, score)

    _, per_label = weighted_f1(pooled_true, pooled_pred)
    label_order = sorted(set(pooled_true) | set(pooled_pred))
    return EvalReport(
        weighted_f1=float(np.mean(fold_scores)),
        per_label=per_label,
        confusion=confusion_matrix(pooled_true, pooled_pred, label_order),
        config={
            "mode": "recovery",
            "model": kind,
            "encoder": feature_config.text_encoder,
            "metadata": feature_config.include_metadata,
            "smote": smote,
            "tune": tune,
            "fit_encoders_once": fit_encoders_once,
            "fold_configs": fold_configs,
        },
        seed=seed,
        fold_scores=fold_scores,
    )


# --- Prediction experiment ----------------------------------------------------


def run_prediction_experiment(
    dataset: ProjectDataset,
    split_spec: TimeSplitSpec,
    feature_config: LinkFeatureConfig,
    kind: str,
    smote: bool = False,
    tune: int | None = None,
    seed: int = 0,
    norm_config: NormalizationConfig | None = None,
    embedding_model: EmbeddingModel | None = None,
    jobs: int = 1,
    space: HyperParamSpace = DEFAULT_SPACE,
    audit: RunAudit | None = None,
    trial_results: list | None = None,
) -> EvalReport:
    """Train on past links, evaluate on links to future issues.

    Encoders, metadata categories, vocabulary, and embedding updates are all
    fitted on the training split only; out-of-vocabulary test tokens are
    skipped.  Test labels never seen in training stay in the ground truth
    (they are necessarily missed) and keep their weight in the score.
    """
    norm = norm_config or default_norm_config()
    train_links, test_links = time_split(dataset, split_spec)
    if not test_links:
        raise ValueError("empty test set under this time split")
    y_train = [link.label for link in train_links]
    if len(set(y_train)) < 2:
        raise ValueError("train split has fewer than 2 labels")

    tokenized = _tokenize_all(dataset, norm)
    issues = dataset.issue_map()
    encoder = LinkEncoder.fit(
        feature_config, train_links, issues, tokenized, base_embedding=embedding_model, seed=seed
    )
    X_train = encoder.encode_links(train_links)
    X_test = encoder.encode_links(test_links)
    y_test = [link.label for link in test_links]

    spec, trials = _resolve_spec(kind, X_train, y_train, smote, tune, seed, space, jobs)
    if trial_results is not None:
        trial_results.extend(trials)
    if audit is not None and smote:
        audit.smote_inputs.append([_link_key(l) for l in train_links])
    model, predictions = _fit_and_predict(spec, X_train, y_train, X_test, smote, seed)
    if audit is not None:
        audit.encoder_fit_issue_ids.append(frozenset(encoder.fit_issue_ids))
        if encoder.tfidf is not None:
            audit.vocabularies.append(frozenset(encoder.tfidf.vocabulary))
        audit.fold_test_keys.append([_link_key(l) for l in test_links])

    score, per_label = weighted_f1(y_test, predictions)
    label_order = sorted(set(y_test) | set(predictions))
    return EvalReport(
        weighted_f1=score,
        per_label=per_label,
        confusion=confusion_matrix(y_test, predictions, label_order),
        config={
            "mode": "prediction",
            "model": kind,
            "encoder": feature_config.text_encoder,
            "metadata": feature_config.include_metadata,
            "smote": smote,
            "tune": tune,
            "chosen_config": _spec_params(spec),
            "train_links": len(train_links),
            "test_links": len(test_links),
        },
        seed=seed,
        split={"train_fraction": split_spec.train_fraction, "test_fraction": split_spec.test_fraction},
    )


# --- Model bundle and suggestion ---------------------------------------------


BUNDLE_VERSION = 1


@dataclass
class ModelBundle:
    """A trained classifier plus everything needed to encode a new issue pair."""

    classifier: Classifier
    feature_config: LinkFeatureConfig
    tfidf: TfidfModel | None
    embedding_vocab: dict[str, int] | None
    embedding_vectors: np.ndarray | None
    metadata: MetadataRegistry | None
    stopwords: frozenset[str]
    lemmas: dict[str, str]
    version: int = BUNDLE_VERSION

    def norm_config(self) -> NormalizationConfig:
        return NormalizationConfig(stopwords=self.stopwords, lemmas=self.lemmas)

    def encode_pair(self, issue_a: Issue, issue_b: Issue) -> np.ndarray:
        from linklab.encoders import encode_issue_tfidf, encode_metadata

        norm = self.norm_config()
        tok_a = preprocess_issue(issue_a, norm)
        tok_b = preprocess_issue(issue_b, norm)
        parts = []
        if self.feature_config.text_encoder == "tfidf":
            parts = [encode_issue_tfidf(self.tfidf, tok_a), encode_issue_tfidf(self.tfidf, tok_b)]
        elif self.feature_config.text_encoder != "none":
            parts = [self._embed(tok_a), self._embed(tok_b)]
        if self.metadata is not None:
            link = IssueLink(issue_a.id, issue_b.id, "")
            parts.append(encode_metadata(self.metadata, link, issue_a, issue_b))
        return np.concatenate(parts)

    def _embed(self, tok: TokenizedIssue) -> np.ndarray:
        rows = [self.embedding_vocab[t] for t in tok.all_tokens() if t in self.embedding_vocab]
        if not rows:
            return np.zeros(self.embedding_vectors.shape[1])
        return self.embedding_vectors[rows].mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "classifier": classifier_to_dict(self.classifier),
            "feature_config": {
                "text_encoder": self.feature_config.text_encoder,
                "include_metadata": self.feature_config.include_metadata,
                "finetune_epochs": self.feature_config.finetune_epochs,
            },
            "tfidf": None
            if self.tfidf is None
            else {
                "vocabulary": self.tfidf.vocabulary,
                "doc_frequency": self.tfidf.doc_frequency.tolist(),
                "n_documents": self.tfidf.n_documents,
            },
            "embedding": None
            if self.embedding_vectors is None
            else {"vocab": self.embedding_vocab, "vectors": self.embedding_vectors.tolist()},
            "metadata": None
            if self.metadata is None
            else {
                "type_index": self.metadata.type_index,
                "assignee_index": self.metadata.assignee_index,
                "reporter_index": self.metadata.reporter_index,
                "time_delta_mean": self.metadata.time_delta_mean,
                "time_delta_std": self.metadata.time_delta_std,
            },
            "normalization": {"stopwords": sorted(self.stopwords), "lemmas": self.lemmas},
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle)
            handle.write("\n")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelBundle":
        if data.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {data.get('version')!r}")
        tfidf = None
        if data["tfidf"] is not None:
            tfidf = TfidfModel(
                vocabulary=dict(data["tfidf"]["vocabulary"]),
                doc_frequency=np.array(data["tfidf"]["doc_frequency"], dtype=np.int64),
                n_documents=int(data["tfidf"]["n_documents"]),
            )
        metadata = None
        if data["metadata"] is not None:
            metadata = MetadataRegistry(
                type_index=dict(data["metadata"]["type_index"]),
                assignee_index=dict(data["metadata"]["assignee_index"]),
                reporter_index=dict(data["metadata"]["reporter_index"]),
                time_delta_mean=float(data["metadata"]["time_delta_mean"]),
                time_delta_std=float(data["metadata"]["time_delta_std"]),
            )
        embedding_vocab = None
        embedding_vectors = None
        if data["embedding"] is not None:
            embedding_vocab = dict(data["embedding"]["vocab"])
            embedding_vectors = np.array(data["embedding"]["vectors"], dtype=np.float64)
        fc = data["feature_config"]
        return cls(
            classifier=classifier_from_dict(data["classifier"]),
            feature_config=LinkFeatureConfig(
                text_encoder=fc["text_encoder"],
                include_metadata=bool(fc["include_metadata"]),
                finetune_epochs=int(fc.get("finetune_epochs", 0)),
            ),
            tfidf=tfidf,
            embedding_vocab=embedding_vocab,
            embedding_vectors=embedding_vectors,
            metadata=metadata,
            stopwords=frozenset(data["normalization"]["stopwords"]),
            lemmas=dict(data["normalization"]["lemmas"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ModelBundle":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def fit_model_bundle(
    dataset: ProjectDataset,
    feature_config: LinkFeatureConfig,
    kind: str,
    smote: bool = False,
    tune: int | None = None,
    seed: int = 0,
    norm_config: NormalizationConfig | None = None,
    embedding_model: EmbeddingModel | None = None,
    train_links: Sequence[IssueLink] | None = None,
    jobs: int = 1,
    space: HyperParamSpace = DEFAULT_SPACE,
) -> ModelBundle:
    """Fit encoders and a final classifier on the given links (default: all)."""
    norm = norm_config or default_norm_config()
    links = list(train_links) if train_links is not None else list(dataset.links)
    tokenized = _tokenize_all(dataset, norm)
    issues = dataset.issue_map()
    encoder = LinkEncoder.fit(
        feature_config, links, issues, tokenized, base_embedding=embedding_model, seed=seed
    )
    X = encoder.encode_links(links)
    y = [link.label for link in links]
    spec, _ = _resolve_spec(kind, X, y, smote, tune, seed, space, jobs)
    if smote:
        X, y = smote_oversample(X, y, k=int(spec.hyper_params.get("SM_k", 5)), seed=seed)
    model = train_classifier(spec, X, y)

    embedding_vocab = None
    embedding_vectors = None
    if encoder.embedding is not None:
        embedding_vocab = dict(encoder.embedding.vocab)
        embedding_vectors = encoder.embedding.composed_matrix().copy()
    return ModelBundle(
        classifier=model,
        feature_config=feature_config,
        tfidf=encoder.tfidf,
        embedding_vocab=embedding_vocab,
        embedding_vectors=embedding_vectors,
        metadata=encoder.metadata,
        stopwords=norm.stopwords,
        lemmas=dict(norm.lemmas),
    )


def suggest_label(
    bundle: ModelBundle, issue_a: Issue, issue_b: Issue, top_k: int = 3
) -> list[tuple[str, float]]:
    """Rank candidate labels for a link from issue_a to issue_b.

    Returns up to ``top_k`` (label, probability) pairs in non-increasing
    probability order (ties break by label), from the bundled model.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    features = bundle.encode_pair(issue_a, issue_b).reshape(1, -1)
    proba = bundle.classifier.predict_proba(features)[0]
    ranked = sorted(zip(bundle.classifier.labels, proba), key=lambda pair: (-pair[1], pair[0]))
    return [(label, float(p)) for label, p in ranked[:top_k]]
