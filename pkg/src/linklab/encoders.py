"""Turn a link (two issues plus optional metadata) into a feature vector.

Two text encodings are supported: TF-IDF over the project vocabulary, where
an issue becomes the concatenation of its summary vector and its description
vector (size 2N), and an embedding bag-of-vectors, where an issue becomes the
mean of its token vectors (size dims).  Metadata adds a normalized creation
time delta plus one-hot type/assignee/reporter blocks for both endpoints.
A link vector is text(source) ++ text(target) ++ metadata.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from linklab.dataset import Issue, IssueLink
from linklab.embeddings import EmbeddingModel, encode_issue_embedding, finetune_embeddings
from linklab.textprep import TokenizedIssue

__all__ = [
    "TfidfModel",
    "MetadataRegistry",
    "LinkFeatureConfig",
    "LinkEncoder",
    "TEXT_ENCODERS",
    "EMBEDDING_ENCODERS",
    "NO_ASSIGNEE",
    "fit_tfidf",
    "tfidf_document_vector",
    "encode_issue_tfidf",
    "fit_metadata_registry",
    "time_delta_days",
    "encode_metadata",
]

log = logging.getLogger(__name__)

TEXT_ENCODERS = ("tfidf", "embedding", "wiki", "stack", "proj", "none")
# wiki / stack / proj name where the pretrained vectors came from; they all
# behave as the generic embedding encoder.
EMBEDDING_ENCODERS = ("embedding", "wiki", "stack", "proj")

NO_ASSIGNEE = "<none>"


# --- TF-IDF -------------------------------------------------------------


@dataclass(frozen=True)
class TfidfModel:
    """Fitted vocabulary with smoothed document frequencies.

    Summaries and descriptions are separate documents, so ``n_documents`` is
    twice the number of issues the model was fitted on.
    """

    vocabulary: dict[str, int]
    doc_frequency: np.ndarray
    n_documents: int

    @property
    def size(self) -> int:
        return len(self.vocabulary)

    def idf(self) -> np.ndarray:
        return np.log((1.0 + self.n_documents) / (1.0 + self.doc_frequency)) + 1.0


def fit_tfidf(corpus: Iterable[TokenizedIssue]) -> TfidfModel:
    """Fit vocabulary and document frequencies over issue summaries and descriptions.

    Every issue contributes two documents (an empty description still counts
    as a document).  Vocabulary indices are dense and sorted by token.
    """
    documents: list[tuple[str, ...]] = []
    for issue in corpus:
        documents.append(issue.summary_tokens)
        documents.append(issue.description_tokens)
    if not documents:
        raise ValueError("empty corpus")

    vocabulary = {token: i for i, token in enumerate(sorted({t for doc in documents for t in doc}))}
    doc_frequency = np.zeros(len(vocabulary), dtype=np.int64)
    for doc in documents:
        for token in set(doc):
            doc_frequency[vocabulary[token]] += 1
    return TfidfModel(vocabulary=vocabulary, doc_frequency=doc_frequency, n_documents=len(documents))


def tfidf_document_vector(model: TfidfModel, tokens: Sequence[str]) -> np.ndarray:
    """Weight = tf(t, d) * (ln((1 + n) / (1 + df(t))) + 1), L2-normalized.

    Unknown tokens are ignored; an all-zero document stays zero.
    """
    vector = np.zeros(model.size, dtype=np.float64)
    idf = model.idf()
    for token in tokens:
        index = model.vocabulary.get(token)
        if index is not None:
            vector[index] += idf[index]
    norm = np.linalg.norm(vector)
    if norm > 0:
        vector /= norm
    return vector


def encode_issue_tfidf(model: TfidfModel, issue: TokenizedIssue) -> np.ndarray:
    """Concatenate the summary and description TF-IDF vectors (size 2N)."""
    return np.concatenate(
        [
            tfidf_document_vector(model, issue.summary_tokens),
            tfidf_document_vector(model, issue.description_tokens),
        ]
    )


# --- Metadata -----------------------------------------------------------


@dataclass(frozen=True)
class MetadataRegistry:
    """Category index maps and time-delta moments, fitted on training data.

    Index 0 of every one-hot block is reserved for categories unseen during
    fitting; known categories occupy indices 1..N.
    """

    type_index: dict[str, int]
    assignee_index: dict[str, int]
    reporter_index: dict[str, int]
    time_delta_mean: float
    time_delta_std: float

    @property
    def width(self) -> int:
        return 1 + 2 * (len(self.type_index) + len(self.assignee_index) + len(self.reporter_index) + 3)


def time_delta_days(issue_a: Issue, issue_b: Issue) -> float:
    """Absolute difference between creation times, in days."""
    return abs((issue_a.created - issue_b.created).total_seconds()) / 86400.0


def _index(values: Iterable[str]) -> dict[str, int]:
    return {value: i + 1 for i, value in enumerate(sorted(set(values)))}


def fit_metadata_registry(
    train_links: Sequence[IssueLink],
    issues_by_id: Mapping[str, Issue],
) -> MetadataRegistry:
    """Build category indices and time-delta moments from training links only."""
    if not train_links:
        raise ValueError("empty training set")
    endpoints = [issues_by_id[i] for link in train_links for i in (link.source, link.target)]
    deltas = np.array(
        [time_delta_days(issues_by_id[l.source], issues_by_id[l.target]) for l in train_links]
    )
    return MetadataRegistry(
        type_index=_index(issue.issue_type for issue in endpoints),
        assignee_index=_index(issue.assignee or NO_ASSIGNEE for issue in endpoints),
        reporter_index=_index(issue.reporter for issue in endpoints),
        time_delta_mean=float(deltas.mean()),
        time_delta_std=float(deltas.std()),
    )


def _one_hot(index: Mapping[str, int], category: str) -> np.ndarray:
    vector = np.zeros(len(index) + 1, dtype=np.float64)
    vector[index.get(category, 0)] = 1.0
    return vector


def encode_metadata(
    registry: MetadataRegistry,
    link: IssueLink,
    issue_a: Issue,
    issue_b: Issue,
) -> np.ndarray:
    """[normalized |time delta|] ++ type/assignee/reporter one-hots for both issues."""
    delta = time_delta_days(issue_a, issue_b)
    if registry.time_delta_std > 0:
        normalized = (delta - registry.time_delta_mean) / registry.time_delta_std
    else:
        normalized = 0.0
    return np.concatenate(
        [
            np.array([normalized]),
            _one_hot(registry.type_index, issue_a.issue_type),
            _one_hot(registry.type_index, issue_b.issue_type),
            _one_hot(registry.assignee_index, issue_a.assignee or NO_ASSIGNEE),
            _one_hot(registry.assignee_index, issue_b.assignee or NO_ASSIGNEE),
            _one_hot(registry.reporter_index, issue_a.reporter),
            _one_hot(registry.reporter_index, issue_b.reporter),
        ]
    )


# --- Link feature assembly ------------------------------------------------


@dataclass(frozen=True)
class LinkFeatureConfig:
    """Which text encoder to use and whether metadata features are appended."""

    text_encoder: str = "tfidf"
    include_metadata: bool = False
    finetune_epochs: int = 5

    def __post_init__(self) -> None:
        if self.text_encoder not in TEXT_ENCODERS:
            raise ValueError(f"unknown text encoder {self.text_encoder!r}; choose from {TEXT_ENCODERS}")
        if self.text_encoder == "none" and not self.include_metadata:
            raise ValueError("text_encoder='none' requires include_metadata=True")


class LinkEncoder:
    """Encoders fitted on one training set, mapping links to fixed-size vectors.

    Fitted state is immutable, and per-issue text vectors are precomputed, so
    a LinkEncoder can be shared across threads.
    """

    def __init__(
        self,
        config: LinkFeatureConfig,
        issues_by_id: Mapping[str, Issue],
        tokenized: Mapping[str, TokenizedIssue],
        tfidf: TfidfModel | None = None,
        embedding: EmbeddingModel | None = None,
        metadata: MetadataRegistry | None = None,
        fit_issue_ids: frozenset[str] = frozenset(),
    ) -> None:
        self.config = config
        self.issues_by_id = issues_by_id
        self.tokenized = tokenized
        self.tfidf = tfidf
        self.embedding = embedding
        self.metadata = metadata
        # Provenance tag: ids of the issues whose text fitted the encoders.
        self.fit_issue_ids = fit_issue_ids
        self._text_cache: dict[str, np.ndarray] = {}

    @classmethod
    def fit(
        cls,
        config: LinkFeatureConfig,
        train_links: Sequence[IssueLink],
        issues_by_id: Mapping[str, Issue],
        tokenized: Mapping[str, TokenizedIssue],
        base_embedding: EmbeddingModel | None = None,
        seed: int = 0,
    ) -> "LinkEncoder":
        """Fit all required encoders on the training links' issues only."""
        train_issue_ids = sorted({i for link in train_links for i in (link.source, link.target)})
        train_tokenized = [tokenized[i] for i in train_issue_ids]

        tfidf = None
        embedding = None
        if config.text_encoder == "tfidf":
            tfidf = fit_tfidf(train_tokenized)
        elif config.text_encoder in EMBEDDING_ENCODERS:
            if base_embedding is None:
                raise ValueError(f"text encoder {config.text_encoder!r} needs a pretrained embedding model")
            if config.finetune_epochs > 0:
                embedding = finetune_embeddings(
                    base_embedding, train_tokenized, epochs=config.finetune_epochs, seed=seed
                )
            else:
                embedding = base_embedding

        metadata = None
        if config.include_metadata:
            metadata = fit_metadata_registry(train_links, issues_by_id)
        return cls(
            config,
            issues_by_id,
            tokenized,
            tfidf=tfidf,
            embedding=embedding,
            metadata=metadata,
            fit_issue_ids=frozenset(train_issue_ids),
        )

    @property
    def text_dim(self) -> int:
        if self.config.text_encoder == "tfidf":
            return 2 * self.tfidf.size
        if self.config.text_encoder in EMBEDDING_ENCODERS:
            return self.embedding.dims
        return 0

    @property
    def dim(self) -> int:
        width = 2 * self.text_dim
        if self.metadata is not None:
            width += self.metadata.width
        return width

    def issue_text_vector(self, issue_id: str) -> np.ndarray:
        cached = self._text_cache.get(issue_id)
        if cached is None:
            tok = self.tokenized[issue_id]
            if self.config.text_encoder == "tfidf":
                cached = encode_issue_tfidf(self.tfidf, tok)
            elif self.config.text_encoder in EMBEDDING_ENCODERS:
                cached = encode_issue_embedding(self.embedding, tok)
            else:
                cached = np.zeros(0, dtype=np.float64)
            self._text_cache[issue_id] = cached
        return cached

    def encode_link(self, link: IssueLink) -> np.ndarray:
        """text(source) ++ text(target) ++ metadata (when enabled)."""
        parts = [self.issue_text_vector(link.source), self.issue_text_vector(link.target)]
        if self.metadata is not None:
            parts.append(
                encode_metadata(
                    self.metadata, link, self.issues_by_id[link.source], self.issues_by_id[link.target]
                )
            )
        return np.concatenate(parts)

    def encode_links(self, links: Sequence[IssueLink]) -> np.ndarray:
        if not links:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.vstack([self.encode_link(link) for link in links])
