"""Subword skip-gram embeddings trained with negative sampling.

The trainer learns one input vector per vocabulary word plus hashed
character-n-gram bucket vectors; a word's effective vector is the sum of its
word vector and its n-gram bucket vectors, so morphologically related words
share parameters.  Training is deterministic for a given seed when run
single-threaded.  Externally pretrained vectors in word2vec text format can
be loaded instead of training from scratch, which is the recommended path
for large corpora.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from linklab.textprep import TokenizedIssue

__all__ = [
    "EmbeddingModel",
    "ngram_hashes",
    "train_embeddings",
    "finetune_embeddings",
    "encode_issue_embedding",
    "save_embeddings",
    "load_embeddings",
]

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


def _fnv1a(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value = ((value ^ byte) * _FNV_PRIME) & 0xFFFFFFFF
    return value


def ngram_hashes(word: str, ngram_min: int, ngram_max: int, bucket_count: int) -> list[int]:
    """Bucket ids of the character n-grams of ``<word>`` (with boundary marks)."""
    if bucket_count <= 0:
        return []
    padded = f"<{word}>"
    ids = []
    for n in range(ngram_min, ngram_max + 1):
        for start in range(0, len(padded) - n + 1):
            gram = padded[start : start + n]
            if gram == padded:
                continue  # the full word is represented by its word vector
            ids.append(_fnv1a(gram.encode("utf-8")) % bucket_count)
    return ids


@dataclass
class EmbeddingModel:
    """Trained (or loaded) word vectors plus optional subword buckets.

    ``word_input`` holds the word part of the input vectors; the effective
    vector of a word adds its n-gram bucket rows.  ``output_vectors`` are the
    context-side parameters, kept so training can continue; models loaded
    from a text file have neither buckets nor output vectors.  Treat fitted
    models as immutable: fine-tuning returns a new model.
    """

    dims: int
    vocab: dict[str, int]
    word_input: np.ndarray
    counts: dict[str, int]
    ngram_range: tuple[int, int] = (3, 6)
    bucket_count: int = 0
    bucket_rows: dict[int, int] = field(default_factory=dict)
    bucket_input: np.ndarray | None = None
    output_vectors: np.ndarray | None = None
    _composed: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def _word_ngram_rows(self, word: str) -> np.ndarray:
        ids = ngram_hashes(word, self.ngram_range[0], self.ngram_range[1], self.bucket_count)
        return np.array([self.bucket_rows[i] for i in ids if i in self.bucket_rows], dtype=np.int64)

    def composed_matrix(self) -> np.ndarray:
        """Effective vectors: word vector + sum of its n-gram bucket vectors."""
        if self._composed is None:
            composed = self.word_input.astype(np.float64).copy()
            if self.bucket_input is not None and self.bucket_count > 0:
                for token, row in self.vocab.items():
                    rows = self._word_ngram_rows(token)
                    if rows.size:
                        composed[row] += self.bucket_input[rows].astype(np.float64).sum(axis=0)
            self._composed = composed
        return self._composed

    def vector(self, token: str) -> np.ndarray | None:
        row = self.vocab.get(token)
        if row is None:
            return None
        return self.composed_matrix()[row]

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.vector(a), self.vector(b)
        if va is None or vb is None:
            raise KeyError(f"token not in vocabulary: {a if va is None else b!r}")
        denom = np.linalg.norm(va) * np.linalg.norm(vb)
        return float(va @ vb / denom) if denom > 0 else 0.0


def _build_pairs(sentences: Sequence[Sequence[int]], window: int) -> tuple[np.ndarray, np.ndarray]:
    centers: list[int] = []
    contexts: list[int] = []
    for sentence in sentences:
        length = len(sentence)
        for i in range(length):
            lo = max(0, i - window)
            hi = min(length, i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(sentence[i])
                    contexts.append(sentence[j])
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def _negative_table(counts: np.ndarray) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    cumulative = np.cumsum(weights)
    return cumulative / cumulative[-1]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def _sgns_epochs(
    model: EmbeddingModel,
    sentences: Sequence[Sequence[int]],
    epochs: int,
    window: int,
    negatives: int,
    learning_rate: float,
    rng: np.random.Generator,
    workers: int = 1,
) -> None:
    """Run skip-gram negative-sampling epochs, updating the model in place."""
    centers, contexts = _build_pairs(sentences, window)
    if centers.size == 0:
        raise ValueError("corpus is smaller than one context window")

    vocab_size = len(model.vocab)
    count_array = np.zeros(vocab_size, dtype=np.float64)
    for token, row in model.vocab.items():
        count_array[row] = model.counts.get(token, 1)
    cumulative = _negative_table(count_array)

    if model.output_vectors is None:
        model.output_vectors = np.zeros((vocab_size, model.dims), dtype=np.float64)

    word_in = model.word_input
    buckets = model.bucket_input
    out = model.output_vectors
    ngram_rows = [model._word_ngram_rows(token) for token, _ in sorted(model.vocab.items(), key=lambda kv: kv[1])]
    has_dup = [rows.size != np.unique(rows).size for rows in ngram_rows]

    total_updates = epochs * centers.size
    # All negatives are drawn up front so worker count cannot change draws.
    negative_draws = rng.random((total_updates, negatives)) if negatives > 0 else None

    def run_slice(pair_indices: range, update_offset: int) -> None:
        step = update_offset
        for t in pair_indices:
            w = int(centers[t % centers.size])
            c = int(contexts[t % centers.size])
            lr = learning_rate * max(1e-4, 1.0 - step / total_updates)

            rows = ngram_rows[w]
            h = word_in[w].copy()
            if rows.size:
                h += buckets[rows].sum(axis=0)

            if negatives > 0:
                negs = np.searchsorted(cumulative, negative_draws[step])
                targets = np.concatenate(([c], negs))
            else:
                targets = np.array([c])
            labels = np.zeros(targets.size)
            labels[0] = 1.0
            # A negative that hits the true context is skipped, not updated.
            active = np.ones(targets.size, dtype=bool)
            active[1:] = targets[1:] != c

            scores = _sigmoid(out[targets] @ h)
            g = (labels - scores) * lr * active
            grad_h = g @ out[targets]
            out[targets] += np.outer(g, h)
            word_in[w] += grad_h
            if rows.size:
                if has_dup[w]:
                    np.add.at(buckets, rows, grad_h)
                else:
                    buckets[rows] += grad_h
            step += 1

    if workers <= 1:
        run_slice(range(total_updates), 0)
    else:
        # Hogwild-style: concurrent unsynchronized updates (nondeterministic).
        chunk = math.ceil(total_updates / workers)
        threads = [
            threading.Thread(target=run_slice, args=(range(i * chunk, min((i + 1) * chunk, total_updates)), i * chunk))
            for i in range(workers)
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

    model._composed = None


def _init_vectors(rng: np.random.Generator, rows: int, dims: int) -> np.ndarray:
    return rng.uniform(-0.5 / dims, 0.5 / dims, size=(rows, dims))


def train_embeddings(
    corpus: str | Path,
    dims: int = 300,
    epochs: int = 5,
    window: int = 5,
    negatives: int = 5,
    min_count: int = 5,
    seed: int = 0,
    bucket_count: int = 2_000_000,
    ngram_range: tuple[int, int] = (3, 6),
    learning_rate: float = 0.05,
    workers: int = 1,
) -> EmbeddingModel:
    """Train subword skip-gram embeddings over a normalized plain-text corpus.

    One line of the corpus file is one sentence.  Tokens rarer than
    ``min_count`` are removed from the stream before windowing.  Bucket rows
    are only materialized for n-grams of the actual vocabulary; the hash
    space itself is ``bucket_count`` wide.
    """
    if dims < 2:
        raise ValueError("dims must be >= 2")
    with open(corpus, encoding="utf-8") as handle:
        raw_sentences = [line.split() for line in handle if line.strip()]

    counts: dict[str, int] = {}
    for sentence in raw_sentences:
        for token in sentence:
            counts[token] = counts.get(token, 0) + 1
    kept = {token: count for token, count in counts.items() if count >= min_count}
    if not kept:
        raise ValueError("empty vocabulary: min_count exceeds every token frequency")

    # Rows ordered by descending frequency (ties by token) as usual for SGNS.
    vocab = {token: i for i, (token, _) in enumerate(sorted(kept.items(), key=lambda kv: (-kv[1], kv[0])))}
    sentences = [[vocab[t] for t in sentence if t in vocab] for sentence in raw_sentences]

    rng = np.random.default_rng(seed)
    word_input = _init_vectors(rng, len(vocab), dims)

    bucket_rows: dict[int, int] = {}
    bucket_input = None
    if bucket_count > 0:
        used = sorted({h for token in vocab for h in ngram_hashes(token, *ngram_range, bucket_count)})
        bucket_rows = {bucket: row for row, bucket in enumerate(used)}
        bucket_input = _init_vectors(rng, len(used), dims)

    model = EmbeddingModel(
        dims=dims,
        vocab=vocab,
        word_input=word_input,
        counts=dict(kept),
        ngram_range=ngram_range,
        bucket_count=bucket_count,
        bucket_rows=bucket_rows,
        bucket_input=bucket_input,
    )
    _sgns_epochs(model, sentences, epochs, window, negatives, learning_rate, rng, workers)
    return model


def finetune_embeddings(
    model: EmbeddingModel,
    issue_corpus: Iterable[TokenizedIssue],
    epochs: int,
    seed: int = 0,
    window: int = 5,
    negatives: int = 5,
    learning_rate: float = 0.025,
    workers: int = 1,
) -> EmbeddingModel:
    """Continue the same training objective on issue text; returns a new model.

    The vocabulary is extended with previously unseen project tokens (their
    word vectors start fresh; their n-gram buckets reuse any shared rows).
    Zero epochs returns an unchanged copy.
    """
    issues = list(issue_corpus)
    if epochs == 0:
        return _copy_model(model)

    sentences_tokens = [list(issue.all_tokens()) for issue in issues]
    new_model = _copy_model(model)
    rng = np.random.default_rng(seed)

    counts = dict(new_model.counts)
    new_tokens: list[str] = []
    seen_new: set[str] = set()
    for sentence in sentences_tokens:
        for token in sentence:
            counts[token] = counts.get(token, 0) + 1
            if token not in new_model.vocab and token not in seen_new:
                seen_new.add(token)
                new_tokens.append(token)
    if new_tokens:
        base = len(new_model.vocab)
        for offset, token in enumerate(new_tokens):
            new_model.vocab[token] = base + offset
        new_model.word_input = np.vstack([new_model.word_input, _init_vectors(rng, len(new_tokens), model.dims)])
        if new_model.output_vectors is not None:
            new_model.output_vectors = np.vstack(
                [new_model.output_vectors, np.zeros((len(new_tokens), model.dims))]
            )
        if new_model.bucket_count > 0:
            fresh = sorted(
                {
                    h
                    for token in new_tokens
                    for h in ngram_hashes(token, *new_model.ngram_range, new_model.bucket_count)
                }
                - set(new_model.bucket_rows)
            )
            if fresh:
                base_row = len(new_model.bucket_rows)
                for offset, bucket in enumerate(fresh):
                    new_model.bucket_rows[bucket] = base_row + offset
                new_model.bucket_input = np.vstack(
                    [new_model.bucket_input, _init_vectors(rng, len(fresh), model.dims)]
                )
    new_model.counts = counts

    sentences = [[new_model.vocab[t] for t in sentence] for sentence in sentences_tokens]
    sentences = [s for s in sentences if len(s) > 1]
    if not sentences:
        return new_model
    _sgns_epochs(new_model, sentences, epochs, window, negatives, learning_rate, rng, workers)
    return new_model


def _copy_model(model: EmbeddingModel) -> EmbeddingModel:
    return EmbeddingModel(
        dims=model.dims,
        vocab=dict(model.vocab),
        word_input=model.word_input.copy(),
        counts=dict(model.counts),
        ngram_range=model.ngram_range,
        bucket_count=model.bucket_count,
        bucket_rows=dict(model.bucket_rows),
        bucket_input=None if model.bucket_input is None else model.bucket_input.copy(),
        output_vectors=None if model.output_vectors is None else model.output_vectors.copy(),
    )


def encode_issue_embedding(model: EmbeddingModel, issue: TokenizedIssue) -> np.ndarray:
    """Bag of vectors: mean over the issue's in-vocabulary tokens.

    Out-of-vocabulary tokens are skipped (the dummy-replacement rule), and an
    issue with no known tokens encodes to the zero vector.
    """
    composed = model.composed_matrix()
    rows = [model.vocab[t] for t in issue.all_tokens() if t in model.vocab]
    if not rows:
        return np.zeros(model.dims, dtype=np.float64)
    return composed[rows].mean(axis=0)


def save_embeddings(model: EmbeddingModel, path: str | Path) -> None:
    """Write composed vectors in word2vec text format: header, then one token per line."""
    composed = model.composed_matrix()
    ordered = sorted(model.vocab.items(), key=lambda kv: kv[1])
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(ordered)} {model.dims}\n")
        for token, row in ordered:
            values = " ".join(f"{v:.8g}" for v in composed[row])
            handle.write(f"{token} {values}\n")


def load_embeddings(path: str | Path) -> EmbeddingModel:
    """Load word2vec-text vectors; the result has no subword or output state."""
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ValueError("embedding file must start with '<vocab> <dims>'")
        vocab_size, dims = int(header[0]), int(header[1])
        vocab: dict[str, int] = {}
        vectors = np.zeros((vocab_size, dims), dtype=np.float64)
        for row, line in enumerate(handle):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dims + 1:
                raise ValueError(f"malformed embedding line {row + 2}")
            vocab[parts[0]] = row
            vectors[row] = [float(v) for v in parts[1:]]
    if len(vocab) != vocab_size:
        raise ValueError(f"embedding file declared {vocab_size} tokens but has {len(vocab)}")
    return EmbeddingModel(
        dims=dims,
        vocab=vocab,
        word_input=vectors,
        counts={token: 1 for token in vocab},
        bucket_count=0,
    )
