"""Text normalization for issue summaries, descriptions, and corpora.

The pipeline: strip non-alphanumeric characters, split on whitespace, split
camel-cased tokens, lowercase, drop stopwords, then map tokens through a
dictionary lemma table (identity for unknown tokens).  Output is idempotent:
normalizing already-normalized text changes nothing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from linklab.dataset import Issue

__all__ = [
    "NormalizationConfig",
    "TokenizedIssue",
    "split_camel_case",
    "normalize_text",
    "preprocess_issue",
    "load_stopwords",
    "load_lemmas",
    "default_config",
]

_NON_ALNUM = re.compile(r"[^0-9A-Za-z]+")
# lower/digit followed by upper: getValue -> get Value
_LOWER_TO_UPPER = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
# last letter of an uppercase run followed by lowercase: HTTPServer -> HTTP Server
_UPPER_RUN_END = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")


@dataclass(frozen=True)
class NormalizationConfig:
    """Stopword set and lemma table driving :func:`normalize_text`.

    Stopwords and lemma keys must be lowercase.  The lemma table should map
    to fixed points (a lemma maps to itself) so that normalization stays
    idempotent; :func:`load_lemmas` resolves chains automatically.
    """

    stopwords: frozenset[str] = frozenset()
    lemmas: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class TokenizedIssue:
    issue_id: str
    summary_tokens: tuple[str, ...]
    description_tokens: tuple[str, ...]

    def all_tokens(self) -> tuple[str, ...]:
        return self.summary_tokens + self.description_tokens


def split_camel_case(token: str) -> list[str]:
    """Split at case boundaries and lowercase the parts.

    "getValueFromDB" -> ["get", "value", "from", "db"];
    "HTTPServer" -> ["http", "server"].  Digits stick to their neighbors.
    """
    spaced = _LOWER_TO_UPPER.sub(" ", token)
    spaced = _UPPER_RUN_END.sub(" ", spaced)
    return [part.lower() for part in spaced.split() if part]


def normalize_text(text: str, config: NormalizationConfig) -> list[str]:
    """Run the full normalization pipeline over ``text``."""
    tokens: list[str] = []
    for raw in _NON_ALNUM.sub(" ", text).split():
        for token in split_camel_case(raw):
            if token in config.stopwords:
                continue
            tokens.append(config.lemmas.get(token, token))
    return tokens


def preprocess_issue(issue: Issue, config: NormalizationConfig) -> TokenizedIssue:
    """Normalize summary and description independently."""
    return TokenizedIssue(
        issue_id=issue.id,
        summary_tokens=tuple(normalize_text(issue.summary, config)),
        description_tokens=tuple(normalize_text(issue.description, config)),
    )


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Load a stopword file: one lowercase token per line, '#' comments allowed."""
    words = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            word = line.strip()
            if word and not word.startswith("#"):
                words.add(word.lower())
    return frozenset(words)


def load_lemmas(path: str | Path) -> dict[str, str]:
    """Load a lemma file of ``token<TAB>lemma`` lines.

    Chains (a -> b, b -> c) are resolved to their fixed point so that a
    second normalization pass is a no-op.
    """
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                continue
            token, lemma = parts[0].strip().lower(), parts[1].strip().lower()
            if token and lemma:
                table[token] = lemma
    for token in list(table):
        target = table[token]
        hops = 0
        while target in table and table[target] != target and hops < 10:
            target = table[target]
            hops += 1
        table[token] = target
    return table


@lru_cache(maxsize=1)
def default_config() -> NormalizationConfig:
    """The bundled stopword list and lemma table."""
    data = resources.files("linklab.data")
    with resources.as_file(data / "stopwords.txt") as path:
        stopwords = load_stopwords(path)
    with resources.as_file(data / "lemmas.tsv") as path:
        lemmas = load_lemmas(path)
    # A lemma that rewrites to a stopword would defeat idempotency (step 5
    # runs before step 6); drop such entries defensively.
    lemmas = {token: lemma for token, lemma in lemmas.items() if lemma not in stopwords}
    return NormalizationConfig(stopwords=stopwords, lemmas=lemmas)
