"""Normalization pipeline: camel splitting, stopwords, lemma mapping."""

from __future__ import annotations

import numpy as np

from conftest import make_issue
from linklab.textprep import (
    NormalizationConfig,
    default_config,
    normalize_text,
    preprocess_issue,
    split_camel_case,
)


class TestSplitCamelCase:
    def test_mixed_case_run(self):
        assert split_camel_case("getValueFromDB") == ["get", "value", "from", "db"]

    def test_plain_word(self):
        assert split_camel_case("hello") == ["hello"]

    def test_uppercase_run_before_lowercase(self):
        assert split_camel_case("HTTPServer") == ["http", "server"]

    def test_digits_stay_attached(self):
        assert split_camel_case("getDB2Value") == ["get", "db2", "value"]


class TestNormalizeText:
    def test_full_pipeline(self):
        config = NormalizationConfig(
            stopwords=frozenset({"the"}),
            lemmas={"failed": "fail", "tests": "test"},
        )
        assert normalize_text("The QuickTests failed!", config) == ["quick", "test", "fail"]

    def test_empty(self):
        assert normalize_text("", NormalizationConfig()) == []

    def test_punctuation_splits(self):
        assert normalize_text("a-b_c", NormalizationConfig()) == ["a", "b", "c"]

    def test_digit_tokens_kept(self):
        assert normalize_text("error 404 found", NormalizationConfig()) == ["error", "404", "found"]

    def test_idempotent_on_own_output(self):
        config = default_config()
        rng = np.random.default_rng(5)
        samples = [
            "The QuickBrownFox jumped over the LazyDB!",
            "NullPointerException in HiveServer2 while reading ORC files",
            "fixed tests for camelCase splitting (see JIRA-123)",
            " ".join(rng.choice(["Redo", "IOError", "the", "submit42", "hasFailed"], size=30)),
        ]
        for text in samples:
            once = normalize_text(text, config)
            again = normalize_text(" ".join(once), config)
            assert again == once

    def test_output_invariants(self):
        config = default_config()
        tokens = normalize_text("The QUICKFix#42 wasRe-Introduced by HTTPServer!!", config)
        for token in tokens:
            assert token == token.lower()
            assert token.isalnum()
            assert token not in config.stopwords


class TestPreprocessIssue:
    def test_summary_pipeline(self):
        issue = make_issue("A", summary="NullPointerException in HiveServer", description="")
        config = NormalizationConfig(stopwords=frozenset({"in"}))
        tok = preprocess_issue(issue, config)
        assert tok.summary_tokens == ("null", "pointer", "exception", "hive", "server")
        assert tok.description_tokens == ()

    def test_all_stopword_summary(self):
        issue = make_issue("A", summary="the of and", description="real words here")
        config = NormalizationConfig(stopwords=frozenset({"the", "of", "and"}))
        assert preprocess_issue(issue, config).summary_tokens == ()

    def test_fields_normalized_independently(self):
        issue = make_issue("A", summary="alpha beta", description="gamma delta")
        tok = preprocess_issue(issue, NormalizationConfig())
        assert tok.summary_tokens == ("alpha", "beta")
        assert tok.description_tokens == ("gamma", "delta")
        assert tok.all_tokens() == ("alpha", "beta", "gamma", "delta")


def test_bundled_config_loads():
    config = default_config()
    assert "the" in config.stopwords and "in" in config.stopwords
    assert config.lemmas.get("failed") == "fail"
    # lemma targets are fixed points, never stopwords
    for lemma in config.lemmas.values():
        assert config.lemmas.get(lemma, lemma) == lemma
        assert lemma not in config.stopwords
