"""Domain types, validation, label filtering, and descriptive statistics."""

from __future__ import annotations

import math

import pytest

from conftest import counts_dataset, make_dataset, make_issue
from linklab.dataset import (
    IssueLink,
    LabelFilterPolicy,
    dataset_from_dict,
    dataset_to_dict,
    filter_labels,
    label_distribution,
    linked_issue_ratio,
    parse_timestamp,
    validate_dataset,
)

# Published per-project label occurrence counts used as fixture data.
AMBARI_COUNTS = {
    "relates to": 310, "duplicates": 305, "blocks": 89, "depends upon": 70,
    "requires": 38, "contains": 27, "is a clone of": 27, "breaks": 26,
    "incorporates": 21, "supercedes": 15, "causes": 6, "Blocked": 5,
    "is a parent of": 2, "Dependent": 1,
}
FLEX_COUNTS = {
    "relates to": 94, "duplicates": 51, "is a clone of": 23, "blocks": 20,
    "requires": 20, "depends upon": 13, "breaks": 14, "incorporates": 8,
    "supercedes": 2, "contains": 2,
}
HIVE_COUNTS = {
    "relates to": 3060, "duplicates": 708, "blocks": 717, "depends upon": 373,
    "requires": 134, "contains": 103, "is a clone of": 71, "breaks": 190,
    "incorporates": 339, "supercedes": 84, "causes": 11, "Blocked": 11,
    "is a parent of": 3, "Dependent": 5, "Dependency": 1, "Parent Feature": 1,
}


class TestValidation:
    def test_dangling_endpoint(self):
        ds = make_dataset(2, links=[("TEST-0", "TEST-9", "blocks")])
        report = validate_dataset(ds)
        assert len(report.by_kind("dangling-endpoint")) == 1
        assert "TEST-9" in report.by_kind("dangling-endpoint")[0].message

    def test_empty_dataset_is_clean(self):
        assert validate_dataset(make_dataset(0)).ok

    def test_self_link(self):
        ds = make_dataset(1, links=[("TEST-0", "TEST-0", "blocks")])
        assert len(validate_dataset(ds).by_kind("self-link")) == 1

    def test_duplicate_link_and_issue(self):
        ds = make_dataset(
            issues=[make_issue("A"), make_issue("A"), make_issue("B")],
            links=[("A", "B", "blocks"), ("A", "B", "blocks")],
        )
        report = validate_dataset(ds)
        assert len(report.by_kind("duplicate-issue-id")) == 1
        assert len(report.by_kind("duplicate-link")) == 1

    def test_future_created(self):
        ds = make_dataset(issues=[make_issue("A", days=0), make_issue("B", days=400)])
        report = validate_dataset(ds, snapshot_time=make_issue("X", days=10).created)
        assert len(report.by_kind("future-timestamp")) == 1


class TestFilterLabels:
    def test_flex_counts(self):
        ds = counts_dataset(FLEX_COUNTS)
        filtered = filter_labels(ds, LabelFilterPolicy())
        dist = label_distribution(filtered)
        assert set(dist) == {"relates to", "duplicates", "is a clone of", "blocks", "requires"}
        assert len(filtered.links) == 208

    def test_ambari_counts(self):
        filtered = filter_labels(counts_dataset(AMBARI_COUNTS), LabelFilterPolicy())
        dist = label_distribution(filtered)
        assert len(dist) == 9
        assert "supercedes" not in dist  # 15 occurrences: above 1% but below min_count
        assert len(filtered.links) == 913

    def test_noop_policy(self):
        ds = counts_dataset({"a": 3, "b": 1})
        assert filter_labels(ds, LabelFilterPolicy(0.0, 0)) == ds

    def test_issues_untouched_and_counts_preserved(self):
        ds = counts_dataset({"a": 30, "b": 5})
        filtered = filter_labels(ds, LabelFilterPolicy(0.01, 20))
        assert filtered.issues == ds.issues
        assert label_distribution(filtered)["a"][0] == 30

    def test_idempotent(self):
        # Fractions rise after filtering, so a second pass drops nothing.
        policy = LabelFilterPolicy(0.1, 10)
        ds = counts_dataset({"a": 50, "b": 12, "c": 11, "d": 3})
        once = filter_labels(ds, policy)
        assert filter_labels(once, policy) == once

    def test_invalid_policy(self):
        with pytest.raises(ValueError):
            LabelFilterPolicy(min_fraction=-0.1)
        with pytest.raises(ValueError):
            LabelFilterPolicy(min_count=-1)


class TestLabelDistribution:
    def test_hive_relates_to_fraction(self):
        dist = label_distribution(counts_dataset(HIVE_COUNTS))
        assert dist["relates to"][1] == pytest.approx(0.5266, abs=1e-4)

    def test_empty(self):
        assert label_distribution(make_dataset(2)) == {}

    def test_direct_counts(self):
        dist = label_distribution(counts_dataset({"A": 2, "B": 1}))
        assert dist == {"A": (2, 2 / 3), "B": (1, 1 / 3)}

    def test_fractions_sum_to_one(self):
        for counts in ({"a": 7}, {"a": 3, "b": 9, "c": 1}, HIVE_COUNTS):
            dist = label_distribution(counts_dataset(counts))
            assert math.isclose(sum(f for _, f in dist.values()), 1.0, abs_tol=1e-9)
            assert sum(c for c, _ in dist.values()) == sum(counts.values())
            assert all(f >= 0 for _, f in dist.values())


class TestLinkedIssueRatio:
    def test_single_link(self):
        ds = make_dataset(5, links=[("TEST-0", "TEST-1", "blocks")])
        assert linked_issue_ratio(ds) == pytest.approx(0.4)

    def test_no_links(self):
        assert linked_issue_ratio(make_dataset(3)) == 0.0

    def test_empty_dataset_errors(self):
        with pytest.raises(ValueError, match="empty dataset"):
            linked_issue_ratio(make_dataset(0))


class TestSerialization:
    def test_round_trip(self, tiny_dataset):
        assert dataset_from_dict(dataset_to_dict(tiny_dataset)) == tiny_dataset

    def test_unicode_preserved(self):
        ds = make_dataset(issues=[make_issue("A", summary="крэш при старте ✨")])
        assert dataset_from_dict(dataset_to_dict(ds)).issues[0].summary == "крэш при старте ✨"

    def test_parse_timestamp_variants(self):
        for text in (
            "2014-03-21T18:11:02.000+0000",
            "2014-03-21T18:11:02Z",
            "2014-03-21T18:11:02+00:00",
            "2014-03-21T19:11:02+01:00",
        ):
            parsed = parse_timestamp(text)
            assert parsed.utcoffset().total_seconds() == 0
            assert (parsed.hour, parsed.minute) == (18, 11)
        with pytest.raises(ValueError, match="unparseable"):
            parse_timestamp("not a date")
