"""Core domain model: issues, labeled links, dataset validation and statistics.

A :class:`ProjectDataset` bundles the issues of a single tracker project with
the directed, labeled links between them.  All types are immutable after
construction and every operation here is a pure function, so values can be
shared freely across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

__all__ = [
    "Issue",
    "IssueLink",
    "ProjectDataset",
    "LabelFilterPolicy",
    "Violation",
    "ValidationReport",
    "parse_timestamp",
    "validate_dataset",
    "filter_labels",
    "label_distribution",
    "linked_issue_ratio",
    "dataset_to_dict",
    "dataset_from_dict",
    "load_dataset",
]

# Jira emits timestamps like "2014-03-21T18:11:02.000+0000"; Python 3.10's
# fromisoformat cannot parse the compact offset or a trailing "Z".
_COMPACT_OFFSET = re.compile(r"([+-]\d{2})(\d{2})$")


def parse_timestamp(value: str | datetime) -> datetime:
    """Parse an ISO-8601 timestamp (including Jira's variants) to aware UTC."""
    if isinstance(value, datetime):
        dt = value
    else:
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        text = _COMPACT_OFFSET.sub(r"\1:\2", text)
        try:
            dt = datetime.fromisoformat(text)
        except ValueError as exc:
            raise ValueError(f"unparseable timestamp: {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class Issue:
    """One tracker issue with the text and metadata used for link encoding."""

    id: str
    summary: str
    description: str
    issue_type: str
    status: str
    created: datetime
    reporter: str
    assignee: str | None = None
    project: str = ""


@dataclass(frozen=True)
class IssueLink:
    """A directed link between two issues, labeled with the outward form."""

    source: str
    target: str
    label: str


@dataclass(frozen=True)
class ProjectDataset:
    project: str
    issues: tuple[Issue, ...]
    links: tuple[IssueLink, ...]

    def issue_map(self) -> dict[str, Issue]:
        """Index issues by id (last occurrence wins on duplicates)."""
        return {issue.id: issue for issue in self.issues}


@dataclass(frozen=True)
class LabelFilterPolicy:
    """Thresholds below which a link label is excluded from a dataset.

    A label is dropped when its occurrence count is below ``min_count`` or
    its share of all links is below ``min_fraction`` (either condition is
    enough to drop it).
    """

    min_fraction: float = 0.01
    min_count: int = 20

    def __post_init__(self) -> None:
        if self.min_fraction < 0:
            raise ValueError("min_fraction must be >= 0")
        if self.min_count < 0:
            raise ValueError("min_count must be >= 0")


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]


def validate_dataset(
    dataset: ProjectDataset,
    snapshot_time: datetime | None = None,
    inward_labels: frozenset[str] | None = None,
) -> ValidationReport:
    """Check the dataset invariants, returning one violation per breach.

    Violations are data, not failures; an empty report means the dataset is
    well formed.  ``inward_labels``, when given, flags links stored under an
    inward label form instead of the canonical outward one.
    """
    snapshot = snapshot_time or datetime.now(timezone.utc)
    violations: list[Violation] = []

    seen_ids: set[str] = set()
    for issue in dataset.issues:
        if issue.id in seen_ids:
            violations.append(
                Violation("duplicate-issue-id", issue.id, f"issue id {issue.id!r} appears more than once")
            )
        seen_ids.add(issue.id)
        if issue.created > snapshot:
            violations.append(
                Violation(
                    "future-timestamp",
                    issue.id,
                    f"issue {issue.id!r} created {issue.created.isoformat()} after snapshot",
                )
            )

    seen_links: set[tuple[str, str, str]] = set()
    for link in dataset.links:
        key = (link.source, link.target, link.label)
        if link.source == link.target:
            violations.append(
                Violation("self-link", link.source, f"link on {link.source!r} points at itself")
            )
        for endpoint in (link.source, link.target):
            if endpoint not in seen_ids:
                violations.append(
                    Violation(
                        "dangling-endpoint",
                        endpoint,
                        f"link ({link.source!r}, {link.target!r}, {link.label!r}) references missing issue {endpoint!r}",
                    )
                )
        if key in seen_links:
            violations.append(
                Violation("duplicate-link", f"{link.source}->{link.target}", f"duplicate link triple {key!r}")
            )
        seen_links.add(key)
        if inward_labels and link.label in inward_labels:
            violations.append(
                Violation("inward-label", link.label, f"link label {link.label!r} is an inward form")
            )

    return ValidationReport(tuple(violations))


def label_distribution(dataset: ProjectDataset) -> dict[str, tuple[int, float]]:
    """Map each link label to its (count, fraction of all links).

    Entries are ordered by descending count, ties by label.  Empty link set
    yields an empty map.
    """
    counts: dict[str, int] = {}
    for link in dataset.links:
        counts[link.label] = counts.get(link.label, 0) + 1
    total = len(dataset.links)
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return {label: (count, count / total) for label, count in ordered}


def filter_labels(dataset: ProjectDataset, policy: LabelFilterPolicy) -> ProjectDataset:
    """Drop links whose label fails either threshold of ``policy``.

    Issues are untouched; surviving labels keep their exact link counts.
    Thresholds are evaluated against the dataset as passed in, so the
    operation is idempotent for a fixed policy.
    """
    total = len(dataset.links)
    if total == 0:
        return dataset
    counts: dict[str, int] = {}
    for link in dataset.links:
        counts[link.label] = counts.get(link.label, 0) + 1
    kept = {
        label
        for label, count in counts.items()
        if count >= policy.min_count and count / total >= policy.min_fraction
    }
    return replace(dataset, links=tuple(link for link in dataset.links if link.label in kept))


def linked_issue_ratio(dataset: ProjectDataset) -> float:
    """Fraction of issues that appear as an endpoint of at least one link."""
    if not dataset.issues:
        raise ValueError("empty dataset")
    linked: set[str] = set()
    for link in dataset.links:
        linked.add(link.source)
        linked.add(link.target)
    ids = {issue.id for issue in dataset.issues}
    return len(linked & ids) / len(ids)


# --- JSON schema ------------------------------------------------------------
#
# {"project": str,
#  "issues": [{"id", "summary", "description", "type", "status",
#              "created" (ISO-8601), "assignee" (nullable), "reporter"}],
#  "links": [{"source", "target", "label"}]}


def dataset_to_dict(dataset: ProjectDataset) -> dict:
    return {
        "project": dataset.project,
        "issues": [
            {
                "id": issue.id,
                "summary": issue.summary,
                "description": issue.description,
                "type": issue.issue_type,
                "status": issue.status,
                "created": issue.created.isoformat(),
                "assignee": issue.assignee,
                "reporter": issue.reporter,
            }
            for issue in dataset.issues
        ],
        "links": [
            {"source": link.source, "target": link.target, "label": link.label}
            for link in dataset.links
        ],
    }


def dataset_from_dict(data: Mapping) -> ProjectDataset:
    project = data.get("project", "")
    issues = tuple(
        Issue(
            id=str(entry["id"]),
            summary=entry.get("summary") or "",
            description=entry.get("description") or "",
            issue_type=entry.get("type") or "",
            status=entry.get("status") or "",
            created=parse_timestamp(entry["created"]),
            assignee=entry.get("assignee"),
            reporter=entry.get("reporter") or "",
            project=project,
        )
        for entry in data.get("issues", [])
    )
    links = tuple(
        IssueLink(str(entry["source"]), str(entry["target"]), str(entry["label"]))
        for entry in data.get("links", [])
    )
    return ProjectDataset(project=project, issues=issues, links=links)


def load_dataset(path: str | Path) -> ProjectDataset:
    with open(path, encoding="utf-8") as handle:
        return dataset_from_dict(json.load(handle))
