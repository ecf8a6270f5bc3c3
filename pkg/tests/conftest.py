"""Shared test helpers."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from linklab.dataset import Issue, IssueLink, ProjectDataset

BASE_TIME = datetime(2020, 1, 1, tzinfo=timezone.utc)


def make_issue(
    issue_id: str,
    summary: str = "a summary",
    description: str = "a description",
    issue_type: str = "Bug",
    status: str = "Open",
    days: float = 0.0,
    assignee: str | None = "alice",
    reporter: str = "bob",
    project: str = "TEST",
) -> Issue:
    return Issue(
        id=issue_id,
        summary=summary,
        description=description,
        issue_type=issue_type,
        status=status,
        created=BASE_TIME + timedelta(days=days),
        assignee=assignee,
        reporter=reporter,
        project=project,
    )


def make_dataset(
    n_issues: int = 0,
    links: list[tuple[str, str, str]] | None = None,
    issues: list[Issue] | None = None,
    project: str = "TEST",
) -> ProjectDataset:
    if issues is None:
        issues = [make_issue(f"{project}-{i}", days=i) for i in range(n_issues)]
    return ProjectDataset(
        project=project,
        issues=tuple(issues),
        links=tuple(IssueLink(s, t, label) for s, t, label in (links or [])),
    )


def counts_dataset(counts: dict[str, int], project: str = "TEST") -> ProjectDataset:
    """A dataset whose link labels occur exactly per ``counts``.

    Issues are generated as needed; links fan out from a hub pattern so no
    (source, target, label) triple repeats.
    """
    total = sum(counts.values())
    issues = [make_issue(f"{project}-{i}", days=i) for i in range(total + 1)]
    links = []
    index = 0
    for label in sorted(counts):
        for _ in range(counts[label]):
            links.append(IssueLink(issues[index].id, issues[index + 1].id, label))
            index += 1
    return ProjectDataset(project=project, issues=tuple(issues), links=tuple(links))


@pytest.fixture
def tiny_dataset() -> ProjectDataset:
    return make_dataset(
        issues=[
            make_issue("TEST-1", summary="login fails on restart", days=0),
            make_issue("TEST-2", summary="login crash after upgrade", days=1, issue_type="Task"),
            make_issue("TEST-3", summary="add dark mode", days=2, issue_type="Improvement"),
        ],
        links=[("TEST-1", "TEST-2", "duplicates"), ("TEST-1", "TEST-3", "relates to")],
    )
