"""Synthetic issue datasets with a planted, recomputable labeling rule.

Issues get templated text: each issue belongs to a topic and samples 8 of
its topic's 10 words, so two same-topic issues always share at least 6
tokens while different-topic issues share at most 4 (fillers and a rare
word).  The default rule labels a link by whether the endpoints share
enough tokens and, if so, by the pair of issue types, which makes the label
learnable from text plus metadata and lets tests recompute every label
directly from the emitted dataset.
"""

from __future__ import annotations

import dataclasses
from datetime import datetime, timedelta, timezone
from typing import Callable, Sequence

import numpy as np

from linklab.dataset import Issue, IssueLink, ProjectDataset

__all__ = [
    "LABEL_POOL",
    "TYPE_POOL",
    "SHARED_TOKEN_THRESHOLD",
    "shared_token_count",
    "default_link_rule",
    "generate_synthetic",
    "shuffle_link_labels",
]

LABEL_POOL = (
    "relates to",
    "blocks",
    "duplicates",
    "requires",
    "breaks",
    "contains",
    "incorporates",
    "supercedes",
    "causes",
    "is a clone of",
)
TYPE_POOL = ("Bug", "Improvement", "New Feature", "Task")
STATUS_POOL = ("Open", "In Progress", "Resolved", "Closed")
FILLER_WORDS = ("build", "deploy", "cluster", "daemon", "upgrade", "restart")

N_TOPICS = 6
TOPIC_WORDS_PER_TOPIC = 10
TOPIC_WORDS_PER_ISSUE = 8  # two issues on one topic overlap in >= 6 topic words
RARE_WORD_POOL = 30
SHARED_TOKEN_THRESHOLD = 5
SAME_TOPIC_LINK_PROB = 0.55


def _topic_word(topic: int, index: int) -> str:
    return f"topic{topic}word{index}"


def shared_token_count(issue_a: Issue, issue_b: Issue) -> int:
    """Number of distinct whitespace tokens the two issues' text shares."""
    tokens_a = set(issue_a.summary.split()) | set(issue_a.description.split())
    tokens_b = set(issue_b.summary.split()) | set(issue_b.description.split())
    return len(tokens_a & tokens_b)


def default_link_rule(issue_a: Issue, issue_b: Issue, labels: Sequence[str]) -> str:
    """Deterministic label from (issue type pair, shared-token count).

    Links between issues sharing fewer than SHARED_TOKEN_THRESHOLD tokens get
    labels[0]; the rest are spread over labels[1:] by the ordered type pair.
    """
    if shared_token_count(issue_a, issue_b) < SHARED_TOKEN_THRESHOLD:
        return labels[0]
    type_a = TYPE_POOL.index(issue_a.issue_type)
    type_b = TYPE_POOL.index(issue_b.issue_type)
    return labels[1 + (type_a * len(TYPE_POOL) + type_b) % (len(labels) - 1)]


def generate_synthetic(
    n_issues: int,
    labels: int | Sequence[str] = 5,
    noise: float = 0.0,
    seed: int = 0,
    rule: Callable[[Issue, Issue, Sequence[str]], str] | None = None,
    links_per_issue: float = 0.25,
    project: str = "SYNTH",
) -> ProjectDataset:
    """Generate a dataset whose link labels follow a planted rule.

    With probability ``noise`` a link's rule label is replaced by a label
    drawn uniformly from the whole label set (so noise=1 leaves an agreement
    rate of 1/|labels| with the rule).  Identical arguments always produce
    an identical dataset.
    """
    if isinstance(labels, int):
        if labels < 2 or labels > len(LABEL_POOL):
            raise ValueError(f"labels must be in [2, {len(LABEL_POOL)}]")
        label_names: tuple[str, ...] = LABEL_POOL[:labels]
    else:
        label_names = tuple(labels)
        if len(label_names) < 2:
            raise ValueError("need at least 2 labels")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must be in [0, 1]")
    rule = rule or default_link_rule

    rng = np.random.default_rng(seed)
    base_time = datetime(2018, 1, 1, tzinfo=timezone.utc)
    users = [f"user{u}" for u in range(15)]
    rare_words = [f"detail{r}" for r in range(RARE_WORD_POOL)]

    issues: list[Issue] = []
    topics: list[int] = []
    for i in range(n_issues):
        topic = int(rng.integers(N_TOPICS))
        topics.append(topic)
        words = [_topic_word(topic, w) for w in rng.permutation(TOPIC_WORDS_PER_TOPIC)[:TOPIC_WORDS_PER_ISSUE]]
        fillers = [FILLER_WORDS[f] for f in rng.permutation(len(FILLER_WORDS))[:3]]
        rare = rare_words[int(rng.integers(RARE_WORD_POOL))]
        # every issue of a topic names its component, like real tracker text
        summary = " ".join([f"component{topic}"] + words[:3] + fillers[:1])
        description = " ".join(words[3:] + fillers[1:] + [rare])
        issues.append(
            Issue(
                id=f"{project}-{i + 1}",
                summary=summary,
                description=description,
                issue_type=TYPE_POOL[int(rng.integers(len(TYPE_POOL)))],
                status=STATUS_POOL[int(rng.integers(len(STATUS_POOL)))],
                created=base_time + timedelta(hours=6 * i),
                assignee=None if rng.random() < 0.1 else users[int(rng.integers(len(users)))],
                reporter=users[int(rng.integers(len(users)))],
                project=project,
            )
        )

    by_topic: dict[int, list[int]] = {}
    for index, topic in enumerate(topics):
        by_topic.setdefault(topic, []).append(index)

    n_links = int(round(links_per_issue * n_issues))
    links: list[IssueLink] = []
    used_pairs: set[tuple[int, int]] = set()
    attempts = 0
    while len(links) < n_links and attempts < 50 * n_links:
        attempts += 1
        a = int(rng.integers(n_issues))
        same_topic_peers = by_topic[topics[a]]
        if rng.random() < SAME_TOPIC_LINK_PROB and len(same_topic_peers) > 1:
            b = same_topic_peers[int(rng.integers(len(same_topic_peers)))]
        else:
            b = int(rng.integers(n_issues))
        if a == b or (a, b) in used_pairs or (b, a) in used_pairs:
            continue
        used_pairs.add((a, b))
        label = rule(issues[a], issues[b], label_names)
        if noise > 0 and rng.random() < noise:
            label = label_names[int(rng.integers(len(label_names)))]
        links.append(IssueLink(issues[a].id, issues[b].id, label))

    return ProjectDataset(project=project, issues=tuple(issues), links=tuple(links))


def shuffle_link_labels(dataset: ProjectDataset, seed: int = 0) -> ProjectDataset:
    """Permute the labels across links, destroying any feature signal while
    keeping the label distribution intact."""
    rng = np.random.default_rng(seed)
    labels = [link.label for link in dataset.links]
    order = rng.permutation(len(labels))
    shuffled = tuple(
        IssueLink(link.source, link.target, labels[order[i]])
        for i, link in enumerate(dataset.links)
    )
    return dataclasses.replace(dataset, links=shuffled)
