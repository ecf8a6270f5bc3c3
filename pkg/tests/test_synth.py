"""Synthetic dataset generator: planted rule, noise behavior, determinism."""

from __future__ import annotations

import pytest

from linklab.dataset import validate_dataset
from linklab.synth import (
    SHARED_TOKEN_THRESHOLD,
    default_link_rule,
    generate_synthetic,
    shared_token_count,
    shuffle_link_labels,
)


def test_noise_zero_reproduces_rule_exactly():
    ds = generate_synthetic(400, labels=5, noise=0.0, seed=3)
    issues = ds.issue_map()
    labels = sorted({l.label for l in ds.links} | set())
    from linklab.synth import LABEL_POOL

    label_names = LABEL_POOL[:5]
    for link in ds.links:
        expected = default_link_rule(issues[link.source], issues[link.target], label_names)
        assert link.label == expected


def test_full_noise_agreement_near_chance():
    ds = generate_synthetic(2600, labels=2, noise=1.0, seed=5, links_per_issue=0.45)
    issues = ds.issue_map()
    from linklab.synth import LABEL_POOL

    label_names = LABEL_POOL[:2]
    links = ds.links[:1000]
    assert len(links) == 1000
    agree = sum(
        1
        for link in links
        if link.label == default_link_rule(issues[link.source], issues[link.target], label_names)
    )
    assert agree / len(links) == pytest.approx(0.5, abs=0.05)


def test_same_seed_identical_dataset():
    a = generate_synthetic(150, labels=4, noise=0.3, seed=9)
    b = generate_synthetic(150, labels=4, noise=0.3, seed=9)
    assert a == b
    c = generate_synthetic(150, labels=4, noise=0.3, seed=10)
    assert a != c


def test_generated_dataset_is_valid():
    ds = generate_synthetic(200, labels=5, noise=0.1, seed=1)
    assert validate_dataset(ds).ok


def test_topic_separation_drives_shared_tokens():
    ds = generate_synthetic(300, labels=5, noise=0.0, seed=2)
    issues = ds.issue_map()
    shared = [shared_token_count(issues[l.source], issues[l.target]) for l in ds.links]
    # both sides of the threshold occur, and nothing sits on the boundary gap
    assert any(s >= SHARED_TOKEN_THRESHOLD + 1 for s in shared)
    assert any(s < SHARED_TOKEN_THRESHOLD for s in shared)


def test_label_distribution_is_skewed():
    ds = generate_synthetic(800, labels=5, noise=0.1, seed=7)
    from linklab.dataset import label_distribution

    dist = label_distribution(ds)
    fractions = sorted((f for _, f in dist.values()), reverse=True)
    assert fractions[0] > 0.3  # majority label carries real weight
    assert all(f >= 0.05 for f in fractions)  # nothing vanishes


def test_shuffle_preserves_distribution():
    ds = generate_synthetic(200, labels=4, noise=0.0, seed=4)
    from linklab.dataset import label_distribution

    shuffled = shuffle_link_labels(ds, seed=1)
    assert label_distribution(shuffled) == label_distribution(ds)
    assert shuffled.issues == ds.issues
    assert shuffled != ds


def test_parameter_validation():
    with pytest.raises(ValueError):
        generate_synthetic(10, labels=1)
    with pytest.raises(ValueError):
        generate_synthetic(10, labels=3, noise=1.5)
