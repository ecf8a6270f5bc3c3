"""Hyper-parameter search space, stratified folds, and random search.

The search space reproduces the legal value sets with their defaults:

    SM_k   {1..7}                default 5    SMOTE nearest neighbors
    LR_c   10^{-2..2}            default 1    inverse L2 strength
    RF_e   {10, 100, 1000}       default 10   number of trees
    RF_f   {log2, sqrt}          default sqrt max features per split
    NN_a   10^{-4..-1}           default 1e-4 L2 strength
    NN_dp  {0.1, 0.25, 0.5}      default 0.5  hidden dropout
    NN_e   {25, 50, 75, 100, 125} default 25  training epochs
    NN_lr  10^{-3..0}            default 1e-3 learning rate

Random search samples each relevant key uniformly, with replacement across
trials.  LR and RF trials are scored by mean weighted F1 over an inner
stratified 5-fold CV; NN trials (costlier) use a stratified 25% holdout.
SMOTE, when enabled, is applied to the training portion only.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Mapping, Sequence

import numpy as np

from linklab.learners import (
    ClassifierSpec,
    TrainingDivergedError,
    smote_oversample,
    train_classifier,
)

__all__ = [
    "HyperParamSpace",
    "DEFAULT_SPACE",
    "TrialResult",
    "relevant_keys",
    "default_config",
    "sample_config",
    "stratified_kfold",
    "tune_random_search",
    "write_trial_log",
]

log = logging.getLogger(__name__)

KEYS_BY_KIND = {
    "lr": ("LR_c",),
    "rf": ("RF_e", "RF_f"),
    "nn": ("NN_a", "NN_dp", "NN_e", "NN_lr"),
    "zeror": (),
}

INNER_FOLDS = 5
NN_HOLDOUT_FOLDS = 4  # one fold of four = the 25% validation holdout


@dataclass(frozen=True)
class HyperParamSpace:
    values: Mapping[str, tuple]
    defaults: Mapping[str, object]

    def __post_init__(self) -> None:
        for key, default in self.defaults.items():
            if default not in self.values.get(key, ()):
                raise ValueError(f"default {default!r} for {key} is not in its legal set")


DEFAULT_SPACE = HyperParamSpace(
    values={
        "SM_k": (1, 2, 3, 4, 5, 6, 7),
        "LR_c": (0.01, 0.1, 1.0, 10.0, 100.0),
        "RF_e": (10, 100, 1000),
        "RF_f": ("log2", "sqrt"),
        "NN_a": (1e-4, 1e-3, 1e-2, 1e-1),
        "NN_dp": (0.1, 0.25, 0.5),
        "NN_e": (25, 50, 75, 100, 125),
        "NN_lr": (1e-3, 1e-2, 1e-1, 1.0),
    },
    defaults={
        "SM_k": 5,
        "LR_c": 1.0,
        "RF_e": 10,
        "RF_f": "sqrt",
        "NN_a": 1e-4,
        "NN_dp": 0.5,
        "NN_e": 25,
        "NN_lr": 1e-3,
    },
)


def relevant_keys(kind: str, smote_enabled: bool) -> tuple[str, ...]:
    keys = KEYS_BY_KIND[kind]
    return (("SM_k",) if smote_enabled else ()) + keys


def default_config(kind: str, smote_enabled: bool = False, seed: int = 0) -> ClassifierSpec:
    """The bold-default configuration for a classifier kind."""
    params = {key: DEFAULT_SPACE.defaults[key] for key in relevant_keys(kind, smote_enabled)}
    return ClassifierSpec(kind=kind, hyper_params=params, smote_enabled=smote_enabled, seed=seed)


def sample_config(
    space: HyperParamSpace,
    kind: str,
    smote_enabled: bool,
    rng: np.random.Generator,
) -> ClassifierSpec:
    """Sample each relevant key uniformly from its legal set."""
    params = {}
    for key in relevant_keys(kind, smote_enabled):
        choices = space.values[key]
        params[key] = choices[int(rng.integers(len(choices)))]
    return ClassifierSpec(kind=kind, hyper_params=params, smote_enabled=smote_enabled)


def stratified_kfold(y: Sequence[str], k: int, seed: int = 0) -> list[np.ndarray]:
    """Split indices into k folds whose per-class counts differ by at most 1.

    Within each class the indices are shuffled by the seed, then dealt
    round-robin; the starting fold rotates across classes so fold sizes stay
    balanced.  The folds partition range(len(y)) exactly.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(y):
        raise ValueError(f"cannot split {len(y)} samples into {k} folds")
    rng = np.random.default_rng(seed)
    y_array = np.array(list(y), dtype=object)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for label in sorted(set(y)):
        members = np.flatnonzero(y_array == label)
        members = members[rng.permutation(members.size)]
        for j, index in enumerate(members):
            folds[(offset + j) % k].append(int(index))
        offset = (offset + members.size) % k
    return [np.array(sorted(fold), dtype=np.int64) for fold in folds]


@dataclass
class TrialResult:
    trial: int
    spec: ClassifierSpec
    score: float
    fold_scores: list[float]
    seconds: float

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "trial": self.trial,
                "config": dict(self.spec.hyper_params),
                "score": self.score,
                "seconds": round(self.seconds, 6),
            },
            sort_keys=True,
        )


def _score_split(
    spec: ClassifierSpec,
    X: np.ndarray,
    y: list[str],
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    smote_seed: int,
) -> float:
    from linklab.experiments import weighted_f1  # late import; experiments imports tuning

    X_train, y_train = X[train_idx], [y[i] for i in train_idx]
    if spec.smote_enabled:
        X_train, y_train = smote_oversample(
            X_train, y_train, k=int(spec.hyper_params.get("SM_k", 5)), seed=smote_seed
        )
    try:
        model = train_classifier(spec, X_train, y_train)
    except TrainingDivergedError as exc:
        log.warning("trial configuration diverged (%s); scoring 0", exc)
        return 0.0
    predictions = model.predict(X[val_idx])
    score, _ = weighted_f1([y[i] for i in val_idx], predictions)
    return score


def tune_random_search(
    kind: str,
    X: np.ndarray,
    y: Sequence[str],
    space: HyperParamSpace = DEFAULT_SPACE,
    n_trials: int = 20,
    seed: int = 0,
    smote_enabled: bool = False,
    jobs: int = 1,
) -> tuple[ClassifierSpec, list[TrialResult]]:
    """Random search over ``space``; returns (best spec, all trial results).

    The best trial is the argmax of the validation score, ties going to the
    earliest trial.  Per-trial seeds are ``seed + trial_index``, so reruns
    (and any worker count) reproduce the identical trial sequence.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = list(y)

    if kind == "nn":
        holdout_folds = stratified_kfold(y, NN_HOLDOUT_FOLDS, seed)
        val_idx = holdout_folds[0]
        train_idx = np.setdiff1d(np.arange(len(y)), val_idx)
        splits = [(train_idx, val_idx)]
    else:
        folds = stratified_kfold(y, INNER_FOLDS, seed)
        everything = np.arange(len(y))
        splits = [(np.setdiff1d(everything, fold), fold) for fold in folds]

    def run_trial(trial: int) -> TrialResult:
        trial_seed = seed + trial
        started = time.perf_counter()
        spec = replace(sample_config(space, kind, smote_enabled, np.random.default_rng(trial_seed)), seed=trial_seed)
        fold_scores = [
            _score_split(spec, X, y, train_idx, val_idx, smote_seed=trial_seed + fold)
            for fold, (train_idx, val_idx) in enumerate(splits)
        ]
        score = float(np.mean(fold_scores))
        return TrialResult(trial, spec, score, fold_scores, time.perf_counter() - started)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_trial, range(n_trials)))
    else:
        results = [run_trial(trial) for trial in range(n_trials)]

    best = results[0]
    for result in results[1:]:
        if result.score > best.score:
            best = result
    return best.spec, results


def write_trial_log(results: Sequence[TrialResult], sink: IO[str]) -> None:
    """Emit one JSON object per trial, one per line."""
    for result in results:
        sink.write(result.to_json_line() + "\n")
