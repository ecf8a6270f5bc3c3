"""Classifiers and oversampling: softmax regression, random forest, a one
hidden-layer network, the ZeroR majority baseline, and SMOTE.

Softmax regression and the network are implemented directly (full-batch and
mini-batch gradient descent respectively) so their gradients can be verified
against finite differences.  The random forest wraps scikit-learn's Gini
forest behind the same interface: bootstrap samples of size n, a random
feature subset per split (sqrt or log2 of the encoding width, min 1), trees
grown until pure or fewer than two samples, soft-vote prediction from
averaged per-tree class frequencies.  All training is deterministic per seed;
trained models are immutable and safe to share across threads.
"""

from __future__ import annotations

import base64
import pickle
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn import config_context
from sklearn.tree import DecisionTreeClassifier

__all__ = [
    "ClassifierSpec",
    "TrainingDivergedError",
    "ZeroRClassifier",
    "LogisticRegressionClassifier",
    "NeuralNetClassifier",
    "RandomForestModel",
    "smote_oversample",
    "train_zeror",
    "train_logistic_regression",
    "train_random_forest",
    "train_neural_network",
    "train_classifier",
    "softmax",
    "lr_loss_and_grad",
    "nn_loss_and_grad",
    "classifier_to_dict",
    "classifier_from_dict",
]

KIND_HYPER_KEYS = {
    "lr": ("LR_c",),
    "rf": ("RF_e", "RF_f"),
    "nn": ("NN_a", "NN_dp", "NN_e", "NN_lr"),
    "zeror": (),
}


class TrainingDivergedError(RuntimeError):
    """Raised when a loss becomes non-finite during training."""


@dataclass(frozen=True)
class ClassifierSpec:
    """A classifier kind plus the hyper-parameters used to train it."""

    kind: str
    hyper_params: Mapping[str, object] = field(default_factory=dict)
    smote_enabled: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KIND_HYPER_KEYS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")


def _sorted_labels(y: Sequence[str]) -> list[str]:
    return sorted(set(y))


def _encode_labels(y: Sequence[str], labels: Sequence[str]) -> np.ndarray:
    index = {label: i for i, label in enumerate(labels)}
    return np.array([index[v] for v in y], dtype=np.int64)


def _check_features(X: np.ndarray, expected: int | None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if expected is not None and X.shape[1] != expected:
        raise ValueError(f"feature width {X.shape[1]} does not match training width {expected}")
    return X


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


# --- SMOTE ----------------------------------------------------------------


def smote_oversample(
    X: np.ndarray,
    y: Sequence[str],
    k: int = 5,
    seed: int = 0,
) -> tuple[np.ndarray, list[str]]:
    """Oversample every minority class up to the majority class count.

    Each synthetic point is x + u * (x_nn - x) with u ~ Uniform(0, 1) and
    x_nn one of x's k nearest same-class neighbors (Euclidean).  The original
    rows are preserved, unchanged and first in the output.  A singleton class
    is duplicated with a warning; k is clamped to class_size - 1 when a class
    has fewer than k + 1 members.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    labels = _sorted_labels(y)
    if len(labels) < 2:
        raise ValueError("SMOTE needs at least 2 classes")

    indices = {label: np.flatnonzero(np.array(y, dtype=object) == label) for label in labels}
    majority = max(len(rows) for rows in indices.values())
    rng = np.random.default_rng(seed)

    synth_rows: list[np.ndarray] = []
    synth_labels: list[str] = []
    for label in labels:
        rows = indices[label]
        need = majority - len(rows)
        if need == 0:
            continue
        points = X[rows]
        if len(rows) == 1:
            warnings.warn(f"class {label!r} has a single sample; duplicating it", stacklevel=2)
            synth_rows.extend([points[0].copy() for _ in range(need)])
            synth_labels.extend([label] * need)
            continue
        k_eff = min(k, len(rows) - 1)
        # Squared pairwise distances via the gram matrix; self excluded.
        sq = (points * points).sum(axis=1)
        distance = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
        np.fill_diagonal(distance, np.inf)
        neighbor_order = np.argsort(distance, axis=1, kind="stable")[:, :k_eff]
        for _ in range(need):
            src = int(rng.integers(len(rows)))
            nn = int(neighbor_order[src, int(rng.integers(k_eff))])
            u = rng.random()
            synth_rows.append(points[src] + u * (points[nn] - points[src]))
            synth_labels.append(label)

    if not synth_rows:
        return X, y
    return np.vstack([X, np.array(synth_rows)]), y + synth_labels


# --- ZeroR ------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroRClassifier:
    labels: tuple[str, ...]
    majority_label: str
    spec: ClassifierSpec = field(default_factory=lambda: ClassifierSpec("zeror"))
    kind: str = "zeror"
    n_features: int | None = None

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_features(X, self.n_features)
        proba = np.zeros((X.shape[0], len(self.labels)))
        proba[:, self.labels.index(self.majority_label)] = 1.0
        return proba

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.labels[i] for i in self.predict_proba(X).argmax(axis=1)]


def train_zeror(y: Sequence[str], spec: ClassifierSpec | None = None) -> ZeroRClassifier:
    """Majority-class baseline; ties break to the lexicographically first label."""
    y = list(y)
    if not y:
        raise ValueError("empty label sequence")
    labels = _sorted_labels(y)
    counts = [y.count(label) for label in labels]
    majority = labels[int(np.argmax(counts))]
    return ZeroRClassifier(tuple(labels), majority, spec or ClassifierSpec("zeror"))


# --- Logistic regression ------------------------------------------------


def lr_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    y_codes: np.ndarray,
    c: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + ||W||^2 / (2C); bias unregularized."""
    n = X.shape[0]
    proba = softmax(X @ weights.T + bias)
    log_likelihood = -np.log(np.maximum(proba[np.arange(n), y_codes], 1e-300)).mean()
    loss = log_likelihood + (weights * weights).sum() / (2.0 * c)

    delta = proba
    delta[np.arange(n), y_codes] -= 1.0
    grad_w = delta.T @ X / n + weights / c
    grad_b = delta.sum(axis=0) / n
    return float(loss), grad_w, grad_b


@dataclass(frozen=True)
class LogisticRegressionClassifier:
    labels: tuple[str, ...]
    weights: np.ndarray
    bias: np.ndarray
    spec: ClassifierSpec
    kind: str = "lr"

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_features(X, self.n_features)
        return softmax(X @ self.weights.T + self.bias)

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.labels[i] for i in self.predict_proba(X).argmax(axis=1)]


def train_logistic_regression(
    X: np.ndarray,
    y: Sequence[str],
    c: float = 1.0,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-6,
    spec: ClassifierSpec | None = None,
) -> LogisticRegressionClassifier:
    """Multinomial softmax regression by full-batch gradient descent.

    Zero-initialized, so training is deterministic regardless of seed.  Step
    sizes come from Armijo backtracking, which keeps the loss non-increasing;
    iteration stops at ``max_iter`` steps or when the gradient infinity norm
    drops below ``tol``.
    """
    if c <= 0:
        raise ValueError("C must be > 0")
    X = _check_features(X, None)
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    labels = _sorted_labels(y)
    if len(labels) < 2:
        raise ValueError("need at least 2 classes")
    y_codes = _encode_labels(y, labels)

    n_classes, n_features = len(labels), X.shape[1]
    weights = np.zeros((n_classes, n_features))
    bias = np.zeros(n_classes)
    step = 1.0
    loss, grad_w, grad_b = lr_loss_and_grad(weights, bias, X, y_codes, c)
    for _ in range(max_iter):
        grad_norm = max(np.abs(grad_w).max(), np.abs(grad_b).max())
        if grad_norm < tol:
            break
        grad_sq = (grad_w * grad_w).sum() + (grad_b * grad_b).sum()
        while step > 1e-18:
            new_w = weights - step * grad_w
            new_b = bias - step * grad_b
            new_loss, new_gw, new_gb = lr_loss_and_grad(new_w, new_b, X, y_codes, c)
            if new_loss <= loss - 1e-4 * step * grad_sq:
                break
            step *= 0.5
        else:
            break
        weights, bias = new_w, new_b
        loss, grad_w, grad_b = new_loss, new_gw, new_gb
        step = min(step * 2.0, 1e6)

    return LogisticRegressionClassifier(
        tuple(labels), weights, bias, spec or ClassifierSpec("lr", {"LR_c": c}, seed=seed)
    )


# --- Neural network -------------------------------------------------------


def nn_loss_and_grad(
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    X: np.ndarray,
    y_codes: np.ndarray,
    alpha: float,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Loss and gradients of input -> hidden(tanh) -> softmax.

    Loss is mean cross-entropy + alpha * (||W1||^2 + ||W2||^2) / 2 (biases
    unregularized).  ``dropout_mask``, when given, is the inverted-dropout
    mask applied to the hidden activations (training only).
    """
    n = X.shape[0]
    hidden = np.tanh(X @ w1.T + b1)
    hidden_used = hidden if dropout_mask is None else hidden * dropout_mask
    logits = hidden_used @ w2.T + b2
    proba = softmax(logits)
    log_likelihood = -np.log(np.maximum(proba[np.arange(n), y_codes], 1e-300)).mean()
    with np.errstate(over="ignore"):  # an inf loss is how divergence is detected
        loss = log_likelihood + alpha * ((w1 * w1).sum() + (w2 * w2).sum()) / 2.0

    delta_out = proba
    delta_out[np.arange(n), y_codes] -= 1.0
    delta_out /= n
    grad_w2 = delta_out.T @ hidden_used + alpha * w2
    grad_b2 = delta_out.sum(axis=0)
    delta_hidden = delta_out @ w2
    if dropout_mask is not None:
        delta_hidden = delta_hidden * dropout_mask
    delta_hidden = delta_hidden * (1.0 - hidden * hidden)
    grad_w1 = delta_hidden.T @ X + alpha * w1
    grad_b1 = delta_hidden.sum(axis=0)
    return float(loss), (grad_w1, grad_b1, grad_w2, grad_b2)


@dataclass(frozen=True)
class NeuralNetClassifier:
    labels: tuple[str, ...]
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    spec: ClassifierSpec
    kind: str = "nn"

    @property
    def n_features(self) -> int:
        return self.w1.shape[1]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_features(X, self.n_features)
        hidden = np.tanh(X @ self.w1.T + self.b1)
        return softmax(hidden @ self.w2.T + self.b2)

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.labels[i] for i in self.predict_proba(X).argmax(axis=1)]


def train_neural_network(
    X: np.ndarray,
    y: Sequence[str],
    alpha: float = 1e-4,
    dropout: float = 0.5,
    epochs: int = 25,
    learning_rate: float = 1e-3,
    seed: int = 0,
    hidden_units: int = 128,
    batch_size: int = 32,
    spec: ClassifierSpec | None = None,
) -> NeuralNetClassifier:
    """Mini-batch gradient descent with shuffling and inverted dropout.

    Raises :class:`TrainingDivergedError` naming the epoch if the loss goes
    non-finite.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must be in [0, 1)")
    if learning_rate <= 0:
        raise ValueError("learning rate must be > 0")
    X = _check_features(X, None)
    if not np.isfinite(X).all():
        raise ValueError("non-finite feature values")
    labels = _sorted_labels(y)
    if len(labels) < 2:
        raise ValueError("need at least 2 classes")
    y_codes = _encode_labels(y, labels)

    n, n_features = X.shape
    n_classes = len(labels)
    rng = np.random.default_rng(seed)
    limit1 = np.sqrt(6.0 / (n_features + hidden_units))
    limit2 = np.sqrt(6.0 / (hidden_units + n_classes))
    w1 = rng.uniform(-limit1, limit1, size=(hidden_units, n_features))
    b1 = np.zeros(hidden_units)
    w2 = rng.uniform(-limit2, limit2, size=(n_classes, hidden_units))
    b2 = np.zeros(n_classes)
    keep = 1.0 - dropout

    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            mask = None
            if dropout > 0:
                mask = (rng.random((batch.size, hidden_units)) < keep) / keep
            loss, (g1, gb1, g2, gb2) = nn_loss_and_grad(
                w1, b1, w2, b2, X[batch], y_codes[batch], alpha, mask
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"training diverged at epoch {epoch}")
            w1 -= learning_rate * g1
            b1 -= learning_rate * gb1
            w2 -= learning_rate * g2
            b2 -= learning_rate * gb2

    if not (np.isfinite(w1).all() and np.isfinite(w2).all()):
        raise TrainingDivergedError(f"training diverged at epoch {epochs - 1}")
    return NeuralNetClassifier(
        tuple(labels),
        w1,
        b1,
        w2,
        b2,
        spec
        or ClassifierSpec(
            "nn", {"NN_a": alpha, "NN_dp": dropout, "NN_e": epochs, "NN_lr": learning_rate}, seed=seed
        ),
    )


# --- Random forest ---------------------------------------------------------


def _resolve_max_features(max_features: str | Callable[[int], int] | None, width: int) -> int:
    if max_features is None:
        return width
    if callable(max_features):
        return min(width, max(1, int(max_features(width))))
    if max_features == "sqrt":
        return max(1, int(np.sqrt(width)))
    if max_features == "log2":
        return max(1, int(np.log2(width)))
    raise ValueError(f"max_features must be 'sqrt', 'log2', a callable, or None, not {max_features!r}")


@dataclass(frozen=True)
class RandomForestModel:
    """Bagged Gini trees; prediction averages per-tree class frequencies."""

    labels: tuple[str, ...]
    trees: tuple[DecisionTreeClassifier, ...]
    tree_seeds: tuple[int, ...]
    n_train_samples: int
    n_features: int
    bootstrap: bool
    spec: ClassifierSpec
    kind: str = "rf"

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_features(X, self.n_features)
        X32 = np.ascontiguousarray(X, dtype=np.float32)
        proba = np.zeros((X.shape[0], len(self.labels)))
        for tree in self.trees:
            columns = tree.classes_.astype(np.int64)
            proba[:, columns] += tree.predict_proba(X32, check_input=False)
        return proba / len(self.trees)

    def predict(self, X: np.ndarray) -> list[str]:
        return [self.labels[i] for i in self.predict_proba(X).argmax(axis=1)]

    def bootstrap_indices(self) -> list[np.ndarray]:
        """Per-tree bootstrap sample indices, reproducible from the seed."""
        if not self.bootstrap:
            return [np.arange(self.n_train_samples) for _ in self.trees]
        return [
            np.random.default_rng(tree_seed).integers(0, self.n_train_samples, size=self.n_train_samples)
            for tree_seed in self.tree_seeds
        ]

    def oob_indices(self) -> list[np.ndarray]:
        return [
            np.setdiff1d(np.arange(self.n_train_samples), taken)
            for taken in self.bootstrap_indices()
        ]


def train_random_forest(
    X: np.ndarray,
    y: Sequence[str],
    n_estimators: int = 10,
    max_features: str | Callable[[int], int] | None = "sqrt",
    seed: int = 0,
    bootstrap: bool = True,
    spec: ClassifierSpec | None = None,
) -> RandomForestModel:
    """Gini forest grown to purity with soft-vote (averaged frequency) prediction.

    Each tree trains on a bootstrap sample of size n (drawn from this seed,
    so out-of-bag indices are reproducible); at each split the tree considers
    a random feature subset of ``max_features`` size: "sqrt" or "log2" (floor
    of the respective function of the encoding width, never below 1), a
    callable on the width, or None for all features.  ``bootstrap=False``
    with ``max_features=None`` is the deterministic single-tree test mode.
    """
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    X = _check_features(X, None)
    labels = _sorted_labels(y)
    y_codes = _encode_labels(y, labels)
    n = X.shape[0]
    resolved = _resolve_max_features(max_features, X.shape[1])
    X32 = np.ascontiguousarray(X, dtype=np.float32)

    rng = np.random.default_rng(seed)
    tree_seeds = tuple(int(s) for s in rng.integers(0, 2**31 - 1, size=n_estimators))
    split_rng = np.random.RandomState(seed)  # shared by all splitters, drawn in tree order
    trees = []
    # Inputs are validated once up front, so per-tree revalidation is skipped.
    with config_context(skip_parameter_validation=True):
        for tree_seed in tree_seeds:
            if bootstrap:
                sample = np.random.default_rng(tree_seed).integers(0, n, size=n)
            else:
                sample = np.arange(n)
            tree = DecisionTreeClassifier(
                criterion="gini", max_features=resolved, random_state=split_rng
            )
            tree.fit(X32[sample], y_codes[sample], check_input=False)
            trees.append(tree)

    return RandomForestModel(
        tuple(labels),
        tuple(trees),
        tree_seeds,
        n,
        X.shape[1],
        bootstrap,
        spec or ClassifierSpec("rf", {"RF_e": n_estimators, "RF_f": max_features}, seed=seed),
    )


# --- Dispatch and serialization --------------------------------------------


Classifier = ZeroRClassifier | LogisticRegressionClassifier | NeuralNetClassifier | RandomForestModel


def train_classifier(spec: ClassifierSpec, X: np.ndarray, y: Sequence[str]) -> Classifier:
    """Train the classifier described by ``spec`` (SMOTE is the caller's job)."""
    params = dict(spec.hyper_params)
    if spec.kind == "zeror":
        return train_zeror(y, spec)
    if spec.kind == "lr":
        return train_logistic_regression(X, y, c=float(params.get("LR_c", 1.0)), seed=spec.seed, spec=spec)
    if spec.kind == "rf":
        return train_random_forest(
            X,
            y,
            n_estimators=int(params.get("RF_e", 10)),
            max_features=params.get("RF_f", "sqrt"),
            seed=spec.seed,
            spec=spec,
        )
    if spec.kind == "nn":
        return train_neural_network(
            X,
            y,
            alpha=float(params.get("NN_a", 1e-4)),
            dropout=float(params.get("NN_dp", 0.5)),
            epochs=int(params.get("NN_e", 25)),
            learning_rate=float(params.get("NN_lr", 1e-3)),
            seed=spec.seed,
            spec=spec,
        )
    raise ValueError(f"unknown classifier kind {spec.kind!r}")


def _spec_to_dict(spec: ClassifierSpec) -> dict:
    return {
        "kind": spec.kind,
        "hyper_params": dict(spec.hyper_params),
        "smote_enabled": spec.smote_enabled,
        "seed": spec.seed,
    }


def classifier_to_dict(model: Classifier) -> dict:
    """JSON-compatible payload; forest parameters ride as base64 pickle."""
    data: dict = {"kind": model.kind, "labels": list(model.labels), "spec": _spec_to_dict(model.spec)}
    if isinstance(model, ZeroRClassifier):
        data["majority_label"] = model.majority_label
    elif isinstance(model, LogisticRegressionClassifier):
        data["weights"] = model.weights.tolist()
        data["bias"] = model.bias.tolist()
    elif isinstance(model, NeuralNetClassifier):
        data["w1"] = model.w1.tolist()
        data["b1"] = model.b1.tolist()
        data["w2"] = model.w2.tolist()
        data["b2"] = model.b2.tolist()
    elif isinstance(model, RandomForestModel):
        data["forest_pickle"] = base64.b64encode(pickle.dumps(model.trees)).decode("ascii")
        data["tree_seeds"] = list(model.tree_seeds)
        data["n_train_samples"] = model.n_train_samples
        data["n_features"] = model.n_features
        data["bootstrap"] = model.bootstrap
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return data


def classifier_from_dict(data: Mapping) -> Classifier:
    spec = ClassifierSpec(
        kind=data["spec"]["kind"],
        hyper_params=dict(data["spec"]["hyper_params"]),
        smote_enabled=bool(data["spec"]["smote_enabled"]),
        seed=int(data["spec"]["seed"]),
    )
    labels = tuple(data["labels"])
    kind = data["kind"]
    if kind == "zeror":
        return ZeroRClassifier(labels, data["majority_label"], spec)
    if kind == "lr":
        return LogisticRegressionClassifier(
            labels, np.array(data["weights"]), np.array(data["bias"]), spec
        )
    if kind == "nn":
        return NeuralNetClassifier(
            labels,
            np.array(data["w1"]),
            np.array(data["b1"]),
            np.array(data["w2"]),
            np.array(data["b2"]),
            spec,
        )
    if kind == "rf":
        trees = pickle.loads(base64.b64decode(data["forest_pickle"]))
        return RandomForestModel(
            labels,
            tuple(trees),
            tuple(data["tree_seeds"]),
            int(data["n_train_samples"]),
            int(data["n_features"]),
            bool(data["bootstrap"]),
            spec,
        )
    raise ValueError(f"unknown classifier kind {kind!r}")
