"""Feasibility classifier on scaled transfer features.

A dense sigmoid-head network trained with binary cross-entropy on labeled
pipeline rows. It serves as the fast validation probe inside adversarial
training and as a secondary evaluation metric; the analytic oracle stays the
ground truth.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .nn import (AdamState, DenseNet, NetworkConfig, adam_step, backward,
                 bce_loss, forward, init_network, net_from_doc, net_to_doc)
from .pipeline import FEATURE_NAMES

N_FEATURES = len(FEATURE_NAMES)

BALANCE_UNDERSAMPLE = "undersample"
BALANCE_NONE = "none"

DEFAULT_NET = NetworkConfig(input_dim=N_FEATURES, output_dim=1, n_layers=4,
                            n_neurons=64, dropout_rate=0.0, learning_rate=1e-3,
                            output_activation="sigmoid")


class ClassifierError(Exception):
    """Base class for classifier failures."""


class SingleClassError(ClassifierError):
    """The labeled data holds only one class; nothing to separate."""


@dataclass(frozen=True)
class ClassifierConfig:
    """Network, decision threshold, and training knobs."""
    net: NetworkConfig = DEFAULT_NET
    threshold: float = 0.5
    balance: str = BALANCE_UNDERSAMPLE
    n_epochs: int = 150
    batch_size: int = 128
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.balance not in (BALANCE_UNDERSAMPLE, BALANCE_NONE):
            raise ValueError(f"unknown balance policy {self.balance!r}")
        if self.net.input_dim != N_FEATURES:
            raise ValueError(f"classifier input_dim must be {N_FEATURES}, "
                             f"got {self.net.input_dim}")
        if self.net.output_dim != 1:
            raise ValueError(f"classifier output_dim must be 1, got {self.net.output_dim}")
        if self.net.output_activation != "sigmoid":
            raise ValueError("classifier head must be sigmoid")
        if self.n_epochs < 1:
            raise ValueError(f"n_epochs must be >= 1, got {self.n_epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0.0 < self.holdout_fraction < 1.0):
            raise ValueError(f"holdout_fraction must be in (0, 1), "
                             f"got {self.holdout_fraction}")

    def to_dict(self) -> dict:
        return {
            "net": {
                "input_dim": self.net.input_dim,
                "output_dim": self.net.output_dim,
                "n_layers": self.net.n_layers,
                "n_neurons": self.net.n_neurons,
                "dropout_rate": self.net.dropout_rate,
                "learning_rate": self.net.learning_rate,
                "output_activation": self.net.output_activation,
            },
            "threshold": self.threshold,
            "balance": self.balance,
            "n_epochs": self.n_epochs,
            "batch_size": self.batch_size,
            "holdout_fraction": self.holdout_fraction,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ClassifierConfig":
        return ClassifierConfig(
            net=NetworkConfig(**doc["net"]),
            threshold=doc["threshold"],
            balance=doc["balance"],
            n_epochs=doc["n_epochs"],
            batch_size=doc["batch_size"],
            holdout_fraction=doc["holdout_fraction"],
        )


@dataclass(frozen=True)
class ClassifierMetrics:
    """Held-out performance of one training run.

    holdout_indices index into the feature/label arrays passed to
    train_classifier, so the reported numbers can be reproduced exactly.
    """
    accuracy: float
    precision: float
    recall: float
    n_train: int
    n_holdout: int
    holdout_indices: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "holdout_indices",
                           tuple(int(i) for i in self.holdout_indices))
        for name in ("accuracy", "precision", "recall"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "n_train": self.n_train,
            "n_holdout": self.n_holdout,
            "holdout_indices": list(self.holdout_indices),
        }

    @staticmethod
    def from_dict(doc: dict) -> "ClassifierMetrics":
        return ClassifierMetrics(
            accuracy=doc["accuracy"], precision=doc["precision"],
            recall=doc["recall"], n_train=doc["n_train"],
            n_holdout=doc["n_holdout"],
            holdout_indices=tuple(doc["holdout_indices"]),
        )


class FeasibilityClassifier:
    """Frozen network plus its decision threshold.

    Features are consumed as (n_features, n) column batches in scaled space.
    """

    def __init__(self, net: DenseNet, threshold: float = 0.5):
        if net.config.output_dim != 1 or net.config.output_activation != "sigmoid":
            raise ValueError("classifier network must have a 1-wide sigmoid head")
        if not (0.0 < threshold < 1.0):
            raise ValueError(f"threshold must be in (0, 1), got {threshold}")
        self.net = net
        self.threshold = threshold

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Feasibility probabilities for a (n_features, n) column batch."""
        features = np.asarray(features, dtype=float)
        probs, _ = forward(self.net, features, mode="eval")
        return probs[0]

    def predict_feasible(self, features: np.ndarray,
                         threshold: float | None = None) -> np.ndarray:
        """Boolean feasibility flags: probability >= threshold."""
        threshold = self.threshold if threshold is None else threshold
        if not (0.0 < threshold < 1.0):
            raise ValueError(f"threshold must be in (0, 1), got {threshold}")
        return self.predict(features) >= threshold


def _undersample_majority(labels: np.ndarray,
                          rng: np.random.Generator) -> np.ndarray:
    """Indices of a balanced subset: all of the minority class, an equal-size
    random draw of the majority."""
    idx0 = np.flatnonzero(labels == 0)
    idx1 = np.flatnonzero(labels == 1)
    k = min(idx0.size, idx1.size)
    if idx0.size > k:
        idx0 = rng.choice(idx0, size=k, replace=False)
    if idx1.size > k:
        idx1 = rng.choice(idx1, size=k, replace=False)
    return np.concatenate([idx0, idx1])


def train_classifier(features: np.ndarray, labels: np.ndarray,
                     config: ClassifierConfig | None = None,
                     seed: int = 0) -> tuple[FeasibilityClassifier, ClassifierMetrics]:
    """Train on scaled (n, n_features) rows with 0/1 labels.

    The rows are class-balanced per the config policy, shuffled, and split
    80/20 (by holdout_fraction) into train/held-out parts; training runs
    minibatch BCE with Adam. Returns the classifier plus held-out accuracy,
    precision, and recall.
    """
    if config is None:
        config = ClassifierConfig()
    feats = np.asarray(features, dtype=float)
    labs = np.asarray(labels)
    if feats.ndim != 2 or feats.shape[1] != config.net.input_dim:
        raise ValueError(f"expected (n, {config.net.input_dim}) features, "
                         f"got {feats.shape}")
    if labs.shape != (feats.shape[0],):
        raise ValueError(f"labels shape {labs.shape} does not match "
                         f"{feats.shape[0]} rows")
    if not np.all(np.isfinite(feats)):
        raise ValueError("features must be finite")
    if not np.all(np.isin(labs, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    labs = labs.astype(int)
    if np.unique(labs).size < 2:
        raise SingleClassError("training data holds a single class")

    rng = np.random.default_rng(seed)
    if config.balance == BALANCE_UNDERSAMPLE:
        selected = _undersample_majority(labs, rng)
    else:
        selected = np.arange(labs.size)
    selected = selected[rng.permutation(selected.size)]

    n_holdout = int(round(config.holdout_fraction * selected.size))
    n_holdout = min(max(n_holdout, 1), selected.size - 1)
    holdout_idx = selected[:n_holdout]
    train_idx = selected[n_holdout:]

    x_train = feats[train_idx]
    y_train = labs[train_idx]
    net = init_network(config.net, rng, seed=seed)
    opt = AdamState(net.parameters())
    n_train = train_idx.size
    for _ in range(config.n_epochs):
        perm = rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            take = perm[start:start + config.batch_size]
            batch = x_train[take].T
            target = y_train[take].reshape(1, -1).astype(float)
            preds, cache = forward(net, batch, mode="train", rng=rng)
            _, grad = bce_loss(preds, target)
            grads = backward(net, cache, grad)
            adam_step(opt, net.parameters(), grads.as_list(),
                      config.net.learning_rate)

    clf = FeasibilityClassifier(net, config.threshold)
    flags = clf.predict_feasible(feats[holdout_idx].T)
    truth = labs[holdout_idx].astype(bool)
    accuracy = float(np.mean(flags == truth))
    tp = int(np.count_nonzero(flags & truth))
    fp = int(np.count_nonzero(flags & ~truth))
    fn = int(np.count_nonzero(~flags & truth))
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    metrics = ClassifierMetrics(accuracy=accuracy, precision=precision,
                                recall=recall, n_train=int(n_train),
                                n_holdout=int(n_holdout),
                                holdout_indices=tuple(holdout_idx))
    return clf, metrics


def save_classifier(clf: FeasibilityClassifier, path) -> None:
    doc = {"net": net_to_doc(clf.net), "threshold": clf.threshold}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_classifier(path) -> FeasibilityClassifier:
    with open(path) as fh:
        doc = json.load(fh)
    return FeasibilityClassifier(net_from_doc(doc["net"]), doc["threshold"])
