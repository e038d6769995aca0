"""From-scratch MLP speaker classifier with hand-derived gradients.

All arithmetic is double precision and every source of randomness (weight
initialization, epoch shuffling) is seeded, so a (data, params) pair fully
determines the trained weights. Gradients are plain analytic backprop and are
verified against central finite differences in the test suite.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_feature_matrix, check_label_array

CHECKPOINT_VERSION = 1
PROB_FLOOR = 1e-12


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss."""


class CheckpointError(ValueError):
    """A checkpoint file is missing, corrupt, or from another format version."""


def init_network(layer_dims, seed: int):
    """Seeded uniform weights scaled by 1/sqrt(fan_in); zero biases.

    Args:
        layer_dims: full width chain, e.g. [80, 128, 128, 10].
        seed: RNG seed; the same seed reproduces the same parameters bit for
            bit.

    Returns:
        (weights, biases) lists with weights[i] of shape (dims[i], dims[i+1]).
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer widths must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.uniform(-1.0, 1.0, size=(fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return weights, biases


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    return probs[0] if single else probs


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """Negative log probability of the true class, floored before the log."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("probs must be a single distribution")
    if not 0 <= label < p.size:
        raise ValueError(f"label {label} out of range for {p.size} classes")
    return float(-np.log(max(p[label], PROB_FLOOR)))


class SpeakerClassifier(BaseEstimator, ClassifierMixin):
    """ReLU MLP trained by seeded mini-batch SGD on pooled audio features.

    Parameters
    ----------
    hidden_dims : tuple of int
        Hidden layer widths; the last hidden layer carries the prune mask.
    epochs, batch_size, learning_rate : usual SGD knobs.
    optimizer : "sgd" or "momentum".
    momentum : coefficient used when optimizer == "momentum".
    seed : controls weight initialization.
    shuffle_seed : controls epoch shuffling; derived from `seed` when None.
    shuffle_each_epoch : reshuffle sample order every epoch.

    Fitted attributes: weights_, biases_, prune_mask_, layer_dims_,
    loss_trace_, accuracy_trace_, classes_, n_features_in_.
    """

    def __init__(
        self,
        hidden_dims=(128, 128),
        epochs: int = 100,
        batch_size: int = 32,
        learning_rate: float = 0.005,
        optimizer: str = "momentum",
        momentum: float = 0.9,
        seed: int = 0,
        shuffle_seed=None,
        shuffle_each_epoch: bool = True,
    ):
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.momentum = momentum
        self.seed = seed
        self.shuffle_seed = shuffle_seed
        self.shuffle_each_epoch = shuffle_each_epoch

    def _validate_params(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer not in ("sgd", "momentum"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.hidden_dims:
            raise ValueError("need at least one hidden layer")

    # -- forward / backward ------------------------------------------------

    def _forward(self, X):
        """Returns (probs, pre_activations, activations) for a 2-D batch."""
        mask = self.prune_mask_.astype(np.float64)
        n_hidden = len(self.hidden_dims)
        a = X
        activations = [X]
        pre = []
        for i in range(n_hidden):
            z = a @ self.weights_[i] + self.biases_[i]
            a = np.maximum(z, 0.0)
            if i == n_hidden - 1:
                a = a * mask
            pre.append(z)
            activations.append(a)
        logits = a @ self.weights_[-1] + self.biases_[-1]
        return softmax(logits), pre, activations

    def _backward(self, probs, pre, activations, y):
        """Analytic gradients of the mean cross-entropy over the batch."""
        mask = self.prune_mask_.astype(np.float64)
        n_hidden = len(self.hidden_dims)
        batch = probs.shape[0]
        delta = probs.copy()
        delta[np.arange(batch), y] -= 1.0
        delta /= batch
        grads_w = [None] * len(self.weights_)
        grads_b = [None] * len(self.biases_)
        grads_w[-1] = activations[-1].T @ delta
        grads_b[-1] = delta.sum(axis=0)
        d = delta @ self.weights_[-1].T
        for i in reversed(range(n_hidden)):
            if i == n_hidden - 1:
                d = d * mask
            d = d * (pre[i] > 0)
            grads_w[i] = activations[i].T @ d
            grads_b[i] = d.sum(axis=0)
            if i > 0:
                d = d @ self.weights_[i].T
        return grads_w, grads_b

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y, n_classes=None):
        """Train on a feature matrix and integer labels.

        `n_classes` widens the output layer beyond max(y) + 1 when a class
        is absent from the training labels.
        """
        self._validate_params()
        X = check_feature_matrix(X)
        y = check_label_array(y)
        if y.size != X.shape[0]:
            raise ValueError("X and y disagree on the number of samples")
        n_out = int(n_classes) if n_classes is not None else int(y.max()) + 1
        if n_out < 2:
            raise ValueError("need at least 2 classes")
        if y.max() >= n_out:
            raise ValueError(f"label {y.max()} >= n_classes {n_out}")

        dims = [X.shape[1], *[int(d) for d in self.hidden_dims], n_out]
        self.weights_, self.biases_ = init_network(dims, self.seed)
        self.layer_dims_ = dims
        self.prune_mask_ = np.ones(dims[-2], dtype=bool)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.arange(n_out)

        shuffle_entropy = self.shuffle_seed if self.shuffle_seed is not None else [self.seed, 1]
        shuffle_rng = np.random.default_rng(shuffle_entropy)
        velocity_w = [np.zeros_like(w) for w in self.weights_]
        velocity_b = [np.zeros_like(b) for b in self.biases_]
        n = X.shape[0]

        self.loss_trace_ = []
        self.accuracy_trace_ = []
        for epoch in range(self.epochs):
            if self.shuffle_each_epoch:
                order = shuffle_rng.permutation(n)
            else:
                order = np.arange(n)
            epoch_loss = 0.0
            for batch_index, start in enumerate(range(0, n, self.batch_size)):
                idx = order[start : start + self.batch_size]
                probs, pre, acts = self._forward(X[idx])
                picked = np.maximum(probs[np.arange(idx.size), y[idx]], PROB_FLOOR)
                batch_loss = float(-np.log(picked).mean())
                if not np.isfinite(batch_loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, batch {batch_index}"
                    )
                epoch_loss += batch_loss * idx.size
                grads_w, grads_b = self._backward(probs, pre, acts, y[idx])
                if self.optimizer == "momentum":
                    for i in range(len(self.weights_)):
                        velocity_w[i] = self.momentum * velocity_w[i] + grads_w[i]
                        velocity_b[i] = self.momentum * velocity_b[i] + grads_b[i]
                        self.weights_[i] -= self.learning_rate * velocity_w[i]
                        self.biases_[i] -= self.learning_rate * velocity_b[i]
                else:
                    for i in range(len(self.weights_)):
                        self.weights_[i] -= self.learning_rate * grads_w[i]
                        self.biases_[i] -= self.learning_rate * grads_b[i]
            self.loss_trace_.append(epoch_loss / n)
            self.accuracy_trace_.append(float(np.mean(self.predict(X) == y)))
        return self

    def _require_fitted(self):
        if not hasattr(self, "weights_"):
            raise ValueError("classifier is not fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        probs, _, _ = self._forward(X)
        return probs

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def gradients(self, x, label: int):
        """Exact analytic gradients of cross_entropy(forward(x), label).

        Single-sample form used by the finite-difference oracle tests.
        """
        self._require_fitted()
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        label = int(label)
        if not 0 <= label < self.layer_dims_[-1]:
            raise ValueError(f"label {label} out of range")
        probs, pre, acts = self._forward(x)
        return self._backward(probs, pre, acts, np.array([label]))

    def loss(self, x, label: int) -> float:
        """Cross-entropy of a single sample, matching `gradients`."""
        self._require_fitted()
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        probs, _, _ = self._forward(x)
        return cross_entropy(probs[0], int(label))

    def hidden_activations(self, X) -> np.ndarray:
        """Masked activations of the last hidden layer, shape (n, width)."""
        self._require_fitted()
        X = check_feature_matrix(X)
        _, _, acts = self._forward(X)
        return acts[-1]

    def prune_last_hidden(self, X_valid, ratio: float):
        """Mask the lowest-activation fraction of last-hidden-layer neurons.

        Neurons are ranked by mean absolute activation over the clean
        validation set, ascending; floor(ratio * width) of them end up
        masked. Previously masked neurons always stay masked, so sequential
        calls with growing ratios accumulate.
        """
        self._require_fitted()
        if not 0.0 <= ratio < 1.0:
            raise ValueError(f"ratio must lie in [0, 1), got {ratio}")
        acts = self.hidden_activations(X_valid)
        mean_abs = np.abs(acts).mean(axis=0)
        order = np.argsort(mean_abs, kind="stable")
        n_off = int(np.floor(ratio * mean_abs.size))
        new_mask = self.prune_mask_.copy()
        new_mask[order[:n_off]] = False
        self.prune_mask_ = new_mask
        return self

    # -- persistence ---------------------------------------------------------

    def save(self, path, feature_fingerprint: str = "") -> None:
        """Versioned JSON checkpoint: dims, parameters, mask, fingerprint."""
        self._require_fitted()
        payload = {
            "format_version": CHECKPOINT_VERSION,
            "layer_dims": list(self.layer_dims_),
            "weights": [w.tolist() for w in self.weights_],
            "biases": [b.tolist() for b in self.biases_],
            "prune_mask": self.prune_mask_.astype(int).tolist(),
            "feature_fingerprint": feature_fingerprint,
            "hyperparams": _jsonable(self.get_params()),
        }
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "SpeakerClassifier":
        path = Path(path)
        if not path.is_file():
            raise CheckpointError(f"{path}: no such checkpoint")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
        if not isinstance(payload, dict):
            raise CheckpointError(f"{path}: unexpected checkpoint structure")
        version = payload.get("format_version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: format version {version!r} != supported {CHECKPOINT_VERSION}"
            )
        try:
            dims = [int(d) for d in payload["layer_dims"]]
            weights = [np.asarray(w, dtype=np.float64) for w in payload["weights"]]
            biases = [np.asarray(b, dtype=np.float64) for b in payload["biases"]]
            mask = np.asarray(payload["prune_mask"], dtype=bool)
            params = dict(payload["hyperparams"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
        params["hidden_dims"] = tuple(params.get("hidden_dims", ()))
        model = cls(**params)
        if len(weights) != len(dims) - 1 or any(
            w.shape != (dims[i], dims[i + 1]) for i, w in enumerate(weights)
        ):
            raise CheckpointError(f"{path}: parameter shapes disagree with layer_dims")
        if mask.size != dims[-2]:
            raise CheckpointError(f"{path}: prune_mask width disagrees with layer_dims")
        model.weights_ = weights
        model.biases_ = biases
        model.prune_mask_ = mask
        model.layer_dims_ = dims
        model.n_features_in_ = dims[0]
        model.classes_ = np.arange(dims[-1])
        model.feature_fingerprint_ = payload.get("feature_fingerprint", "")
        return model


def _jsonable(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, tuple):
            value = list(value)
        if isinstance(value, np.integer):
            value = int(value)
        out[key] = value
    return out
