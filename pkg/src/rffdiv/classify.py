"""Multinomial logistic regression over fingerprint vectors, with two-branch
score fusion.

A single linear softmax layer stands in for a deep time-series classifier:
the fingerprints do the heavy lifting, and a convex model keeps training
deterministic and the gradients checkable. Training minimizes label-smoothed
cross-entropy plus an L2 penalty on the weights by mini-batch gradient
descent, holds out a stratified validation split, and keeps the epoch with
the lowest validation loss. The two-branch protocol trains one model per
preamble field and fuses at prediction time by summing the two softmax
outputs and taking the argmax.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .features import FeatureVector


class TrainError(ValueError):
    pass


class PredictError(ValueError):
    pass


class FuseError(ValueError):
    pass


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters. The defaults (smoothing 0.1, 50 epochs,
    batch 64, learning rate 1e-3, L2 0.1) assume the adaptive optimizer;
    `optimizer="sgd"` selects plain descent steps instead."""

    epochs: int = 50
    batch: int = 64
    learning_rate: float = 1e-3
    l2: float = 0.1
    label_smoothing: float = 0.1
    seed: int = 0
    validation_fraction: float = 0.1
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be positive")
        if self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("learning_rate must be positive and l2 nonnegative")
        if not 0.0 <= self.label_smoothing < 0.5:
            raise ValueError("label_smoothing must lie in [0, 0.5)")
        if not 0.0 <= self.validation_fraction < 0.5:
            raise ValueError("validation_fraction must lie in [0, 0.5)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class SoftmaxModel:
    """Linear softmax over standardized inputs. `input_mean`/`input_scale`
    are the training set's per-dimension statistics; fingerprint vectors
    are unit-normalized with a dominant flat component, so without the
    rescaling the discriminative directions are orders of magnitude smaller
    than the regularizer's pull."""

    weights: np.ndarray  # [num_classes, feature_dim]
    bias: np.ndarray  # [num_classes]
    classes: list[str]
    trained_on: str
    input_mean: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.input_mean is None:
            self.input_mean = np.zeros(self.weights.shape[1])
        if self.input_scale is None:
            self.input_scale = np.ones(self.weights.shape[1])
        self.input_mean = np.asarray(self.input_mean, dtype=np.float64)
        self.input_scale = np.asarray(self.input_scale, dtype=np.float64)
        if not self.classes or len(set(self.classes)) != len(self.classes):
            raise ValueError("classes must be nonempty and unique")
        for arr in (self.weights, self.bias, self.input_mean, self.input_scale):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y_idx: np.ndarray,
    l2: float,
    label_smoothing: float,
):
    """Mean label-smoothed cross-entropy plus (l2/2)*||W||_F^2, with its
    analytic gradients. Exposed for finite-difference verification."""
    n, _ = x.shape
    c = weights.shape[0]
    probs = _softmax(x @ weights.T + bias)
    targets = np.full((n, c), label_smoothing / c)
    targets[np.arange(n), y_idx] += 1.0 - label_smoothing
    ce = -np.sum(targets * np.log(probs)) / n
    loss = ce + 0.5 * l2 * float(np.sum(weights**2))
    delta = (probs - targets) / n
    grad_w = delta.T @ x + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def _stratified_split(y_idx: np.ndarray, fraction: float, rng: np.random.Generator):
    """Per-class holdout indices; classes with fewer than 2 samples stay
    fully in training (no validation possible for them)."""
    val = []
    for cls in np.unique(y_idx):
        members = np.nonzero(y_idx == cls)[0]
        if members.size < 2:
            continue
        n_val = max(1, int(round(fraction * members.size)))
        n_val = min(n_val, members.size - 1)
        picked = rng.permutation(members)[:n_val]
        val.extend(picked.tolist())
    val_mask = np.zeros(y_idx.size, dtype=bool)
    val_mask[val] = True
    return ~val_mask, val_mask


def _as_matrix(features):
    # mixed extractors imply mixed dimensions too, since every extractor
    # pins its own (FeatureVector enforces that)
    x, labels = [], []
    extractor = None
    for f in features:
        if not isinstance(f, FeatureVector):
            raise TrainError("expected FeatureVector inputs")
        if f.device_hint is None:
            raise TrainError("every feature needs a device label (device_hint)")
        if extractor is None:
            extractor = f.extractor
        elif f.extractor is not extractor:
            raise TrainError(
                f"mixed extractors: {extractor.value} and {f.extractor.value}"
            )
        x.append(f.values)
        labels.append(f.device_hint)
    if not x:
        raise TrainError("no features given")
    return np.stack(x), labels, extractor


def train(features, cfg: TrainConfig) -> SoftmaxModel:
    """Fit the softmax model on labeled feature vectors (labels come from
    `device_hint`). Deterministic given `cfg.seed`."""
    x, labels, extractor = _as_matrix(features)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainError("need at least two classes")
    class_idx = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([class_idx[l] for l in labels])
    n, dim = x.shape
    rng = np.random.default_rng(cfg.seed)
    train_mask, val_mask = _stratified_split(y_idx, cfg.validation_fraction, rng)
    if cfg.validation_fraction == 0.0 or not val_mask.any():
        train_mask = np.ones(n, dtype=bool)
        val_mask = np.zeros(n, dtype=bool)
    mean = x[train_mask].mean(axis=0)
    scale = x[train_mask].std(axis=0)
    scale[scale < 1e-12] = 1.0
    x = (x - mean) / scale
    x_tr, y_tr = x[train_mask], y_idx[train_mask]
    x_val, y_val = x[val_mask], y_idx[val_mask]

    w = np.zeros((len(classes), dim))
    b = np.zeros(len(classes))
    adam_state = None
    if cfg.optimizer == "adam":
        adam_state = [np.zeros_like(w), np.zeros_like(w), np.zeros_like(b), np.zeros_like(b), 0]
    best = (np.inf, w.copy(), b.copy())
    for _ in range(cfg.epochs):
        order = rng.permutation(x_tr.shape[0])
        for start in range(0, order.size, cfg.batch):
            batch = order[start : start + cfg.batch]
            _, gw, gb = loss_and_gradient(w, b, x_tr[batch], y_tr[batch], cfg.l2, cfg.label_smoothing)
            if adam_state is None:
                w -= cfg.learning_rate * gw
                b -= cfg.learning_rate * gb
            else:
                mw, vw, mb, vb, t = adam_state
                t += 1
                beta1, beta2, eps = 0.9, 0.999, 1e-8
                mw[:] = beta1 * mw + (1 - beta1) * gw
                vw[:] = beta2 * vw + (1 - beta2) * gw**2
                mb[:] = beta1 * mb + (1 - beta1) * gb
                vb[:] = beta2 * vb + (1 - beta2) * gb**2
                corr1, corr2 = 1 - beta1**t, 1 - beta2**t
                w -= cfg.learning_rate * (mw / corr1) / (np.sqrt(vw / corr2) + eps)
                b -= cfg.learning_rate * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
                adam_state[4] = t
        if x_val.shape[0] > 0:
            score, _, _ = loss_and_gradient(w, b, x_val, y_val, cfg.l2, cfg.label_smoothing)
        else:
            score, _, _ = loss_and_gradient(w, b, x_tr, y_tr, cfg.l2, cfg.label_smoothing)
        if score < best[0]:
            best = (score, w.copy(), b.copy())
    _, w, b = best
    return SoftmaxModel(weights=w, bias=b, classes=classes, trained_on=extractor.value,
                        input_mean=mean, input_scale=scale)


def predict_scores(model: SoftmaxModel, feature) -> np.ndarray:
    """Softmax probabilities over the model's classes."""
    v = feature.values if isinstance(feature, FeatureVector) else np.asarray(feature, float)
    if v.shape != (model.feature_dim,):
        raise PredictError(f"feature dim {v.shape} != model dim {model.feature_dim}")
    v = (v - model.input_mean) / model.input_scale
    return _softmax(model.weights @ v + model.bias)


def fuse_and_classify(models, features) -> str:
    """Sum the branch probability vectors and take the argmax; ties resolve
    to the earliest class in the shared class order."""
    m_a, m_b = models
    if m_a.classes != m_b.classes:
        raise FuseError("branch models disagree on the class list")
    combined = predict_scores(m_a, features[0]) + predict_scores(m_b, features[1])
    return m_a.classes[int(np.argmax(combined))]


def classify(model: SoftmaxModel, feature) -> str:
    return model.classes[int(np.argmax(predict_scores(model, feature)))]


def evaluate(model: SoftmaxModel, features) -> float:
    """Fraction of correctly classified labeled features."""
    feats = list(features)
    if not feats:
        raise EvalError("empty test set")
    hits = sum(1 for f in feats if classify(model, f) == f.device_hint)
    return hits / len(feats)


def evaluate_fused(models, feature_pairs) -> float:
    """Accuracy of the two-branch fusion over (branch_a, branch_b) feature
    pairs; labels come from the first branch's device_hint."""
    pairs = list(feature_pairs)
    if not pairs:
        raise EvalError("empty test set")
    hits = sum(1 for fa, fb in pairs if fuse_and_classify(models, (fa, fb)) == fa.device_hint)
    return hits / len(pairs)


MODEL_FORMAT_VERSION = 1


def save_model(model: SoftmaxModel, path, train_config: TrainConfig | None = None) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "softmax_linear",
        "extractor": model.trained_on,
        "classes": model.classes,
        "feature_dim": model.feature_dim,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "input_mean": model.input_mean.tolist(),
        "input_scale": model.input_scale.tolist(),
        "train_config": asdict(train_config) if train_config else None,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_model(path) -> SoftmaxModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')}")
    return SoftmaxModel(
        weights=np.array(doc["weights"]),
        bias=np.array(doc["bias"]),
        classes=list(doc["classes"]),
        trained_on=doc["extractor"],
        input_mean=np.array(doc.get("input_mean")) if doc.get("input_mean") else None,
        input_scale=np.array(doc.get("input_scale")) if doc.get("input_scale") else None,
    )
