"""Perception models and perception-aware quality metrics."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    GRIP,
    MAX_CONFIDENCE,
    VISUAL_ALIGNMENT,
    Observation,
    QualityScore,
    SensorOption,
    SpecError,
)
from .seeding import generator


@dataclass(frozen=True, eq=False)
class PerceptionModel:
    """Multinomial logistic classifier: softmax(W x + b)."""

    weights: np.ndarray  # C x d
    bias: np.ndarray     # C

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        b = np.array(self.bias, dtype=float).ravel()
        if W.ndim != 2 or W.shape[0] < 2:
            raise SpecError("weights must be a C x d matrix with C >= 2")
        if b.shape != (W.shape[0],):
            raise SpecError("bias length must equal class count")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise SpecError("model parameters must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> "PerceptionModel":
        return cls(np.zeros((n_classes, dim)), np.zeros(n_classes))

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PerceptionModel):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and np.array_equal(self.bias, other.bias)

    __hash__ = None


def _as_features(x) -> np.ndarray:
    if isinstance(x, Observation):
        return x.features
    return np.asarray(x, dtype=float).ravel()


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def logits(model: PerceptionModel, obs) -> np.ndarray:
    x = _as_features(obs)
    if x.size != model.dim:
        raise SpecError(f"feature length {x.size} does not match model dimension {model.dim}")
    return model.weights @ x + model.bias


def predict(model: PerceptionModel, obs) -> np.ndarray:
    """Class probabilities for an Observation (or a raw feature vector)."""
    return softmax(logits(model, obs))


def quality_max_confidence(model: PerceptionModel, obs) -> QualityScore:
    p = predict(model, obs)
    return QualityScore(min(float(p.max()), 1.0), MAX_CONFIDENCE)


def quality_grip(
    obs: Observation,
    prev_action: int | None,
    tactile_option: SensorOption,
    threshold_axis: int = -1,
) -> QualityScore:
    """Informative contact coverage of the tactile part.

    Fraction of tactile elements that are neither clipped nor below the
    pressure threshold carried by ``tactile_option``. ``prev_action`` is part
    of the metric's signature; the grip state it produced is already visible
    in the pressure profile.
    """
    values = obs.part("tactile")
    flags = obs.flags("tactile")
    threshold = tactile_option.values[threshold_axis]
    informative = ~flags & (values >= threshold)
    return QualityScore(float(informative.mean()), GRIP)


def quality_visual_alignment(
    obs: Observation,
    prev_action: int | None,
    cam_option: SensorOption,
    tact_option: SensorOption,
    model: PerceptionModel,
) -> QualityScore:
    """Max-confidence on the visual part, discounted by its clipped fraction.

    Tactile sensing couples in through the shared observation: the camera and
    tactile captures of one step are produced together.
    """
    visual = obs.part("visual")
    clipped = float(obs.flags("visual").mean())
    conf = float(predict(model, visual).max())
    return QualityScore(min(conf * (1.0 - clipped), 1.0), VISUAL_ALIGNMENT)


def compose_affine(model: PerceptionModel, scale: float, offset) -> PerceptionModel:
    """Model M' with M'(y) = M(scale * y + offset)."""
    off = np.broadcast_to(np.asarray(offset, dtype=float), (model.dim,))
    return PerceptionModel(model.weights * scale, model.bias + model.weights @ off)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def loss_and_grad(weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient with respect to (weights, bias)."""
    return _kernels.logistic_grad(
        np.ascontiguousarray(weights, dtype=float),
        np.ascontiguousarray(bias, dtype=float),
        np.ascontiguousarray(X, dtype=float),
        np.ascontiguousarray(y, dtype=np.int64),
    )


def accuracy(model: PerceptionModel, X: np.ndarray, y: np.ndarray) -> float:
    z = X @ model.weights.T + model.bias
    return float(np.mean(np.argmax(z, axis=1) == y))


def curvature_bound(X: np.ndarray) -> float:
    """Lipschitz constant of the mean cross-entropy gradient: 0.5 * lambda_max(X1^T X1 / n)
    with X1 = [X, 1]. Steps up to 1 / bound never overshoot."""
    X1 = np.hstack([X, np.ones((X.shape[0], 1))])
    return 0.5 * float(np.linalg.eigvalsh(X1.T @ X1 / X.shape[0])[-1])


def train_perception(
    dataset: Sequence[tuple[Observation | np.ndarray, int]],
    n_classes: int,
    epochs: int = 500,
    learning_rate: float | None = None,
    seed: int = 0,
) -> PerceptionModel:
    """Full-batch Nesterov-accelerated gradient descent on the logistic model.

    The step is ``learning_rate`` capped at 1 / curvature_bound(X) (the cap
    alone when ``learning_rate`` is None). Larger steps make the iterates
    oscillate, and the model they stop on then hinges on rounding. Weights
    start from a small seeded Gaussian. If the fit ends below the
    majority-class accuracy on its own data, the bias-only majority model is
    returned instead.
    """
    if len(dataset) == 0:
        raise SpecError("empty dataset")
    X = np.stack([_as_features(x) for x, _ in dataset])
    y = np.array([int(lbl) for _, lbl in dataset], dtype=np.int64)
    if n_classes < 2:
        raise SpecError("need at least two classes")
    if y.min() < 0 or y.max() >= n_classes:
        raise SpecError("labels must lie in [0, C)")
    safe = 1.0 / curvature_bound(X)
    step = safe if learning_rate is None else min(float(learning_rate), safe)
    rng = generator(seed)
    W = rng.normal(0.0, 0.01, size=(n_classes, X.shape[1]))
    b = np.zeros(n_classes)
    W_prev, b_prev = W, b
    for k in range(epochs):
        mom = k / (k + 3.0)
        W_look, b_look = W + mom * (W - W_prev), b + mom * (b - b_prev)
        _, gW, gb = loss_and_grad(W_look, b_look, X, y)
        W_prev, b_prev = W, b
        W, b = W_look - step * gW, b_look - step * gb
    model = PerceptionModel(W, b)

    counts = np.bincount(y, minlength=n_classes)
    majority = counts.max() / len(y)
    if accuracy(model, X, y) < majority:
        prior = np.log(np.maximum(counts, 1e-12) / len(y))
        model = PerceptionModel(np.zeros_like(W), np.maximum(prior, -50.0))
    return model


# ---------------------------------------------------------------------------
# persistence: "C d" header, then C rows of d weights followed by the bias
# ---------------------------------------------------------------------------


def save_model(model: PerceptionModel, path: str | os.PathLike) -> None:
    C, d = model.weights.shape
    rows = np.hstack([model.weights, model.bias[:, None]])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{C} {d}\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_model(path: str | os.PathLike) -> PerceptionModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise SpecError(f"{path}: bad model header")
        C, d = int(header[0]), int(header[1])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != C or any(len(r) != d + 1 for r in rows):
        raise SpecError(f"{path}: expected {C} rows of {d + 1} values")
    arr = np.array(rows, dtype=float)
    return PerceptionModel(arr[:, :d], arr[:, d])
