"""Aligned-to-generalized encoders.

A pair of single-hidden-layer sigmoid networks, one per domain, regresses
each aligned instance onto its class centroid (the mean of that class's
scaled aligned instances pooled over both domains). Training is full-batch
gradient descent with momentum; the output-layer activations are the
generalized features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSet
from .errors import BadConfig, DimensionMismatch, MissingClass, NonFiniteLoss

SCALE_LO = 0.1
SCALE_HI = 0.9


@dataclass
class RangeScaler:
    """Per-dimension affine map of the training range onto [lo, hi].

    Constant dimensions map to the interval midpoint.
    """

    minimum: np.ndarray
    maximum: np.ndarray
    lo: float = SCALE_LO
    hi: float = SCALE_HI

    @classmethod
    def fit(cls, features: np.ndarray, lo: float = SCALE_LO, hi: float = SCALE_HI) -> "RangeScaler":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1:
            raise BadConfig("need a non-empty feature matrix to fit the scaler")
        if not lo < hi:
            raise BadConfig("scaler interval must satisfy lo < hi")
        return cls(features.min(axis=0), features.max(axis=0), lo, hi)

    @property
    def dim(self) -> int:
        return self.minimum.shape[0]

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"features have dim {features.shape[-1]}, scaler expects {self.dim}"
            )
        span = self.maximum - self.minimum
        safe = span > 0
        out = np.full_like(features, 0.5 * (self.lo + self.hi))
        scaled = (features - self.minimum) / np.where(safe, span, 1.0)
        out = np.where(safe, self.lo + scaled * (self.hi - self.lo), out)
        return out


@dataclass
class ClassTargets:
    """One regression target per class: the pooled cross-domain class mean."""

    targets: np.ndarray  # (c, L)
    source_counts: np.ndarray  # (c,)
    target_counts: np.ndarray  # (c,)

    @property
    def class_count(self) -> int:
        return self.targets.shape[0]


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    iterations: int = 1000
    seed: int = 0
    init: str = "uniform"  # "uniform" on [0, 1) or "scaled_uniform" on [0, 1/sqrt(fan_in))
    batch_size: int | None = None  # None = full batch

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or not np.isfinite(self.learning_rate):
            raise BadConfig("learning_rate must be positive and finite")
        if not 0 <= self.momentum < 1:
            raise BadConfig("momentum must lie in [0, 1)")
        if self.iterations < 1:
            raise BadConfig("iterations must be >= 1")
        if self.init not in ("uniform", "scaled_uniform"):
            raise BadConfig(f"unknown init {self.init!r}")


@dataclass
class AgeModel:
    """Weights and biases of one encoder, plus the shared input scaler."""

    w1: np.ndarray  # (H, L)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (L, H)
    b2: np.ndarray  # (L,)
    scaler: RangeScaler | None = None

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]


@dataclass
class TrainLog:
    """Per-iteration objective values for the two encoders."""

    loss_source: np.ndarray
    loss_target: np.ndarray


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def class_targets(
    source_aligned: FeatureSet,
    target_aligned: FeatureSet,
    scaler: RangeScaler,
) -> ClassTargets:
    """Per-class centroids of the scaled aligned instances pooled over domains.

    Every class must have at least one labeled instance in the union of the
    two domains (``MissingClass`` otherwise).
    """
    src = source_aligned.labeled()
    tgt = target_aligned.labeled()
    if src.dim != tgt.dim:
        raise DimensionMismatch(f"aligned dims differ: {src.dim} vs {tgt.dim}")
    labels = np.concatenate([src.labels, tgt.labels])
    if labels.size == 0:
        raise MissingClass("no labeled instances supplied")
    c = int(labels.max()) + 1
    xs = scaler.transform(src.features)
    xt = scaler.transform(tgt.features)
    pooled = np.vstack([xs, xt])
    targets = np.zeros((c, pooled.shape[1]))
    src_counts = np.zeros(c, dtype=np.int64)
    tgt_counts = np.zeros(c, dtype=np.int64)
    for cls in range(c):
        member = labels == cls
        if not member.any():
            raise MissingClass(f"class {cls} has no labeled instances")
        targets[cls] = pooled[member].mean(axis=0)
        src_counts[cls] = int((src.labels == cls).sum())
        tgt_counts[cls] = int((tgt.labels == cls).sum())
    return ClassTargets(targets, src_counts, tgt_counts)


def age_forward(model: AgeModel, x: np.ndarray) -> np.ndarray:
    """Two-layer forward pass ``s(W2 s(W1 x + b1) + b2)`` for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DimensionMismatch(f"input has shape {x.shape}, expected ({model.input_dim},)")
    hidden = sigmoid(model.w1 @ x + model.b1)
    return sigmoid(model.w2 @ hidden + model.b2)


def _forward_batch(model: AgeModel, x: np.ndarray) -> np.ndarray:
    hidden = sigmoid(x @ model.w1.T + model.b1)
    return sigmoid(hidden @ model.w2.T + model.b2)


def momentum_update(
    grad: np.ndarray, velocity: np.ndarray, learning_rate: float, momentum: float
) -> np.ndarray:
    """Velocity update ``v <- lr * grad + momentum * v`` (parameter moves by ``-v``)."""
    return learning_rate * grad + momentum * velocity


def _loss_and_grads(model: AgeModel, x: np.ndarray, t: np.ndarray):
    n = x.shape[0]
    hidden = sigmoid(x @ model.w1.T + model.b1)
    out = sigmoid(hidden @ model.w2.T + model.b2)
    diff = out - t
    loss = 0.5 * np.sum(diff * diff) / n
    d2 = diff * out * (1.0 - out) / n
    gw2 = d2.T @ hidden
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ model.w2) * hidden * (1.0 - hidden)
    gw1 = d1.T @ x
    gb1 = d1.sum(axis=0)
    return loss, (gw1, gb1, gw2, gb2)


def _init_model(
    rng: np.random.Generator, input_dim: int, hidden_dim: int, init: str, scaler: RangeScaler | None
) -> AgeModel:
    def draw(shape, fan_in):
        w = rng.random(shape)
        if init == "scaled_uniform":
            w = w / np.sqrt(fan_in)
        return w

    return AgeModel(
        w1=draw((hidden_dim, input_dim), input_dim),
        b1=draw(hidden_dim, input_dim),
        w2=draw((input_dim, hidden_dim), hidden_dim),
        b2=draw(input_dim, hidden_dim),
        scaler=scaler,
    )


def _train_one(
    model: AgeModel,
    x: np.ndarray,
    t: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    name: str,
) -> np.ndarray:
    velocity = [np.zeros_like(p) for p in (model.w1, model.b1, model.w2, model.b2)]
    losses = np.empty(config.iterations)
    for it in range(config.iterations):
        if config.batch_size is None or config.batch_size >= x.shape[0]:
            xb, tb = x, t
        else:
            idx = rng.choice(x.shape[0], size=config.batch_size, replace=False)
            xb, tb = x[idx], t[idx]
        loss, grads = _loss_and_grads(model, xb, tb)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"{name} encoder diverged at iteration {it}")
        losses[it] = loss
        params = (model.w1, model.b1, model.w2, model.b2)
        for i, (param, grad) in enumerate(zip(params, grads)):
            velocity[i] = momentum_update(grad, velocity[i], config.learning_rate, config.momentum)
            param -= velocity[i]
    return losses


def age_train(
    aligned_source: FeatureSet,
    aligned_target: FeatureSet,
    targets: ClassTargets,
    config: TrainConfig,
    hidden_dim: int | None = None,
    scaler: RangeScaler | None = None,
) -> tuple[AgeModel, AgeModel, TrainLog]:
    """Train the two encoders on their own domain's scaled labeled instances.

    Inputs must already be scaled by the shared ``RangeScaler``; each instance
    is paired with its class target. Weights and biases start uniform on
    [0, 1) (deterministic given ``config.seed``), the hidden layer defaults to
    the input width, and the full-batch momentum update runs for exactly
    ``config.iterations`` rounds.
    """
    src = aligned_source.labeled()
    tgt = aligned_target.labeled()
    if src.n == 0 or tgt.n == 0:
        raise MissingClass("both domains need labeled instances to train encoders")
    dim = targets.targets.shape[1]
    if src.dim != dim or tgt.dim != dim:
        raise DimensionMismatch("aligned feature dim does not match target dim")
    for fs, side in ((src, "source"), (tgt, "target")):
        if fs.labels.max() >= targets.class_count:
            raise MissingClass(f"{side} label exceeds target table of {targets.class_count} classes")
    hidden = dim if hidden_dim is None else int(hidden_dim)
    if hidden < 1:
        raise BadConfig("hidden_dim must be positive")
    rng = np.random.default_rng(config.seed)
    model_s = _init_model(rng, dim, hidden, config.init, scaler)
    model_t = _init_model(rng, dim, hidden, config.init, scaler)
    loss_s = _train_one(model_s, src.features, targets.targets[src.labels], config, rng, "source")
    loss_t = _train_one(model_t, tgt.features, targets.targets[tgt.labels], config, rng, "target")
    return model_s, model_t, TrainLog(loss_s, loss_t)


def age_generalize(model: AgeModel, aligned: np.ndarray) -> np.ndarray:
    """Row-wise forward pass producing the generalized feature matrix."""
    aligned = np.asarray(aligned, dtype=np.float64)
    if aligned.ndim != 2 or aligned.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"aligned features have dim {aligned.shape[-1]}, model expects {model.input_dim}"
        )
    return _forward_batch(model, aligned)
