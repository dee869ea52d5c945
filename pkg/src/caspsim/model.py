"""One-hidden-layer ReLU classifier with analytic backprop and momentum SGD.

The same network family serves as the continual learner and as the CASP
surrogate; only the hyperparameters differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stream import SampleSet


@dataclass(frozen=True)
class ModelParams:
    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (classes, hidden)
    b2: np.ndarray  # (classes,)

    def __post_init__(self):
        hidden, n_in = np.shape(self.W1)
        if np.shape(self.b1) != (hidden,):
            raise ValueError("b1 must have one entry per hidden unit")
        n_classes, h2 = np.shape(self.W2)
        if h2 != hidden or np.shape(self.b2) != (n_classes,):
            raise ValueError("W2/b2 shapes inconsistent with hidden layer")
        if n_classes < 2:
            raise ValueError("need at least two classes")
        for a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise ValueError("parameters must be finite")

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, self.b2)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "ModelParams":
        out, pos = [], 0
        for a in self.arrays():
            out.append(np.array(vec[pos:pos + a.size], dtype=np.float64).reshape(a.shape))
            pos += a.size
        return ModelParams(*out)

    def tobytes(self) -> bytes:
        return b"".join(a.tobytes() for a in self.arrays())

    @classmethod
    def zeros(cls, n_inputs: int, n_hidden: int, n_classes: int) -> "ModelParams":
        return cls(np.zeros((n_hidden, n_inputs)), np.zeros(n_hidden),
                   np.zeros((n_classes, n_hidden)), np.zeros(n_classes))


def init_params(n_inputs: int, n_hidden: int, n_classes: int,
                rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    a1 = math.sqrt(6.0 / (n_inputs + n_hidden))
    a2 = math.sqrt(6.0 / (n_hidden + n_classes))
    W1 = rng.uniform(-a1, a1, size=(n_hidden, n_inputs))
    W2 = rng.uniform(-a2, a2, size=(n_classes, n_hidden))
    return ModelParams(W1, np.zeros(n_hidden), W2, np.zeros(n_classes))


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.1
    momentum: float = 0.0
    weight_decay: float = 0.0
    epochs: int = 1
    # Cosine annealing over this many epochs; None keeps the rate constant.
    cosine_t_max: int | None = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.cosine_t_max is not None and self.cosine_t_max < 1:
            raise ValueError("cosine_t_max must be >= 1")

    def lr_at(self, epoch: int) -> float:
        if self.cosine_t_max is None:
            return self.learning_rate
        e = min(epoch, self.cosine_t_max)
        return 0.5 * self.learning_rate * (1.0 + math.cos(math.pi * e / self.cosine_t_max))


def _as_batch(params: ModelParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.n_inputs:
        raise ValueError(
            f"feature length {x.shape[-1] if x.ndim else 0} does not match "
            f"input dimension {params.n_inputs}")
    return x


def forward_logits(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """W2 relu(W1 x + b1) + b2 for one vector or a row-stacked batch."""
    x = _as_batch(params, features)
    h = np.maximum(x @ params.W1.T + params.b1, 0.0)
    return h @ params.W2.T + params.b2


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(params: ModelParams, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= params.n_classes):
        raise ValueError(f"label out of range for {params.n_classes} classes")
    return labels


def target_confidences(params: ModelParams, features: np.ndarray,
                       labels: np.ndarray) -> np.ndarray:
    """Softmax probability of each row's own label."""
    labels = _check_labels(params, labels)
    p = softmax(forward_logits(params, np.atleast_2d(features)))
    return p[np.arange(len(labels)), labels]


def target_confidence(params: ModelParams, sample) -> float:
    return float(target_confidences(params, sample.features[None, :],
                                    np.array([sample.label]))[0])


def loss_and_grad(params: ModelParams, X: np.ndarray,
                  y: np.ndarray) -> tuple[float, ModelParams]:
    """Mean cross-entropy over the batch and its exact gradient."""
    X = _as_batch(params, np.atleast_2d(X))
    y = _check_labels(params, y)
    n = len(y)
    pre = X @ params.W1.T + params.b1
    h = np.maximum(pre, 0.0)
    logits = h @ params.W2.T + params.b2
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), y]))

    d_logits = np.exp(z - logsum[:, None])
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    gW2 = d_logits.T @ h
    gb2 = d_logits.sum(axis=0)
    d_h = d_logits @ params.W2
    d_h[pre <= 0.0] = 0.0
    gW1 = d_h.T @ X
    gb1 = d_h.sum(axis=0)
    return loss, ModelParams(gW1, gb1, gW2, gb2)


def mean_loss(params: ModelParams, data: SampleSet) -> float:
    return loss_and_grad(params, data.features, data.labels)[0]


@dataclass
class Sgd:
    """Momentum SGD state; weight decay is folded into the gradient."""

    config: SgdConfig
    epoch: int = 0
    velocity: list[np.ndarray] | None = field(default=None, repr=False)

    def step(self, params: ModelParams, grads: ModelParams) -> ModelParams:
        cfg = self.config
        lr = cfg.lr_at(self.epoch)
        if self.velocity is None:
            self.velocity = [np.zeros_like(a) for a in params.arrays()]
        new = []
        for i, (p, g) in enumerate(zip(params.arrays(), grads.arrays())):
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            if cfg.momentum:
                self.velocity[i] = cfg.momentum * self.velocity[i] + g
                g = self.velocity[i]
            new.append(p - lr * g)
        return ModelParams(*new)


def train_epoch(params: ModelParams, data: SampleSet, cfg: SgdConfig,
                batch_size: int, rng: np.random.Generator | int,
                optimizer: Sgd | None = None) -> ModelParams:
    """One shuffled pass of minibatch SGD on mean cross-entropy.

    Pass a persistent ``optimizer`` to carry momentum and the cosine epoch
    counter across calls; otherwise a fresh state is used.
    """
    if len(data) == 0:
        raise ValueError("cannot train on empty data")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(rng)
    opt = optimizer if optimizer is not None else Sgd(cfg)
    order = rng.permutation(len(data))
    X, y = data.features, data.labels
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        _, grads = loss_and_grad(params, X[idx], y[idx])
        params = opt.step(params, grads)
    opt.epoch += 1
    return params


def train(params: ModelParams, data: SampleSet, cfg: SgdConfig, batch_size: int,
          rng: np.random.Generator | int, callback=None) -> ModelParams:
    """Run ``cfg.epochs`` epochs; ``callback(epoch, params)`` after each."""
    rng = np.random.default_rng(rng)
    opt = Sgd(cfg)
    for e in range(cfg.epochs):
        params = train_epoch(params, data, cfg, batch_size, rng, opt)
        if callback is not None:
            callback(e, params)
    return params


def predict(params: ModelParams, features: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(forward_logits(params, np.atleast_2d(features)), axis=1)


def evaluate_accuracy(params: ModelParams, data: SampleSet) -> float:
    if len(data) == 0:
        raise ValueError("cannot evaluate on empty data")
    return float(np.mean(predict(params, data.features) == data.labels))


def per_class_accuracy(params: ModelParams, data: SampleSet) -> dict[int, float]:
    if len(data) == 0:
        raise ValueError("cannot evaluate on empty data")
    hit = predict(params, data.features) == data.labels
    return {int(c): float(hit[data.labels == c].mean()) for c in np.unique(data.labels)}
