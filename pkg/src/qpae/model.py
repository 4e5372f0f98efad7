"""Dense feed-forward softmax classifier with exact analytic backprop.

Weights are plain numpy float64 arrays, row-major. A classifier is a stack
of ReLU hidden layers followed by a final linear layer (d x K); every
unlearning method in this package manipulates that final layer directly,
so the representation is kept deliberately transparent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .rng import Rng

if TYPE_CHECKING:
    from .data import LabeledDataset

LOG_EPS = 1e-12  # clamp inside log() so one-hot targets do not produce -inf


class NumericError(RuntimeError):
    """Raised when NaN/Inf shows up in model parameters or predictions."""


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax; works on vectors and (n, K) batches."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(pred: np.ndarray, target: np.ndarray) -> float:
    """-sum target_j * log(pred_j + eps) with the shared eps clamp."""
    return float(-np.sum(target * np.log(pred + LOG_EPS)))


def entropy(pred: np.ndarray) -> float:
    """Shannon entropy in nats, with 0 * log 0 := 0."""
    p = np.asarray(pred, dtype=np.float64)
    nz = p > 0.0
    return float(-np.sum(p[nz] * np.log(p[nz])))


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        # learning_rate 0 is allowed so a zero-step run is expressible
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


class Classifier:
    """ReLU MLP with a final linear layer holding one column per class."""

    def __init__(self, hidden: list[tuple[np.ndarray, np.ndarray]],
                 final_w: np.ndarray, final_b: np.ndarray):
        self.hidden = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for w, b in hidden]
        self.final_w = np.asarray(final_w, dtype=np.float64)
        self.final_b = np.asarray(final_b, dtype=np.float64)
        self.validate()

    @property
    def feature_dim(self) -> int:
        if self.hidden:
            return self.hidden[0][0].shape[0]
        return self.final_w.shape[0]

    @property
    def num_classes(self) -> int:
        return self.final_w.shape[1]

    def validate(self) -> None:
        width = None
        for w, b in self.hidden:
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError("hidden layer shape mismatch")
            if width is not None and w.shape[0] != width:
                raise ValueError("hidden layer width mismatch")
            width = w.shape[1]
        if self.final_w.ndim != 2 or self.final_b.ndim != 1:
            raise ValueError("final layer must be a matrix and a bias vector")
        if width is not None and self.final_w.shape[0] != width:
            raise ValueError("final layer input width mismatch")
        if self.final_w.shape[1] != self.final_b.shape[0]:
            raise ValueError("final bias length must equal class count")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")

    def ensure_finite(self) -> None:
        for w in self.parameters():
            if not np.all(np.isfinite(w)):
                raise NumericError("non-finite model parameter detected")

    def parameters(self) -> list[np.ndarray]:
        """Mutable views of every parameter block, hidden layers first."""
        out: list[np.ndarray] = []
        for w, b in self.hidden:
            out.extend([w, b])
        out.extend([self.final_w, self.final_b])
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "Classifier":
        return Classifier([(w.copy(), b.copy()) for w, b in self.hidden],
                          self.final_w.copy(), self.final_b.copy())

    def equals_bits(self, other: "Classifier") -> bool:
        mine, theirs = self.parameters(), other.parameters()
        if len(mine) != len(theirs):
            return False
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs))

    @classmethod
    def random_init(cls, feature_dim: int, hidden_sizes: list[int],
                    num_classes: int, rng: Rng) -> "Classifier":
        """He-normal hidden layers, 1/sqrt(fan_in) final layer, zero biases."""
        hidden = []
        fan_in = feature_dim
        for width in hidden_sizes:
            w = rng.normal(fan_in * width, sigma=np.sqrt(2.0 / fan_in)).reshape(fan_in, width)
            hidden.append((w, np.zeros(width)))
            fan_in = width
        final_w = rng.normal(fan_in * num_classes,
                             sigma=np.sqrt(1.0 / fan_in)).reshape(fan_in, num_classes)
        return cls(hidden, final_w, np.zeros(num_classes))


def forward(model: Classifier, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-sample forward pass -> (last hidden representation, logits)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_dim,):
        raise ValueError(f"expected input of shape ({model.feature_dim},), got {x.shape}")
    h = x
    for w, b in model.hidden:
        h = np.maximum(0.0, h @ w + b)
    logits = h @ model.final_w + model.final_b
    return h, logits


def forward_batch(model: Classifier, xs: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Batched forward pass keeping all activations for backprop.

    Returns (activations, logits) where activations[0] is the input batch
    and activations[i] the output of hidden layer i.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != model.feature_dim:
        raise ValueError(f"expected (n, {model.feature_dim}) batch, got {xs.shape}")
    acts = [xs]
    h = xs
    for w, b in model.hidden:
        h = np.maximum(0.0, h @ w + b)
        acts.append(h)
    logits = h @ model.final_w + model.final_b
    return acts, logits


def predict_probs(model: Classifier, xs: np.ndarray) -> np.ndarray:
    """Softmax outputs for a batch, shape (n, K)."""
    _, logits = forward_batch(model, xs)
    return softmax(logits)


def predict_classes(model: Classifier, xs: np.ndarray) -> np.ndarray:
    """Top-1 predictions; argmax breaks ties toward the lowest class index."""
    _, logits = forward_batch(model, xs)
    return np.argmax(logits, axis=1)


def backward_batch(model: Classifier, acts: list[np.ndarray],
                   dlogits: np.ndarray) -> list[np.ndarray]:
    """Gradients for every parameter block given d(loss)/d(logits).

    dlogits must already carry any batch averaging. The returned list is
    aligned with model.parameters().
    """
    grads_rev: list[np.ndarray] = []
    h_last = acts[-1]
    grads_rev.append(np.sum(dlogits, axis=0))            # final bias
    grads_rev.append(h_last.T @ dlogits)                 # final weights
    da = dlogits @ model.final_w.T
    for i in range(len(model.hidden) - 1, -1, -1):
        w, _ = model.hidden[i]
        dz = da * (acts[i + 1] > 0.0)
        grads_rev.append(np.sum(dz, axis=0))             # bias i
        grads_rev.append(acts[i].T @ dz)                 # weights i
        da = dz @ w.T
    return grads_rev[::-1]


class LossFn:
    """Per-sample loss on softmax outputs, with its gradient in logit space.

    `original_class` is the class the sample carried before any label
    rewriting; losses that do not care about it ignore the argument.
    Subclasses may override the batch methods with vectorized versions.
    """

    def value(self, probs: np.ndarray, target: np.ndarray, original_class: int) -> float:
        raise NotImplementedError

    def logit_grad(self, probs: np.ndarray, target: np.ndarray,
                   original_class: int) -> np.ndarray:
        raise NotImplementedError

    def batch_values(self, probs: np.ndarray, targets: np.ndarray,
                     classes: np.ndarray) -> np.ndarray:
        return np.array([self.value(probs[i], targets[i], int(classes[i]))
                         for i in range(len(probs))])

    def batch_logit_grads(self, probs: np.ndarray, targets: np.ndarray,
                          classes: np.ndarray) -> np.ndarray:
        return np.stack([self.logit_grad(probs[i], targets[i], int(classes[i]))
                         for i in range(len(probs))])


class CrossEntropyLoss(LossFn):
    def value(self, probs, target, original_class):
        return cross_entropy(probs, target)

    def logit_grad(self, probs, target, original_class):
        return probs - target

    def batch_values(self, probs, targets, classes):
        return -np.sum(targets * np.log(probs + LOG_EPS), axis=1)

    def batch_logit_grads(self, probs, targets, classes):
        return probs - targets


def train(model: Classifier, data: "LabeledDataset", cfg: TrainConfig,
          loss: LossFn) -> TrainLog:
    """Mini-batch SGD on the given loss; mutates the model in place.

    Deterministic: the same seed, data and config always produce
    bit-identical parameters.
    """
    log = TrainLog()
    if data.n_samples == 0:
        log.warnings.append("empty dataset: training skipped")
        return log
    if data.feature_dim != model.feature_dim:
        raise ValueError("dataset feature_dim does not match model")
    rng = Rng(cfg.seed)
    n = data.n_samples
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xs = data.features[idx]
            ts = data.labels[idx]
            cs = data.original_classes[idx]
            acts, logits = forward_batch(model, xs)
            probs = softmax(logits)
            total += float(np.sum(loss.batch_values(probs, ts, cs)))
            dlogits = loss.batch_logit_grads(probs, ts, cs) / len(idx)
            grads = backward_batch(model, acts, dlogits)
            if cfg.learning_rate != 0.0:
                for p, g in zip(model.parameters(), grads):
                    p -= cfg.learning_rate * g
        log.epoch_losses.append(total / n)
    model.ensure_finite()
    return log


def sample_gradient(model: Classifier, x: np.ndarray, target: np.ndarray,
                    loss: LossFn, original_class: int) -> list[np.ndarray]:
    """Analytic gradient of the loss for one sample, per parameter block."""
    acts, logits = forward_batch(model, x[None, :])
    probs = softmax(logits)[0]
    dlogits = loss.logit_grad(probs, target, original_class)[None, :]
    return backward_batch(model, acts, dlogits)


def gradient_check(model: Classifier, x: np.ndarray, target: np.ndarray,
                   loss: LossFn, original_class: int | None = None,
                   step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error for parameter p is |g_a - g_fd| / max(1, |g_a|, |g_fd|).
    Only meant for small models; refuses anything above 5000 parameters.
    """
    if model.num_parameters() > 5000:
        raise ValueError("gradient_check is limited to models with <= 5000 parameters")
    if original_class is None:
        original_class = int(np.argmax(target))

    def loss_at() -> float:
        _, logits = forward(model, x)
        return loss.value(softmax(logits), target, original_class)

    analytic = sample_gradient(model, x, target, loss, original_class)
    worst = 0.0
    for block, grad in zip(model.parameters(), analytic):
        flat = block.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = loss_at()
            flat[i] = saved - step
            down = loss_at()
            flat[i] = saved
            fd = (up - down) / (2.0 * step)
            err = abs(gflat[i] - fd) / max(1.0, abs(gflat[i]), abs(fd))
            worst = max(worst, err)
    return worst
