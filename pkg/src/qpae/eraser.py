"""Four-phase class-forgetting pipeline for softmax classifiers.

Phase 1 flips and shrinks the forgotten class's final-layer column
(destructive interference), phase 2 rewrites forgotten labels to the
uniform distribution (superposition), phase 3 retrains briefly with a
loss that keeps retained classes on cross-entropy while rewarding high
predictive entropy on forgotten samples, and phase 4 post-multiplies the
final weights by a mixing matrix that entangles the forgotten column
with the retained ones.

All of it acts on the final linear layer plus ordinary SGD; the quantum
vocabulary is naming, not hardware.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import LabeledDataset
from .model import (Classifier, LossFn, TrainConfig, cross_entropy,
                    predict_classes, predict_probs, train)


class InvalidClassError(ValueError):
    """A forget-set index that does not exist in the model."""


@dataclass
class UnlearnConfig:
    """Pipeline hyperparameters.

    `epochs` is the phase-3 epoch count E; the embedded TrainConfig
    contributes the optimizer settings (its own epoch field is ignored).
    The three skip flags ablate individual phases.
    """

    forget_set: frozenset[int]
    phi: float = math.pi
    entropy_lambda: float = 1.0
    alpha: float = 0.3
    epochs: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    skip_weight_transform: bool = False
    skip_uncertainty_max: bool = False
    skip_mixing: bool = False

    def __post_init__(self):
        self.forget_set = frozenset(int(c) for c in self.forget_set)
        if not self.forget_set:
            raise ValueError("forget_set must be non-empty")
        if min(self.forget_set) < 0:
            raise InvalidClassError("negative class index in forget_set")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.entropy_lambda <= 0.0:
            raise ValueError("entropy_lambda must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def _check_forget_set(forget_set: frozenset[int] | set[int], num_classes: int) -> None:
    if not forget_set:
        raise ValueError("forget_set must be non-empty")
    bad = [c for c in forget_set if c < 0 or c >= num_classes]
    if bad:
        raise InvalidClassError(f"class indices {sorted(bad)} out of range [0, {num_classes})")
    if len(forget_set) >= num_classes:
        raise InvalidClassError("forget_set must leave at least one retained class")


def interference_transform(model: Classifier, forget_set: set[int],
                           phi: float) -> Classifier:
    """Phase 1: scale each forgotten column by cos(phi)/sqrt(2), its bias
    by cos(phi). Everything else is untouched.
    """
    _check_forget_set(forget_set, model.num_classes)
    c = math.cos(phi)
    if abs(c) < 4e-16:
        c = 0.0  # phi at an odd multiple of pi/2 must zero the column exactly
    w_factor = c / math.sqrt(2.0)
    b_factor = c
    for j in sorted(forget_set):
        model.final_w[:, j] *= w_factor
        model.final_b[j] *= b_factor
    return model


def suppression_check(model_before: Classifier, model_after: Classifier,
                      forget_samples: LabeledDataset) -> float:
    """Mean drop in the softmax probability of each sample's own class."""
    if forget_samples.n_samples == 0:
        raise ValueError("need at least one forget sample")
    idx = np.arange(forget_samples.n_samples)
    own = forget_samples.original_classes
    p_before = predict_probs(model_before, forget_samples.features)[idx, own]
    p_after = predict_probs(model_after, forget_samples.features)[idx, own]
    return float(np.mean(p_before - p_after))


def superpose_labels(data: LabeledDataset, forget_set: set[int]) -> LabeledDataset:
    """Phase 2: forgotten samples get the uniform label over all K classes.

    Only the label matrix is copied; features and class bookkeeping are
    shared with the input (datasets are treated as immutable), keeping the
    relabeling cost independent of the feature width.
    """
    _check_forget_set(forget_set, data.num_classes)
    labels = data.labels.copy()
    mask = np.isin(data.original_classes, sorted(forget_set))
    labels[mask] = 1.0 / data.num_classes
    return LabeledDataset(data.features, labels, data.original_classes,
                          data.num_classes)


def quantum_loss(pred: np.ndarray, target: np.ndarray, original_class: int,
                 forget_set: set[int], entropy_lambda: float) -> float:
    """Cross-entropy on retained samples; -lambda * entropy on forgotten ones.

    The forget branch is the *negative* scaled entropy, so minimizing the
    loss drives predictions toward the uniform distribution; its minimum
    is -lambda * log K, attained exactly at uniform.
    """
    if original_class not in forget_set:
        return cross_entropy(pred, target)
    p = np.asarray(pred, dtype=np.float64)
    nz = p > 0.0
    return float(entropy_lambda * np.sum(p[nz] * np.log(p[nz])))


def quantum_loss_logit_grad(pred: np.ndarray, target: np.ndarray,
                            original_class: int, forget_set: set[int],
                            entropy_lambda: float) -> np.ndarray:
    """Gradient of quantum_loss with respect to the logits feeding `pred`.

    Forget branch: lambda * p_k * (log p_k + H(p)), which vanishes at the
    uniform distribution and always sums to zero. Retained branch: p - target.
    """
    p = np.asarray(pred, dtype=np.float64)
    if original_class not in forget_set:
        return p - np.asarray(target, dtype=np.float64)
    plogp = np.where(p > 0.0, p * np.log(np.maximum(p, 1e-300)), 0.0)
    h = -np.sum(plogp)
    return entropy_lambda * (plogp + p * h)


class QuantumLoss(LossFn):
    """Batch form of the dual-branch loss, keyed on original class."""

    def __init__(self, forget_set: set[int], entropy_lambda: float):
        self.forget_set = frozenset(forget_set)
        self.entropy_lambda = float(entropy_lambda)

    def value(self, probs, target, original_class):
        return quantum_loss(probs, target, original_class,
                            self.forget_set, self.entropy_lambda)

    def logit_grad(self, probs, target, original_class):
        return quantum_loss_logit_grad(probs, target, original_class,
                                       self.forget_set, self.entropy_lambda)

    def _forget_mask(self, classes: np.ndarray) -> np.ndarray:
        return np.isin(classes, sorted(self.forget_set))

    def batch_values(self, probs, targets, classes):
        plogp = np.where(probs > 0.0, probs * np.log(np.maximum(probs, 1e-300)), 0.0)
        ce = -np.sum(targets * np.log(probs + 1e-12), axis=1)
        neg_ent = self.entropy_lambda * np.sum(plogp, axis=1)
        return np.where(self._forget_mask(classes), neg_ent, ce)

    def batch_logit_grads(self, probs, targets, classes):
        plogp = np.where(probs > 0.0, probs * np.log(np.maximum(probs, 1e-300)), 0.0)
        h = -np.sum(plogp, axis=1, keepdims=True)
        forget_grad = self.entropy_lambda * (plogp + probs * h)
        retain_grad = probs - targets
        mask = self._forget_mask(classes)[:, None]
        return np.where(mask, forget_grad, retain_grad)


def build_mixing_matrix(num_classes: int, forget_set: set[int],
                        alpha: float) -> np.ndarray:
    """Phase-4 mixing matrix: unit diagonal, alpha between a forgotten and
    a retained class, zero between two forgotten classes.
    """
    _check_forget_set(forget_set, num_classes)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    forgotten = np.isin(np.arange(num_classes), sorted(forget_set))
    cross = forgotten[:, None] ^ forgotten[None, :]
    m = np.where(cross, alpha, 0.0)
    np.fill_diagonal(m, 1.0)
    return m


def apply_mixing(model: Classifier, mixing: np.ndarray) -> Classifier:
    """Phase 4: final_weights <- final_weights @ M. Bias is left alone; the
    forgotten bias was already inverted in phase 1.
    """
    k = model.num_classes
    if mixing.shape != (k, k):
        raise ValueError(f"mixing matrix must be ({k}, {k}), got {mixing.shape}")
    model.final_w = model.final_w @ mixing
    return model


def accuracy_snapshot(model: Classifier, data: LabeledDataset,
                      forget_set: frozenset[int]) -> tuple[float, float]:
    preds = predict_classes(model, data.features)
    correct = preds == data.original_classes
    mask = np.isin(data.original_classes, sorted(forget_set))
    fa = 100.0 * float(np.mean(correct[mask])) if mask.any() else 0.0
    ra = 100.0 * float(np.mean(correct[~mask])) if (~mask).any() else 0.0
    return fa, ra


def run_qp_audio_eraser(model: Classifier, data: LabeledDataset,
                        cfg: UnlearnConfig) -> tuple[Classifier, list[dict]]:
    """Run the four phases in order, mutating the model in place.

    Returns the model and a phase log: one entry per phase with
    forget/retain accuracy measured on `data` after the phase, the
    phase's own wall time in ms, and whether it was skipped by an
    ablation flag.
    """
    _check_forget_set(cfg.forget_set, model.num_classes)
    if data.feature_dim != model.feature_dim:
        raise ValueError("dataset feature_dim does not match model")
    log: list[dict] = []

    def record(phase: str, skipped: bool, wall_ms: float) -> None:
        fa, ra = accuracy_snapshot(model, data, cfg.forget_set)
        log.append({"phase": phase, "forget_accuracy": fa,
                    "retain_accuracy": ra, "wall_ms": wall_ms,
                    "skipped": skipped})

    if cfg.skip_weight_transform:
        record("interference", True, 0.0)
    else:
        t0 = time.perf_counter()
        interference_transform(model, cfg.forget_set, cfg.phi)
        record("interference", False, 1e3 * (time.perf_counter() - t0))

    t0 = time.perf_counter()
    relabeled = superpose_labels(data, cfg.forget_set)
    record("superposition", False, 1e3 * (time.perf_counter() - t0))

    if cfg.skip_uncertainty_max:
        record("optimization", True, 0.0)
    else:
        phase3_cfg = replace(cfg.train, epochs=cfg.epochs)
        loss = QuantumLoss(cfg.forget_set, cfg.entropy_lambda)
        t0 = time.perf_counter()
        train(model, relabeled, phase3_cfg, loss)
        record("optimization", False, 1e3 * (time.perf_counter() - t0))

    if cfg.skip_mixing:
        record("mixing", True, 0.0)
    else:
        t0 = time.perf_counter()
        mixing = build_mixing_matrix(model.num_classes, cfg.forget_set, cfg.alpha)
        apply_mixing(model, mixing)
        record("mixing", False, 1e3 * (time.perf_counter() - t0))

    model.ensure_finite()
    return model, log


__all__ = [
    "InvalidClassError", "UnlearnConfig", "interference_transform",
    "suppression_check", "superpose_labels", "quantum_loss",
    "quantum_loss_logit_grad", "QuantumLoss", "build_mixing_matrix",
    "apply_mixing", "run_qp_audio_eraser", "accuracy_snapshot",
]
