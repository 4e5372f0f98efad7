"""Comparison unlearners: gradient ascent, negative gradient, Fisher
noise scrubbing, and selective synaptic dampening.

These are minimal reconstructions of the methods' core update rules,
sharing the SGD machinery from the model module. Their knobs live in
BaselineConfig; defaults are tuned for the desk-scale benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .model import (Classifier, CrossEntropyLoss, LossFn, TrainConfig,
                    forward_batch, softmax, train)
from .rng import Rng, derive_seed

FISHER_EPS = 1e-8

METHOD_NAMES = ("gradient_ascent", "negative_gradient",
                "fisher_forgetting", "synaptic_dampening")


@dataclass
class BaselineConfig:
    method: str = "gradient_ascent"
    ascent_epochs: int = 4
    finetune_epochs: int = 1
    learning_rate: float = 0.12
    batch_size: int = 24
    fisher_noise_scale: float = 1e-4   # gamma; conservative by default
    ssd_threshold: float = 0.01        # tau; aggressive by default
    ssd_dampening_floor: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ValueError(f"unknown baseline method {self.method!r}")
        if self.ascent_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.fisher_noise_scale < 0:
            raise ValueError("fisher_noise_scale must be >= 0")
        if self.ssd_threshold <= 0:
            raise ValueError("ssd_threshold must be positive")


class NegatedCrossEntropyLoss(LossFn):
    """Cross-entropy with flipped sign: SGD on it *ascends* the CE surface."""

    def value(self, probs, target, original_class):
        return float(np.sum(target * np.log(probs + 1e-12)))

    def logit_grad(self, probs, target, original_class):
        return target - probs

    def batch_values(self, probs, targets, classes):
        return np.sum(targets * np.log(probs + 1e-12), axis=1)

    def batch_logit_grads(self, probs, targets, classes):
        return targets - probs


def _ascend(model: Classifier, data: LabeledDataset, forget_set: set[int],
            cfg: BaselineConfig) -> Classifier:
    forget_data, _ = data.class_split(forget_set)
    if forget_data.n_samples == 0:
        return model
    ascent_cfg = TrainConfig(learning_rate=cfg.learning_rate,
                             epochs=cfg.ascent_epochs,
                             batch_size=cfg.batch_size,
                             seed=derive_seed(cfg.seed, 0xA5CE))
    train(model, forget_data, ascent_cfg, NegatedCrossEntropyLoss())
    return model


def gradient_ascent_unlearn(model: Classifier, data: LabeledDataset,
                            forget_set: set[int], cfg: BaselineConfig) -> Classifier:
    """Ascent on the forget split, then CE fine-tuning on the retain split."""
    _ascend(model, data, forget_set, cfg)
    _, retain_data = data.class_split(forget_set)
    if retain_data.n_samples and cfg.finetune_epochs:
        finetune_cfg = TrainConfig(learning_rate=cfg.learning_rate,
                                   epochs=cfg.finetune_epochs,
                                   batch_size=cfg.batch_size,
                                   seed=derive_seed(cfg.seed, 0xF17E))
        train(model, retain_data, finetune_cfg, CrossEntropyLoss())
    return model


def negative_gradient_unlearn(model: Classifier, data: LabeledDataset,
                              forget_set: set[int], cfg: BaselineConfig) -> Classifier:
    """Ascent on the forget split with no repair pass afterwards."""
    return _ascend(model, data, forget_set, cfg)


def estimate_diag_fisher(model: Classifier, samples: LabeledDataset) -> list[np.ndarray]:
    """Diagonal empirical Fisher: mean squared per-sample CE gradient.

    Uses the outer-product structure of dense-layer gradients: the squared
    per-sample weight gradient is activation^2 (x) delta^2, so the whole
    dataset reduces to one matmul per layer. Returns one array per
    parameter block, aligned with model.parameters().
    """
    if samples.n_samples == 0:
        raise ValueError("need at least one sample")
    n = samples.n_samples
    acts, logits = forward_batch(model, samples.features)
    delta = softmax(logits) - samples.labels        # per-sample logit grads
    fisher_rev: list[np.ndarray] = []
    d2 = delta ** 2
    fisher_rev.append(np.mean(d2, axis=0))                    # final bias
    fisher_rev.append((acts[-1] ** 2).T @ d2 / n)             # final weights
    da = delta @ model.final_w.T
    for i in range(len(model.hidden) - 1, -1, -1):
        w, _ = model.hidden[i]
        dz = da * (acts[i + 1] > 0.0)
        dz2 = dz ** 2
        fisher_rev.append(np.mean(dz2, axis=0))               # bias i
        fisher_rev.append((acts[i] ** 2).T @ dz2 / n)         # weights i
        da = dz @ w.T
    return fisher_rev[::-1]


def fisher_forgetting(model: Classifier, data: LabeledDataset,
                      forget_set: set[int], cfg: BaselineConfig) -> Classifier:
    """Add seeded Gaussian noise scaled by the forget/retain Fisher ratio."""
    forget_data, retain_data = data.class_split(forget_set)
    if forget_data.n_samples == 0 or cfg.fisher_noise_scale == 0.0:
        return model
    f_forget = estimate_diag_fisher(model, forget_data)
    f_retain = estimate_diag_fisher(model, retain_data) if retain_data.n_samples \
        else [np.zeros_like(f) for f in f_forget]
    rng = Rng(derive_seed(cfg.seed, 0xF15E))
    for param, ff, fr in zip(model.parameters(), f_forget, f_retain):
        sigma = cfg.fisher_noise_scale * np.sqrt(ff / (fr + FISHER_EPS))
        noise = rng.normal(param.size).reshape(param.shape)
        param += sigma * noise
    model.ensure_finite()
    return model


def synaptic_dampening(model: Classifier, data: LabeledDataset,
                       forget_set: set[int], cfg: BaselineConfig) -> Classifier:
    """Shrink parameters whose forget-set Fisher dominates the overall one.

    A parameter is selected when F_forget > tau * F_full and is scaled by
    min(floor * F_full / F_forget, 1); dampening never amplifies.
    """
    forget_data, _ = data.class_split(forget_set)
    if forget_data.n_samples == 0:
        return model
    f_forget = estimate_diag_fisher(model, forget_data)
    f_full = estimate_diag_fisher(model, data)
    for param, ff, fa in zip(model.parameters(), f_forget, f_full):
        selected = ff > cfg.ssd_threshold * fa
        beta = np.where(selected,
                        np.minimum(cfg.ssd_dampening_floor * fa / np.maximum(ff, 1e-300), 1.0),
                        1.0)
        param *= beta
    model.ensure_finite()
    return model


def run_baseline(model: Classifier, data: LabeledDataset, forget_set: set[int],
                 cfg: BaselineConfig) -> Classifier:
    """Dispatch by cfg.method; mutates and returns the model."""
    fn = {
        "gradient_ascent": gradient_ascent_unlearn,
        "negative_gradient": negative_gradient_unlearn,
        "fisher_forgetting": fisher_forgetting,
        "synaptic_dampening": synaptic_dampening,
    }[cfg.method]
    return fn(model, data, forget_set, cfg)
