"""Mini-batch SGD with Nesterov momentum and weight decay."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import layers as L
from .datasets import LabeledDataset, batches, make_rng
from .errors import ConfigError, DataFormatError, DimensionError
from .model import Model
from .tensor import Tape

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.5
    weight_decay: float = 5e-4
    batch_size: int = 128
    epochs: int = 20
    lr_decay_epochs: tuple[int, ...] = ()
    lr_decay_factor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.lr_decay_epochs = tuple(int(e) for e in self.lr_decay_epochs)
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not self.weight_decay >= 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr_decay_factor > 0:
            raise ConfigError(f"lr_decay_factor must be > 0, got {self.lr_decay_factor}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


@dataclass
class EpochStats:
    epoch: int
    learning_rate: float
    loss: float
    train_error: float


def sgd_nesterov_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                      velocity: Sequence[np.ndarray], cfg: TrainConfig,
                      lr: float | None = None):
    """One in-place update; returns ``(params, velocity)`` for convenience.

    ``g' = g + wd·p``, ``v ← m·v + g'``, ``p ← p − lr·(g' + m·v)``.
    ``lr`` overrides ``cfg.learning_rate`` (the schedule passes it in).
    """
    lr = cfg.learning_rate if lr is None else lr
    momentum, weight_decay = cfg.momentum, cfg.weight_decay
    if not len(params) == len(grads) == len(velocity):
        raise DimensionError("params, grads and velocity differ in length")
    for p, g, v in zip(params, grads, velocity):
        if not p.shape == g.shape == v.shape:
            raise DimensionError(f"shape mismatch {p.shape} / {g.shape} / {v.shape}")
        d = g + weight_decay * p if weight_decay else g.copy()
        v *= momentum
        v += d
        p -= lr * (d + momentum * v)
    return params, velocity


def _check_dataset(model: Model, dataset: LabeledDataset) -> None:
    if len(dataset) == 0:
        raise DataFormatError("empty dataset")
    if dataset.labels.max() >= model.n_classes:
        raise DataFormatError(
            f"label {int(dataset.labels.max())} out of range for {model.n_classes} classes")


def train(model: Model, dataset: LabeledDataset, cfg: TrainConfig,
          on_epoch: Callable[[EpochStats], None] | None = None) -> tuple[Model, list[EpochStats]]:
    """Train ``model`` in place. Shuffling depends only on ``cfg.seed``."""
    _check_dataset(model, dataset)
    params = model.params()
    velocity = [np.zeros_like(p.data) for p in params]
    rng = make_rng(cfg.seed)
    lr = cfg.learning_rate
    history: list[EpochStats] = []
    for epoch in range(cfg.epochs):
        if epoch in cfg.lr_decay_epochs:
            lr *= cfg.lr_decay_factor
        total, wrong = 0.0, 0
        for X, y in batches(dataset, cfg.batch_size, rng=rng):
            with Tape() as tape:
                log_probs = model.forward(X)
                loss = L.cross_entropy(log_probs, y)
            tape.backward(loss)
            total += loss.item() * len(y)
            wrong += int(np.sum(np.argmax(log_probs.data, axis=0) != y))
            sgd_nesterov_step([p.data for p in params], [p.grad for p in params], velocity,
                              cfg, lr)
        stats = EpochStats(epoch + 1, lr, total / len(dataset), wrong / len(dataset))
        history.append(stats)
        log.info("epoch %d lr %.4g loss %.5f train error %.4f",
                 stats.epoch, lr, stats.loss, stats.train_error)
        if on_epoch is not None:
            on_epoch(stats)
    return model, history


def evaluate_accuracy(model: Model, dataset: LabeledDataset, batch_size: int = 1000) -> float:
    """Error rate under argmax (ties go to the lowest class index)."""
    _check_dataset(model, dataset)
    pred = np.argmax(model.probabilities(dataset.inputs, batch_size), axis=0)
    return float(np.mean(pred != dataset.labels))


def dataset_loss(model: Model, dataset: LabeledDataset, batch_size: int = 1000) -> float:
    total = 0.0
    for X, y in batches(dataset, batch_size, shuffle=False):
        total += L.cross_entropy(model.forward(X), y).item() * len(y)
    return total / len(dataset)


def default_config(preset: str) -> TrainConfig:
    """Training recipe per preset: the standard CNN recipe and a gentler one for the toy MLP."""
    if preset == "toy":
        return TrainConfig(learning_rate=0.01, momentum=0.5, weight_decay=5e-4,
                           batch_size=32, epochs=200)
    return TrainConfig()
