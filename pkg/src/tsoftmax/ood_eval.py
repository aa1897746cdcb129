"""Confidence scores and out-of-distribution figures of merit.

Scores follow the convention "higher means more in-distribution"; IND is
the positive class throughout.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import asdict, dataclass
from decimal import Decimal
from typing import Callable, Sequence

import numpy as np

from . import layers as L
from . import tensor as T
from .datasets import make_rng
from .errors import ConfigError, DimensionError, DomainError
from .model import Model
from .tensor import Tape, Tensor


@dataclass(frozen=True)
class ScoredSample:
    score: float
    is_ind: bool


@dataclass(frozen=True)
class OdinConfig:
    epsilon: float = 0.0014
    gamma: float = 1000.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError(f"ODIN epsilon must be >= 0, got {self.epsilon}")
        if not self.gamma > 0:
            raise ConfigError(f"ODIN gamma must be > 0, got {self.gamma}")


CSV_FIELDS = ("model_name", "head", "nu", "ood_name", "n_ind", "n_ood",
              "fpr95", "de", "auroc", "aupr_in", "test_error")


@dataclass
class MetricsReport:
    ood_name: str
    fpr_at_95_tpr: float
    detection_error: float
    auroc: float
    aupr_in: float
    n_ind: int
    n_ood: int

    def csv_row(self, model_name: str, head: str, nu: float | None, test_error: float) -> list[str]:
        return [model_name, head, "" if nu is None else repr(nu), self.ood_name,
                str(self.n_ind), str(self.n_ood), repr(self.fpr_at_95_tpr),
                repr(self.detection_error), repr(self.auroc), repr(self.aupr_in),
                repr(float(test_error))]


def write_csv(rows: Sequence[Sequence[str]], fh=None) -> str:
    buf = io.StringIO() if fh is None else fh
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    writer.writerows(rows)
    return buf.getvalue() if fh is None else ""


# -- scorers ----------------------------------------------------------------

def _check_input(model: Model, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1:] != model.input_shape:
        raise DimensionError(f"expected samples of shape {model.input_shape}, got {X.shape[1:]}")
    return X


def _max_prob(log_probs: Tensor) -> np.ndarray:
    return np.exp(log_probs.data).max(axis=0)


def confidence_max_prob(model: Model, X, batch_size: int = 500) -> np.ndarray:
    """Largest head probability per sample (softmax or t-softmax)."""
    X = _check_input(model, X)
    return np.concatenate([_max_prob(model.forward(X[i:i + batch_size]))
                           for i in range(0, X.shape[0], batch_size)])


def _odin_batch(model: Model, X: np.ndarray, cfg: OdinConfig) -> np.ndarray:
    x = Tensor._wrap(X.copy())
    x.requires_grad = True
    with Tape() as tape:
        top = T.max(model.head_log_probs(model.logits(x), cfg.gamma), axis=0)
        total = T.sum(top)
    tape.backward(total)
    # x̃ = x − ε·sign(−∇ log S) = x + ε·sign(∇ log S); 0·sign keeps ε=0 exact
    x_tilde = X - cfg.epsilon * np.sign(-x.grad)
    return _max_prob(model.head_log_probs(model.logits(x_tilde), cfg.gamma))


def odin_score(model: Model, X, cfg: OdinConfig = OdinConfig(), batch_size: int = 500) -> np.ndarray:
    """Temperature-scaled max softmax after a gradient-sign input perturbation.

    One forward-backward pass for the input gradient, then one forward pass
    on the perturbed input.
    """
    if model.head != "softmax":
        raise ConfigError("ODIN is only defined for softmax-head models")
    X = _check_input(model, X)
    return np.concatenate([_odin_batch(model, X[i:i + batch_size], cfg)
                           for i in range(0, X.shape[0], batch_size)])


SCORERS = {
    "maxprob": lambda model, X, cfg=None: confidence_max_prob(model, X),
    "odin": lambda model, X, cfg=None: odin_score(model, X, cfg or OdinConfig()),
}


# -- metrics ----------------------------------------------------------------

def _split(samples: Sequence[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([s.score for s in samples], dtype=np.float64)
    is_ind = np.array([s.is_ind for s in samples], dtype=bool)
    if not np.isfinite(scores).all():
        raise DomainError("scores must be finite")
    return scores, is_ind


def samples_from_scores(ind_scores, ood_scores) -> list[ScoredSample]:
    return ([ScoredSample(float(s), True) for s in ind_scores]
            + [ScoredSample(float(s), False) for s in ood_scores])


def _sweep(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    """Cumulative TP/FP counts at each distinct threshold, descending."""
    scores, is_ind = _split(samples)
    n_pos, n_neg = int(is_ind.sum()), int((~is_ind).sum())
    order = np.argsort(-scores, kind="stable")
    scores, is_ind = scores[order], is_ind[order]
    tp = np.cumsum(is_ind)
    fp = np.cumsum(~is_ind)
    # keep the last position of every run of equal scores
    last = np.r_[scores[1:] != scores[:-1], True] if scores.size else np.zeros(0, bool)
    return scores[last], tp[last], fp[last], n_pos, n_neg


def _require_both(n_pos: int, n_neg: int) -> None:
    if n_pos == 0 or n_neg == 0:
        raise DomainError("need at least one IND and one OOD sample")


def roc_points(samples) -> list[tuple[float, float]]:
    """(FPR, TPR) at every distinct threshold, with (0,0) and (1,1) added."""
    _, tp, fp, n_pos, n_neg = _sweep(samples)
    _require_both(n_pos, n_neg)
    pts = [(0.0, 0.0)] + [(f / n_neg, t / n_pos) for t, f in zip(tp.tolist(), fp.tolist())]
    if pts[-1] != (1.0, 1.0):
        pts.append((1.0, 1.0))
    return pts


def auroc(samples) -> float:
    pts = np.array(roc_points(samples))
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


def aupr(samples) -> float:
    """Average precision with IND as the positive class.

    The terms are summed with ``math.fsum`` so the result does not depend on
    summation order.
    """
    _, tp, fp, n_pos, _ = _sweep(samples)
    if n_pos == 0:
        raise DomainError("AUPR needs at least one positive (IND) sample")
    recall = tp / n_pos
    precision = tp / (tp + fp)
    return math.fsum((np.diff(np.r_[0.0, recall]) * precision).tolist())


def fpr_at_tpr(samples, tpr_target: float = 0.95) -> float:
    """FPR at the highest threshold whose TPR reaches ``tpr_target``."""
    _, tp, fp, n_pos, n_neg = _sweep(samples)
    _require_both(n_pos, n_neg)
    k = int(np.argmax(tp / n_pos >= tpr_target))
    return float(fp[k] / n_neg)


def detection_error(fpr: float, tpr: float = 0.95) -> float:
    """``0.5(1 − TPR) + 0.5 FPR``, assuming balanced IND and OOD sets.

    Evaluated in decimal so nominal rates such as 0.95 round correctly.
    """
    for name, v in (("fpr", fpr), ("tpr", tpr)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {v}")
    half = Decimal("0.5")
    return float(half * (1 - Decimal(repr(float(tpr)))) + half * Decimal(repr(float(fpr))))


def evaluate_scores(ind_scores, ood_scores, ood_name: str, tpr_target: float = 0.95) -> MetricsReport:
    samples = samples_from_scores(ind_scores, ood_scores)
    fpr = fpr_at_tpr(samples, tpr_target)
    return MetricsReport(ood_name, fpr, detection_error(fpr, tpr_target), auroc(samples),
                         aupr(samples), len(ind_scores), len(ood_scores))


def balance(ind: np.ndarray, ood: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncate the larger set to the smaller, keeping a seeded random subset."""
    n = min(len(ind), len(ood))
    rng = make_rng(seed)
    if len(ind) > n:
        ind = ind[np.sort(rng.permutation(len(ind))[:n])]
    if len(ood) > n:
        ood = ood[np.sort(rng.permutation(len(ood))[:n])]
    return ind, ood


# -- timing -----------------------------------------------------------------

def timing_harness(model: Model, X, scorer: Callable, repeats: int = 5, warmup: int = 3) -> float:
    """Median over ``repeats`` runs of the mean wall time per sample (seconds)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 100:
        raise ConfigError("timing needs at least 100 samples")
    if warmup < 3:
        raise ConfigError("timing needs at least 3 warmup repetitions")
    for _ in range(warmup):
        scorer(model, X)
    runs = []
    for _ in range(repeats):
        start = time.perf_counter()
        scorer(model, X)
        runs.append((time.perf_counter() - start) / X.shape[0])
    return statistics.median(runs)
