"""Class-conditional densities and equal-prior Bayes posteriors.

Densities are written in terms of an offset ``mu`` and evaluate
``‖x + mu‖²``; a density therefore peaks at ``location = -mu``. With that
convention a quadratic-layer row ``w_i`` corresponds to ``mu = w_i / 2``.
The covariance is always the identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionError

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_LANCZOS_G = 7
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lgamma(z: float) -> float:
    """log Γ(z) for z > 0 by the Lanczos approximation (g=7, 9 terms)."""
    if z <= 0:
        raise ValueError(f"lgamma defined here for z > 0 only, got {z}")
    if z < 0.5:
        # reflection: Γ(z)Γ(1-z) = π / sin(πz)
        return math.log(math.pi / math.sin(math.pi * z)) - lgamma(1.0 - z)
    z -= 1.0
    x = _LANCZOS_COEF[0]
    for i in range(1, _LANCZOS_G + 2):
        x += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    # (z+½)·log t − t regrouped to avoid cancelling two large terms
    return (z + 0.5) * (math.log(t) - 1.0) + (math.log(x) + (_HALF_LOG_2PI - _LANCZOS_G))


def log_beta(a: float, b: float) -> float:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


@dataclass(frozen=True)
class ClassConditional:
    kind: str
    mu: np.ndarray = field(repr=False)
    nu: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t"):
            raise ConfigError(f"unknown conditional kind {self.kind!r}")
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=np.float64)))
        if self.kind == "student_t" and (self.nu is None or not self.nu > 0):
            raise ConfigError(f"student_t conditional needs nu > 0, got {self.nu}")

    @classmethod
    def gaussian(cls, location) -> "ClassConditional":
        return cls("gaussian", -np.asarray(location, dtype=np.float64))

    @classmethod
    def student_t(cls, location, nu: float) -> "ClassConditional":
        return cls("student_t", -np.asarray(location, dtype=np.float64), float(nu))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def location(self) -> np.ndarray:
        return -self.mu


def _sq_dist(c: ClassConditional, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != c.dim:
        raise DimensionError(f"point dimension {x.shape[-1]} != conditional dimension {c.dim}")
    d = x + c.mu
    return np.sum(d * d, axis=-1)


def _unnormalized_log(c: ClassConditional, x) -> np.ndarray:
    r2 = _sq_dist(c, x)
    if c.kind == "gaussian":
        return -0.5 * r2
    return -(c.nu + 1.0) / 2.0 * np.log1p(r2 / c.nu)


def gaussian_log_pdf(c: ClassConditional, x):
    if c.kind != "gaussian":
        raise ConfigError("gaussian_pdf needs a gaussian conditional")
    return -0.5 * c.dim * math.log(2 * math.pi) + _unnormalized_log(c, x)


def gaussian_pdf(c: ClassConditional, x):
    return np.exp(gaussian_log_pdf(c, x))


def t_log_pdf(c: ClassConditional, x):
    """Log density with the univariate normaliser ``1/(√ν B(½, ν/2))``.

    For ``dim > 1`` this normaliser is kept as is, so the result is not a
    normalised multivariate density. It cancels in posteriors.
    """
    if c.kind != "student_t":
        raise ConfigError("t_pdf needs a student_t conditional")
    log_norm = -0.5 * math.log(c.nu) - log_beta(0.5, c.nu / 2.0)
    return log_norm + _unnormalized_log(c, x)


def t_pdf(c: ClassConditional, x):
    return np.exp(t_log_pdf(c, x))


def bayes_posterior(conditionals: Sequence[ClassConditional], x) -> np.ndarray:
    """Posterior class probabilities under equal priors.

    ``x`` may be a single point (``N``) or a batch (``m × N``); the class
    axis is last.
    """
    if len(conditionals) < 2:
        raise ConfigError("need at least two class conditionals")
    kinds = {c.kind for c in conditionals}
    if len(kinds) != 1:
        raise ConfigError(f"mixed conditional kinds {sorted(kinds)}")
    if len({c.dim for c in conditionals}) != 1:
        raise DimensionError("conditionals disagree on dimension")
    logs = np.stack([_unnormalized_log(c, x) for c in conditionals], axis=-1)
    m = logs.max(axis=-1, keepdims=True)
    shifted = logs - m
    return np.exp(shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True)))
