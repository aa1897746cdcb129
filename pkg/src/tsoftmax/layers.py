"""Layers and output operators.

Dense layers use a features-by-batch layout: an input ``X`` has shape
``N × N_b`` and a layer with ``N_c`` outputs returns ``N_c × N_b``.
Convolutional layers use ``b × c × h × w``.
"""
from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError, DomainError
from .tensor import Tensor

#: Rounding may push a squared distance slightly below zero; beyond this it is a bug.
NEGATIVE_TOLERANCE = 1e-9


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    kind = "layer"

    def params(self) -> list[Tensor]:
        return []

    def dims(self) -> tuple[int, ...]:
        return ()

    def __call__(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class FullyConnected(Layer):
    """Affine map ``W X + b`` with free weights and biases."""

    kind = "fc"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.W = Tensor(_uniform(rng, (n_out, n_in), n_in), requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True)

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def params(self):
        return [self.W, self.b]

    def dims(self):
        return (self.n_in, self.n_out)

    def __call__(self, x):
        return fc_forward(self, x)


class QuadraticLayer(Layer):
    """Squared distances ``‖x_j + w_i/2‖²`` built as ``A + W X + B``.

    Only ``W`` is learned; the bias ``¼‖w_i‖²`` follows from it.
    """

    kind = "quadratic"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.W = Tensor(_uniform(rng, (n_out, n_in), n_in), requires_grad=True)

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def params(self):
        return [self.W]

    def dims(self):
        return (self.n_in, self.n_out)

    def __call__(self, x):
        return quadratic_forward(self, x)


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = c_in * k * k
        self.kernel = Tensor(_uniform(rng, (c_out, c_in, k, k), fan_in), requires_grad=True)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)

    def params(self):
        return [self.kernel, self.bias]

    def dims(self):
        o, c, kh, _ = self.kernel.shape
        return (c, o, kh)

    def __call__(self, x):
        return T.conv2d(x, self.kernel, self.bias)


class MaxPool2d(Layer):
    kind = "maxpool2d"

    def __call__(self, x):
        return T.maxpool2d(x)


class ReLU(Layer):
    kind = "relu"

    def __call__(self, x):
        return T.relu(x)


class Flatten(Layer):
    """``b × c × h × w`` to the dense ``(c·h·w) × b`` layout."""

    kind = "flatten"

    def __call__(self, x):
        return T.transpose(T.reshape(x, (x.shape[0], -1)))


def _check_dense_input(layer, X: Tensor) -> None:
    if X.ndim != 2 or X.shape[0] != layer.n_in:
        raise DimensionError(
            f"{layer.kind}: expected input with {layer.n_in} rows, got shape {X.shape}")


def fc_forward(layer: FullyConnected, X) -> Tensor:
    X = T._as_tensor(X)
    _check_dense_input(layer, X)
    return T.add_bias(T.matmul(layer.W, X), layer.b, axis=0)


def quadratic_forward(layer: QuadraticLayer, X) -> Tensor:
    """Return ``Y`` with ``y_ij = x_jᵀx_j + w_iᵀx_j + ¼ w_iᵀw_i``.

    The per-column and per-row terms are kept as vectors (``N_b`` and
    ``N_c`` dot products); the full ``A`` and ``B`` matrices never exist.
    Rounding negatives down to ``-NEGATIVE_TOLERANCE`` are clamped to 0.
    """
    X = T._as_tensor(X)
    _check_dense_input(layer, X)
    W = layer.W
    a = T.sum(X * X, axis=0)
    b = T.sum(W * W, axis=1) * 0.25
    Y = T.add_bias(T.add_bias(T.matmul(W, X), a, axis=1), b, axis=0)
    lowest = Y.data.min() if Y.size else 0.0
    if lowest < -NEGATIVE_TOLERANCE:
        raise DomainError(f"quadratic layer produced a negative distance {lowest:.3e}")
    if lowest < 0:
        Y = T.relu(Y)
    return Y


def log_softmax(Z) -> Tensor:
    """Column-wise log of the softmax, stabilised by max subtraction."""
    Z = T._as_tensor(Z)
    if Z.ndim != 2:
        raise DimensionError(f"softmax expects N_c × N_b, got {Z.shape}")
    return T.add_bias(Z, T.neg(T.logsumexp(Z, axis=0)), axis=1)


def softmax(Z) -> Tensor:
    return T.exp(log_softmax(Z))


def _check_nu(nu: float) -> float:
    nu = float(nu)
    if not nu > 0 or not math.isfinite(nu):
        raise ConfigError(f"nu must be a positive finite number, got {nu}")
    return nu


def log_t_softmax(Y, nu: float) -> Tensor:
    """Log of the t-softmax posterior for squared distances ``Y``.

    ``ℓ_ij = −(ν+1)/2 · log1p(y_ij/ν)`` normalised over classes with
    logsumexp, so large ``y`` or ``ν`` never underflow.
    """
    nu = _check_nu(nu)
    Y = T._as_tensor(Y)
    if Y.ndim != 2:
        raise DimensionError(f"t_softmax expects N_c × N_b, got {Y.shape}")
    lowest = Y.data.min() if Y.size else 0.0
    if lowest < -NEGATIVE_TOLERANCE:
        raise DomainError(f"t_softmax needs non-negative inputs, got {lowest:.3e}")
    if lowest < 0:
        Y = T.relu(Y)
    ell = T.log1p(Y * (1.0 / nu)) * (-(nu + 1.0) / 2.0)
    return log_softmax(ell)


def t_softmax(Y, nu: float) -> Tensor:
    return T.exp(log_t_softmax(Y, nu))


def cross_entropy(log_probs, targets) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under column log-probabilities."""
    log_probs = T._as_tensor(log_probs)
    targets = np.asarray(targets, dtype=np.int64)
    n_c = log_probs.shape[0]
    if targets.size and (targets.min() < 0 or targets.max() >= n_c):
        raise DimensionError(f"target index out of range for {n_c} classes")
    sums = np.exp(log_probs.data).sum(axis=0)
    if np.abs(sums - 1.0).max(initial=0.0) > 1e-9:
        raise DomainError("cross_entropy: columns are not probability vectors")
    return T.neg(T.mean(T.pick(log_probs, targets)))


def cross_entropy_loss(probs, targets) -> Tensor:
    """Cross entropy from probabilities; prefer :func:`cross_entropy` on logs."""
    probs = T._as_tensor(probs)
    targets = np.asarray(targets, dtype=np.int64)
    n_c = probs.shape[0]
    if targets.size and (targets.min() < 0 or targets.max() >= n_c):
        raise DimensionError(f"target index out of range for {n_c} classes")
    if np.abs(probs.data.sum(axis=0) - 1.0).max(initial=0.0) > 1e-9:
        raise DomainError("cross_entropy: columns are not probability vectors")
    return T.neg(T.mean(T.log(T.pick(probs, targets))))
