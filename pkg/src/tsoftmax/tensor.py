"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the innermost active :class:`Tape` when at
least one operand requires a gradient. Outside a tape everything runs as
plain numpy, which is what evaluation code relies on.

    >>> x = Tensor([3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     y = sum(x * x)
    >>> tape.backward(y)
    >>> x.grad
    array([6.])
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, DomainError, NonFiniteError

_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values")


class Tensor:
    """An n-dimensional float64 array plus gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr, "Tensor")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.grad = None
        return t

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, pow_scalar(other, -1.0))
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return pow_scalar(self, p)

    # Tensors are graph nodes and must hash by identity.
    __hash__ = object.__hash__


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Append-only record of differentiable operations.

    Use as a context manager; a tape is meant for a single forward pass and
    is emptied by :meth:`backward`.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def backward(self, output: Tensor) -> None:
        """Populate ``.grad`` on every tensor that requires a gradient.

        Gradients are assigned, not accumulated across calls.
        """
        if output.size != 1:
            raise DimensionError(f"backward needs a scalar output, got shape {output.shape}")
        grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
        touched: dict[int, Tensor] = {id(output): output}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            node.output.grad = g
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not (isinstance(inp, Tensor) and inp.requires_grad):
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
                    touched[key] = inp
        # whatever is left never appeared as a node output: leaves
        for key, g in grads.items():
            touched[key].grad = g
        self.nodes = []


def backward(tape: Tape, output: Tensor) -> None:
    tape.backward(output)


def no_tape_active() -> bool:
    return not _tape_stack()


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(op: str, data: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    _check_finite(data, op)
    out = Tensor._wrap(data)
    stack = _tape_stack()
    if stack and any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        out.requires_grad = True
        stack[-1].record(Node(op, inputs, out, backward_fn))
    return out


def _binary_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("add", a, b)
    return _result("add", a.data + b.data, (a, b),
                   lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("sub", a, b)
    return _result("sub", a.data - b.data, (a, b),
                   lambda g: (_reduce_to(g, a.shape), _reduce_to(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("mul", a, b)
    return _result("mul", a.data * b.data, (a, b),
                   lambda g: (_reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)))


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    return _result("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _result("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    if (a.data <= 0).any():
        raise DomainError("log: argument must be > 0")
    return _result("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def log1p(a) -> Tensor:
    a = _as_tensor(a)
    if (a.data <= -1).any():
        raise DomainError("log1p: argument must be > -1")
    return _result("log1p", np.log1p(a.data), (a,), lambda g: (g / (1.0 + a.data),))


def pow_scalar(a, p: float) -> Tensor:
    a = _as_tensor(a)
    p = float(p)
    if not p.is_integer() and (a.data < 0).any():
        raise DomainError(f"pow_scalar: negative base with non-integer exponent {p}")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.power(a.data, p)
    return _result("pow_scalar", out, (a,),
                   lambda g: (g * p * np.power(a.data, p - 1.0),))


# -- linear algebra and shape ----------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _result("matmul", a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g))


def add_bias(x, bias, axis: int) -> Tensor:
    """Add a vector along ``axis`` of ``x`` (the only broadcast we allow)."""
    x, bias = _as_tensor(x), _as_tensor(bias)
    if not 0 <= axis < x.ndim:
        raise DimensionError(f"add_bias: axis {axis} out of range for rank {x.ndim}")
    if bias.shape != (x.shape[axis],):
        raise DimensionError(f"add_bias: bias shape {bias.shape} does not match axis {axis} of {x.shape}")
    view = [1] * x.ndim
    view[axis] = -1
    others = tuple(i for i in range(x.ndim) if i != axis)
    return _result("add_bias", x.data + bias.data.reshape(view), (x, bias),
                   lambda g: (g, g.sum(axis=others)))


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"reshape: cannot reshape {x.shape} to {shape}") from e
    return _result("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {x.shape}")
    return _result("transpose", x.data.T, (x,), lambda g: (g.T,))


def pick(x, index) -> Tensor:
    """Column-wise gather: ``out[j] = x[index[j], j]``."""
    x = _as_tensor(x)
    idx = np.asarray(index, dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[1],):
        raise DimensionError(f"pick: index shape {idx.shape} does not fit {x.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise DimensionError(f"pick: index out of range for {x.shape[0]} rows")
    cols = np.arange(x.shape[1])

    def bw(g):
        full = np.zeros_like(x.data)
        full[idx, cols] = g
        return (full,)

    return _result("pick", x.data[idx, cols], (x,), bw)


# -- reductions -------------------------------------------------------------

def _check_axis(op: str, x: Tensor, axis) -> None:
    if axis is not None and not 0 <= axis < x.ndim:
        raise DimensionError(f"{op}: axis {axis} out of range for rank {x.ndim}")


def sum(x, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    x = _as_tensor(x)
    _check_axis("sum", x, axis)
    out = x.data.sum(axis=axis)

    def bw(g):
        if axis is None:
            return (np.full(x.shape, g),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _result("sum", np.asarray(out), (x,), bw)


def mean(x, axis: Optional[int] = None) -> Tensor:
    x = _as_tensor(x)
    _check_axis("mean", x, axis)
    n = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def max(x, axis: int) -> Tensor:  # noqa: A001
    """Maximum along ``axis``; the gradient goes to the first maximiser."""
    x = _as_tensor(x)
    _check_axis("max", x, axis)
    arg = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(arg, axis), axis).squeeze(axis)

    def bw(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis)
        return (full,)

    return _result("max", out, (x,), bw)


def logsumexp(x, axis: int) -> Tensor:
    x = _as_tensor(x)
    _check_axis("logsumexp", x, axis)
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = np.exp(x.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out = (m + np.log(total)).squeeze(axis)
    weights = shifted / total
    return _result("logsumexp", out, (x,),
                   lambda g: (np.expand_dims(g, axis) * weights,))


# -- convolution and pooling ------------------------------------------------

def conv2d(x, kernel, bias=None) -> Tensor:
    """Valid, stride-1 cross-correlation of ``b×c×h×w`` with ``o×c×kh×kw``."""
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise DimensionError(f"conv2d: input {x.shape} incompatible with kernel {kernel.shape}")
    b, c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    if kh > h or kw > w:
        raise DimensionError(f"conv2d: kernel {kernel.shape} larger than input {x.shape}")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (o,):
            raise DimensionError(f"conv2d: bias shape {bias.shape}, expected ({o},)")
    oh, ow = h - kh + 1, w - kw + 1
    cols = sliding_window_view(x.data, (kh, kw), axis=(2, 3))
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * kh * kw)
    kmat = kernel.data.reshape(o, -1)
    out = (cols @ kmat.T).reshape(b, oh, ow, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[:, None, None]
    out = np.ascontiguousarray(out)

    def bw(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dk = (g2.T @ cols).reshape(kernel.shape)
        dcols = (g2 @ kmat).reshape(b, oh, ow, c, kh, kw)
        dx = np.zeros_like(x.data)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + oh, j:j + ow] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        db = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return (dx, dk, db)

    inputs = (x, kernel, bias) if bias is not None else (x, kernel)
    return _result("conv2d", out, inputs, bw)


def maxpool2d(x) -> Tensor:
    """2×2 max pooling with stride 2; ties resolve to the first in row-major scan."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"maxpool2d expects b×c×h×w, got {x.shape}")
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"maxpool2d: spatial extents must be even, got {h}×{w}")
    win = x.data.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(b, c, h // 2, w // 2, 4)
    arg = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, arg[..., None], -1)[..., 0]

    def bw(g):
        full = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(full, arg[..., None], g[..., None], -1)
        full = full.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (full.reshape(b, c, h, w),)

    return _result("maxpool2d", out, (x,), bw)
