"""Sequential classifiers, architecture presets and checkpoint I/O.

Checkpoint layout: an ASCII manifest

    TSMX v1
    input 1 28 28
    head t_softmax 1.0
    layer conv2d 1 20 5
    ...
    end

followed by every parameter as raw little-endian float64, in manifest
order (per layer: weights then bias).
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from . import layers as L
from . import tensor as T
from .datasets import make_rng
from .errors import ConfigError, DataFormatError, DimensionError
from .tensor import Tensor

MAGIC_LINE = "TSMX v1"
HEADS = ("softmax", "t_softmax")


class Model:
    """Ordered layers followed by a softmax or t-softmax head.

    ``forward`` takes sample-major input (``n × ...``) and returns class
    log-probabilities in the ``N_c × n`` layout.
    """

    def __init__(self, layers: Sequence[L.Layer], input_shape: Sequence[int],
                 head: str = "softmax", nu: float | None = None):
        if head not in HEADS:
            raise ConfigError(f"unknown head {head!r}; choose from {HEADS}")
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.head = head
        self.nu = float(nu) if nu is not None else None
        if head == "t_softmax":
            L._check_nu(self.nu if self.nu is not None else float("nan"))
            if not isinstance(self.layers[-1], L.QuadraticLayer):
                raise ConfigError("a t_softmax head needs a QuadraticLayer as its last layer")
        self._check_chain()

    def _check_chain(self) -> None:
        dense = [l for l in self.layers if isinstance(l, (L.FullyConnected, L.QuadraticLayer))]
        for prev, nxt in zip(dense, dense[1:]):
            if prev.n_out != nxt.n_in:
                raise ConfigError(f"layer dimensions do not chain: {prev.n_out} -> {nxt.n_in}")

    @property
    def n_classes(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def _starts_dense(self) -> bool:
        return not isinstance(self.layers[0], L.Conv2d)

    def logits(self, x) -> Tensor:
        """Output of the last layer, before the head operator."""
        x = T._as_tensor(x)
        if x.shape[1:] != self.input_shape:
            raise DimensionError(f"expected samples of shape {self.input_shape}, got {x.shape[1:]}")
        if self._starts_dense():
            x = T.transpose(T.reshape(x, (x.shape[0], -1)))
        for layer in self.layers:
            x = layer(x)
        return x

    def head_log_probs(self, z, temperature: float = 1.0) -> Tensor:
        if self.head == "softmax":
            if temperature != 1.0:
                z = z * (1.0 / temperature)
            return L.log_softmax(z)
        return L.log_t_softmax(z, self.nu)

    def forward(self, x) -> Tensor:
        return self.head_log_probs(self.logits(x))

    def probabilities(self, x, batch_size: int = 1000) -> np.ndarray:
        """Class probabilities, ``N_c × n``, without recording a tape."""
        x = np.asarray(x, dtype=np.float64)
        out = [np.exp(self.forward(x[i:i + batch_size]).data)
               for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(out, axis=1)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.probabilities(x), axis=0)

    def describe(self) -> str:
        nu = f" nu={self.nu!r}" if self.head == "t_softmax" else ""
        names = ", ".join(l.kind for l in self.layers)
        return f"Model[{names}] head={self.head}{nu}"


def _head_layer(head: str, n_in: int, n_out: int, rng) -> L.Layer:
    if head == "t_softmax":
        return L.QuadraticLayer(n_in, n_out, rng)
    return L.FullyConnected(n_in, n_out, rng)


def toy_mlp(head: str = "softmax", nu: float | None = None, hidden: int = 32,
            n_classes: int = 3, seed: int = 0) -> Model:
    """Three dense layers with ReLU for 2-D inputs."""
    rng = make_rng(seed)
    layers = [
        L.FullyConnected(2, hidden, rng), L.ReLU(),
        L.FullyConnected(hidden, hidden, rng), L.ReLU(),
        _head_layer(head, hidden, n_classes, rng),
    ]
    return Model(layers, (2,), head, nu)


def cnn(head: str = "softmax", nu: float | None = None, seed: int = 0,
        n_classes: int = 10) -> Model:
    """Two conv/pool stages and three dense layers for 1×28×28 images."""
    rng = make_rng(seed)
    layers = [
        L.Conv2d(1, 20, 5, rng), L.MaxPool2d(), L.ReLU(),
        L.Conv2d(20, 50, 5, rng), L.MaxPool2d(), L.ReLU(),
        L.Flatten(),
        L.FullyConnected(800, 500, rng), L.ReLU(),
        L.FullyConnected(500, 100, rng), L.ReLU(),
        _head_layer(head, 100, n_classes, rng),
    ]
    return Model(layers, (1, 28, 28), head, nu)


PRESETS = {"toy": toy_mlp, "cnn": cnn}


def build_preset(name: str, head: str = "softmax", nu: float | None = None, seed: int = 0) -> Model:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if head == "t_softmax" and nu is None:
        nu = 1.0
    return PRESETS[name](head=head, nu=nu, seed=seed)


# -- checkpoints ------------------------------------------------------------

def _layer_line(layer: L.Layer) -> str:
    return " ".join(["layer", layer.kind, *map(str, layer.dims())])


def manifest(model: Model) -> str:
    lines = [MAGIC_LINE, "input " + " ".join(map(str, model.input_shape))]
    lines.append(f"head t_softmax {model.nu!r}" if model.head == "t_softmax" else "head softmax")
    lines += [_layer_line(layer) for layer in model.layers]
    lines.append("end")
    return "\n".join(lines) + "\n"


def checkpoint_bytes(model: Model) -> bytes:
    blobs = b"".join(p.data.astype("<f8").tobytes() for p in model.params())
    return manifest(model).encode("ascii") + blobs


def save_checkpoint(model: Model, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def _layer_from_line(fields: list[str]) -> L.Layer:
    kind, dims = fields[0], [int(f) for f in fields[1:]]
    rng = make_rng(0)
    if kind == "fc":
        return L.FullyConnected(dims[0], dims[1], rng)
    if kind == "quadratic":
        return L.QuadraticLayer(dims[0], dims[1], rng)
    if kind == "conv2d":
        return L.Conv2d(dims[0], dims[1], dims[2], rng)
    simple = {"maxpool2d": L.MaxPool2d, "relu": L.ReLU, "flatten": L.Flatten}
    if kind in simple and not dims:
        return simple[kind]()
    raise DataFormatError(f"unknown layer record {' '.join(fields)!r}")


def load_checkpoint(path) -> Model:
    raw = Path(path).read_bytes()
    end = raw.find(b"\nend\n")
    if not raw.startswith(MAGIC_LINE.encode() + b"\n") or end < 0:
        raise DataFormatError(f"{path}: not a {MAGIC_LINE} checkpoint")
    lines = raw[:end].decode("ascii").split("\n")[1:]
    input_shape, head, nu, layers = None, None, None, []
    for line in lines:
        fields = line.split()
        if fields[0] == "input":
            input_shape = tuple(int(f) for f in fields[1:])
        elif fields[0] == "head":
            head = fields[1]
            nu = float(fields[2]) if head == "t_softmax" else None
        elif fields[0] == "layer":
            layers.append(_layer_from_line(fields[1:]))
        else:
            raise DataFormatError(f"{path}: unexpected manifest line {line!r}")
    if input_shape is None or head is None or not layers:
        raise DataFormatError(f"{path}: incomplete manifest")
    try:
        model = Model(layers, input_shape, head, nu)
    except ConfigError as e:
        raise DataFormatError(f"{path}: {e}") from e
    blob = raw[end + len(b"\nend\n"):]
    params = model.params()
    need = sum(p.size for p in params) * 8
    if len(blob) != need:
        raise DataFormatError(f"{path}: expected {need} parameter bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    offset = 0
    for p in params:
        p.data = values[offset:offset + p.size].reshape(p.shape).copy()
        offset += p.size
    return model
