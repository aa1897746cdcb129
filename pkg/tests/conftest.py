import numpy as np
import pytest

from tsoftmax.tensor import Tape, Tensor

FD_STEP = 1e-5


def gradcheck(fn, arrays, rng=None, max_coords=None, h=FD_STEP):
    """Largest norm-wise relative error between tape and central-difference gradients.

    ``fn`` maps a list of Tensors to a scalar Tensor. With ``max_coords`` only
    that many randomly chosen coordinates per input are differenced.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = fn(leaves)
    tape.backward(out)
    worst = 0.0
    for k, leaf in enumerate(leaves):
        n = arrays[k].size
        coords = np.arange(n)
        if max_coords is not None and n > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(n, max_coords, replace=False)
        numeric = np.empty(len(coords))
        for j, c in enumerate(coords):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[k].flat[c] += h
            minus[k].flat[c] -= h
            numeric[j] = (fn([Tensor(a) for a in plus]).item()
                          - fn([Tensor(a) for a in minus]).item()) / (2 * h)
        analytic = leaf.grad.reshape(-1)[coords]
        # all-zero gradients (dead units) fall back to an absolute check at 1e-10
        scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-6)
        worst = max(worst, float(np.linalg.norm(numeric - analytic) / scale))
    return worst


def _regime(fn):
    """Fingerprint of the piecewise-linear regime: ReLU masks and pooling argmaxes."""
    with Tape() as tape:
        fn()
    parts = []
    for node in tape.nodes:
        x = node.inputs[0].data
        if node.op == "relu":
            parts.append((x > 0).tobytes())
        elif node.op == "maxpool2d":
            b, c, h, w = x.shape
            win = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
            parts.append(np.argmax(win.reshape(b, c, h // 2, w // 2, 4), axis=-1).tobytes())
    return tuple(parts)


def param_gradcheck(model, X, y, rng, coords_per_param=4, h=FD_STEP, stats=None):
    """Finite-difference check of the cross-entropy gradient for model parameters.

    A coordinate whose ±h perturbation switches a ReLU or max-pool regime is
    not differentiable at that resolution; it is redrawn (counted in
    ``stats["skipped"]``).
    """
    from tsoftmax import layers as L

    def graph():
        return L.cross_entropy(model.forward(X), y)

    with Tape() as tape:
        out = graph()
    tape.backward(out)
    base = _regime(graph)
    worst = 0.0
    for p in model.params():
        flat = p.data.reshape(-1)
        numeric, analytic = [], []
        for c in rng.permutation(p.size):
            if len(numeric) == min(coords_per_param, p.size):
                break
            keep = flat[c]
            flat[c] = keep + h
            up, up_regime = graph().item(), _regime(graph)
            flat[c] = keep - h
            down, down_regime = graph().item(), _regime(graph)
            flat[c] = keep
            if up_regime != base or down_regime != base:
                if stats is not None:
                    stats["skipped"] = stats.get("skipped", 0) + 1
                continue
            numeric.append((up - down) / (2 * h))
            analytic.append(p.grad.reshape(-1)[c])
        numeric, analytic = np.array(numeric), np.array(analytic)
        scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-6)
        worst = max(worst, float(np.linalg.norm(numeric - analytic) / scale))
        if stats is not None:
            stats["checked"] = stats.get("checked", 0) + len(numeric)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
