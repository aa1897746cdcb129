"""Write a synthetic stand-in for Fashion-MNIST in the same IDX layout.

Ten smooth random templates, randomly scaled, shifted and noised. This is a
plumbing check for the reduced-scale pipeline when the real files are not
available; numbers obtained on it say nothing about Fashion-MNIST.

    python3 scripts/make_surrogate_idx.py /tmp/surrogate --train 10000 --test 2000
    TSOFTMAX_FMNIST_DIR=/tmp/surrogate pytest tests/test_acceptance.py -k fmnist
"""
import argparse
from pathlib import Path

import numpy as np

from tsoftmax.datasets import LabeledDataset, make_rng, write_idx


def templates(seed=123):
    r = make_rng(seed)
    yy, xx = np.mgrid[0:28, 0:28] / 27.0
    out = []
    for _ in range(10):
        a = r.normal(size=(4, 4))
        img = sum(a[i, j] * np.cos(np.pi * (i * xx + j * yy) + r.uniform(0, 6))
                  for i in range(4) for j in range(4))
        img = (img - img.min()) / (img.max() - img.min())
        out.append(img * (r.random((28, 28)) < 0.6))
    return np.array(out)


def surrogate(n, seed, name="surrogate"):
    T = templates()
    g = make_rng(seed)
    y = g.integers(0, 10, n)
    X = T[y] * g.uniform(0.6, 1.0, (n, 1, 1)) + 0.15 * g.standard_normal((n, 28, 28))
    X = np.stack([np.roll(np.roll(x, a, 0), b, 1)
                  for x, a, b in zip(X, g.integers(-3, 4, n), g.integers(-3, 4, n))])
    # quantize to bytes so the files round-trip exactly
    X = np.rint(np.clip(X, 0, 1) * 255) / 255
    return LabeledDataset(X[:, None], y, name)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=10000)
    ap.add_argument("--test", type=int, default=2000)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, n, seed in (("train", args.train, 1), ("t10k", args.test, 2)):
        write_idx(surrogate(n, seed), out / f"{split}-images-idx3-ubyte",
                  out / f"{split}-labels-idx1-ubyte")
    print(f"wrote surrogate IDX files to {out}")


if __name__ == "__main__":
    main()
