"""Per-sample latency of max-probability scoring vs ODIN on the CNN preset."""
import argparse

from tsoftmax import ood_eval as O
from tsoftmax.datasets import gaussian_noise_ood
from tsoftmax.model import cnn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    model = cnn(seed=0)
    X = gaussian_noise_ood(args.n, model.input_shape, seed=0).samples
    base = O.timing_harness(model, X, O.SCORERS["maxprob"], repeats=args.repeats)
    odin = O.timing_harness(model, X, O.SCORERS["odin"], repeats=args.repeats)
    print(f"max-prob {base * 1e3:.3f} ms/sample")
    print(f"ODIN     {odin * 1e3:.3f} ms/sample  ({odin / base:.2f}x)")


if __name__ == "__main__":
    main()
