"""Print Gaussian vs Student-t binary posteriors along the line through two centers.

    python3 scripts/binary_posteriors.py --nu 1 --centers -1 1
"""
import argparse

import numpy as np

from tsoftmax import plots


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--centers", type=float, nargs=2, default=[-1.0, 1.0])
    args = ap.parse_args()
    xs = np.array([-100, -30, -10, -3, -1, 0, 1, 3, 10, 30, 100], dtype=float)
    c = plots.pdf_curves(args.centers, args.nu, xs)
    print(f"{'x':>7} {'sigmoid':>10} {'t-sigmoid':>10}")
    for x, s, t in zip(xs, c["sigmoid"], c["t_sigmoid"]):
        print(f"{x:7.1f} {s:10.4f} {t:10.4f}")


if __name__ == "__main__":
    main()
