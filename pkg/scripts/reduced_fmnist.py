"""Reduced-scale CNN comparison: softmax vs t-softmax on an IDX dataset.

Trains the CNN preset with both heads on the first ``--n-train`` training
images for a few epochs per seed, then scores the test split against
Gaussian noise (and optional extra IDX image files) with the max-probability
confidence. Writes one CSV row per (seed, head, OOD source).

    python3 scripts/reduced_fmnist.py --data-dir ~/data/fashion --ood idx:mnist:~/data/mnist/t10k-images-idx3-ubyte
"""
import argparse
import csv
import sys
import time
from pathlib import Path

from tsoftmax import ood_eval as O
from tsoftmax.datasets import gaussian_noise_ood, load_idx_split, read_idx_images
from tsoftmax.model import build_preset
from tsoftmax.trainer import TrainConfig, evaluate_accuracy, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", required=True, help="directory with train-*/t10k-* IDX files")
    ap.add_argument("--n-train", type=int, default=10_000)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--ood", action="append", default=[], help="idx:NAME:IMAGES")
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    train_set = load_idx_split(args.data_dir, "train").head(args.n_train)
    test_set = load_idx_split(args.data_dir, "t10k")
    sources = {"gaussian_noise": gaussian_noise_ood(len(test_set), (1, 28, 28), seed=1000).samples}
    for spec in args.ood:
        _, name, path = spec.split(":", 2)
        sources[name] = read_idx_images(Path(path).expanduser())

    rows = []
    for seed in args.seeds:
        for head in ("softmax", "t_softmax"):
            start = time.perf_counter()
            model = build_preset("cnn", head, args.nu if head == "t_softmax" else None, seed=seed)
            train(model, train_set, TrainConfig(epochs=args.epochs, seed=seed))
            err = evaluate_accuracy(model, test_set)
            ind_scores = O.confidence_max_prob(model, test_set.inputs)
            for name, X in sources.items():
                ind, ood = O.balance(ind_scores, O.confidence_max_prob(model, X), seed)
                r = O.evaluate_scores(ind, ood, name)
                rows.append([seed] + r.csv_row("cnn", head, model.nu, err))
            print(f"seed {seed} {head}: test error {err:.4f} ({time.perf_counter() - start:.0f} s)",
                  file=sys.stderr)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("seed",) + O.CSV_FIELDS)
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
