"""Command-line interface.

    tsoftmax train --preset toy --head t_softmax --nu 1 --out toy.tsmx
    tsoftmax eval-ood --checkpoint toy.tsmx --ood far:8 --ood noise
    tsoftmax plot-decision --checkpoint toy.tsmx --out grid.svg
    tsoftmax plot-pdf --nu 1 --out fig1.svg
    tsoftmax timeit --preset cnn

Every command accepts ``--config FILE`` with ``key = value`` lines (keys are
flag names without dashes, ``-`` or ``_``); explicit flags win. Exit codes:
0 success, 1 configuration error, 2 data or format error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import datasets as D
from . import ood_eval as E
from . import plots
from .errors import ConfigError, DataFormatError, TSoftmaxError
from .model import build_preset, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, default_config, evaluate_accuracy, train

log = logging.getLogger("tsoftmax")

EXIT_CONFIG = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _int_list(text) -> list[int]:
    return [int(v) for v in _float_list(text)]


def read_config_file(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("-v", "--verbose", action="store_true")


def _ind_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--images", help="IDX image file (IND data)")
    p.add_argument("--labels", help="IDX label file (IND data)")
    p.add_argument("--limit", type=int, help="use only the first N samples")
    p.add_argument("--n-per-class", type=int, default=200,
                   help="synthetic cluster size for 2-D models")
    p.add_argument("--cluster-std", type=float, default=0.4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsoftmax", description="t-softmax classifiers and OOD evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _common(p)
    _ind_source(p)
    p.add_argument("--preset", choices=["toy", "cnn"], default="toy")
    p.add_argument("--head", choices=["softmax", "t_softmax"], default="softmax")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr-decay-epochs", type=_int_list)
    p.add_argument("--lr-decay-factor", type=float)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="per-epoch CSV (default: <out>.log.csv)")

    p = sub.add_parser("eval-ood", help="OOD metrics for a checkpoint, one CSV row per source")
    _common(p)
    _ind_source(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ood", action="append", default=[],
                   help="noise | far:RADIUS | idx:NAME:IMAGES (repeatable)")
    p.add_argument("--scorer", choices=sorted(E.SCORERS), default="maxprob")
    p.add_argument("--epsilon", type=float, default=E.OdinConfig.epsilon)
    p.add_argument("--gamma", type=float, default=E.OdinConfig.gamma)
    p.add_argument("--model-name", help="defaults to the checkpoint file stem")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("plot-decision", help="max-probability heat map of a 2-D model")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--box", type=_float_list, default=[-6.0, 6.0], help="LOW,HIGH (write --box=-6,6 for negative bounds)")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--cluster-std", type=float, default=0.4)
    p.add_argument("--no-points", action="store_true", help="omit training points")
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot-pdf", help="Gaussian vs t class conditionals and posteriors")
    _common(p)
    p.add_argument("--centers", type=_float_list, default=[-1.0, 1.0])
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--xmax", type=float, default=10.0)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write the sampled curves as CSV")

    p = sub.add_parser("timeit", help="per-sample latency of the confidence scorers")
    _common(p)
    p.add_argument("--checkpoint", help="model to time (default: untrained preset)")
    p.add_argument("--preset", choices=["toy", "cnn"], default="cnn")
    p.add_argument("--n", type=int, default=200, help="number of samples")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--epsilon", type=float, default=E.OdinConfig.epsilon)
    p.add_argument("--gamma", type=float, default=E.OdinConfig.gamma)
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path is not None and argv and argv[0] in COMMANDS:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        values = read_config_file(path)
        sub = parser._subparsers._group_actions[0].choices[argv[0]]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest in values:
                action.required = False
        # argparse applies each action's type to string defaults
        sub.set_defaults(**values)
    return parser.parse_args(argv)


def _require_file(path, what: str) -> None:
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")


def _load_ind(args, input_shape=None, split_seed: int = 0) -> D.LabeledDataset:
    if args.images or args.labels:
        if not (args.images and args.labels):
            raise ConfigError("--images and --labels must be given together")
        _require_file(args.images, "image file")
        _require_file(args.labels, "label file")
        ds = D.load_idx(args.images, args.labels)
    elif input_shape in (None, (2,)):
        ds = D.synth_clusters(args.n_per_class, std=args.cluster_std, seed=args.seed + split_seed)
    else:
        raise ConfigError("image models need --images and --labels")
    if args.limit is not None:
        ds = ds.head(args.limit)
    return ds


# -- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    if args.head == "t_softmax" and not args.nu > 0:
        raise ConfigError("--nu must be positive")
    base = default_config(args.preset)
    overrides = {f.name: getattr(args, f.name) for f in fields(TrainConfig)
                 if getattr(args, f.name, None) is not None and f.name != "seed"}
    cfg = TrainConfig(**{**{f.name: getattr(base, f.name) for f in fields(TrainConfig)},
                         **overrides, "seed": args.seed})
    model = build_preset(args.preset, args.head, args.nu if args.head == "t_softmax" else None,
                         seed=args.seed)
    if args.preset == "cnn" and not args.images:
        raise ConfigError("the cnn preset needs --images and --labels")
    data = _load_ind(args, model.input_shape)
    _, history = train(model, data, cfg) if cfg.epochs else (model, [])
    save_checkpoint(model, args.out)
    log_path = args.log or f"{args.out}.log.csv"
    with open(log_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "learning_rate", "loss", "train_error"])
        for s in history:
            w.writerow([s.epoch, repr(s.learning_rate), repr(s.loss), repr(s.train_error)])
    log.info("wrote %s and %s", args.out, log_path)
    return 0


def _ood_sources(specs, input_shape, n: int, seed: int) -> list[D.OodSource]:
    if not specs:
        raise ConfigError("at least one --ood source is required")
    sources = []
    for k, spec in enumerate(specs):
        kind, _, rest = spec.partition(":")
        if kind == "noise":
            sources.append(D.gaussian_noise_ood(n, input_shape, seed + 1000 + k))
        elif kind == "far":
            if input_shape != (2,):
                raise ConfigError("far:RADIUS sources need a 2-D input model")
            radius = float(rest or 8.0)
            angles = D.make_rng(seed + 1000 + k).uniform(0.0, 2 * math.pi, n)
            pts = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            sources.append(D.OodSource(f"far{radius:g}", "dataset", pts))
        elif kind == "idx":
            name, _, path = rest.partition(":")
            if not name or not path:
                raise ConfigError(f"bad OOD spec {spec!r}; expected idx:NAME:IMAGES")
            _require_file(path, "OOD image file")
            sources.append(D.OodSource(name, "dataset", D.read_idx_images(path)))
        else:
            raise ConfigError(f"unknown OOD source {spec!r}")
    return sources


def cmd_eval_ood(args) -> int:
    _require_file(args.checkpoint, "checkpoint")
    model = load_checkpoint(args.checkpoint)
    odin_cfg = E.OdinConfig(args.epsilon, args.gamma)
    if args.scorer == "odin" and model.head != "softmax":
        raise ConfigError("the odin scorer requires a softmax-head checkpoint")
    ind = _load_ind(args, model.input_shape, split_seed=1)
    if ind.sample_shape != model.input_shape:
        raise DataFormatError(f"IND samples {ind.sample_shape} do not match model {model.input_shape}")
    test_error = evaluate_accuracy(model, ind)
    sources = _ood_sources(args.ood, model.input_shape, len(ind), args.seed)
    scorer = E.SCORERS[args.scorer]
    name = args.model_name or Path(args.checkpoint).stem
    rows = []
    for src in sources:
        if src.samples.shape[1:] != model.input_shape:
            raise DataFormatError(f"OOD source {src.name} has shape {src.samples.shape[1:]}")
        ind_x, ood_x = E.balance(ind.inputs, src.samples, args.seed)
        report = E.evaluate_scores(scorer(model, ind_x, odin_cfg), scorer(model, ood_x, odin_cfg),
                                   src.name)
        rows.append(report.csv_row(name, model.head, model.nu, test_error))
    text = E.write_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot_decision(args) -> int:
    _require_file(args.checkpoint, "checkpoint")
    if len(args.box) != 2 or not args.box[0] < args.box[1]:
        raise ConfigError("--box needs LOW HIGH with LOW < HIGH")
    model = load_checkpoint(args.checkpoint)
    low, high = args.box
    _, probs = plots.decision_grid(model, args.grid, low, high)
    pts = labels = None
    if not args.no_points:
        ds = D.synth_clusters(args.n_per_class, std=args.cluster_std, seed=args.seed)
        pts, labels = ds.inputs, ds.labels
    Path(args.out).write_text(plots.render_decision_svg(probs, low, high, pts, labels))
    return 0


def cmd_plot_pdf(args) -> int:
    if not args.nu > 0:
        raise ConfigError("--nu must be positive")
    if args.points < 2 or not args.xmax > 0:
        raise ConfigError("--points must be >= 2 and --xmax > 0")
    xs = np.linspace(-args.xmax, args.xmax, args.points)
    curves = plots.pdf_curves(args.centers, args.nu, xs)
    Path(args.out).write_text(plots.render_pdf_svg(curves, args.nu))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "gaussian_pdf_1", "gaussian_pdf_2", "sigmoid",
                        "t_pdf_1", "t_pdf_2", "t_sigmoid"])
            for i, x in enumerate(curves["x"]):
                w.writerow([repr(float(v)) for v in (
                    x, *curves["gaussian_pdf"][:, i], curves["sigmoid"][i],
                    *curves["t_pdf"][:, i], curves["t_sigmoid"][i])])
    return 0


def cmd_timeit(args) -> int:
    if args.checkpoint:
        _require_file(args.checkpoint, "checkpoint")
        model = load_checkpoint(args.checkpoint)
    else:
        model = build_preset(args.preset, "softmax", seed=args.seed)
    X = D.gaussian_noise_ood(args.n, model.input_shape, args.seed).samples
    odin_cfg = E.OdinConfig(args.epsilon, args.gamma)
    results = {"maxprob": E.timing_harness(model, X, E.SCORERS["maxprob"], repeats=args.repeats)}
    if model.head == "softmax":
        results["odin"] = E.timing_harness(
            model, X, lambda m, x: E.odin_score(m, x, odin_cfg), repeats=args.repeats)
    lines = ["scorer,seconds_per_sample"] + [f"{k},{v!r}" for k, v in results.items()]
    if "odin" in results:
        lines.append(f"odin_over_maxprob,{results['odin'] / results['maxprob']!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval-ood": cmd_eval_ood,
    "plot-decision": cmd_plot_decision,
    "plot-pdf": cmd_plot_pdf,
    "timeit": cmd_timeit,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"tsoftmax: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as e:
        print(f"tsoftmax: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TSoftmaxError as e:
        print(f"tsoftmax: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
