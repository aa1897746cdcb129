"""Acceptance criteria, one test each.

Every test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary. Criterion 7 needs the Fashion-MNIST IDX files in
the directory named by ``$TSOFTMAX_FMNIST_DIR``.
"""
import math
import os
import time

import numpy as np
import pytest

from tsoftmax import cli
from tsoftmax import layers as L
from tsoftmax import model as M
from tsoftmax import ood_eval as O
from tsoftmax import stats
from tsoftmax import trainer as TR
from tsoftmax.datasets import gaussian_noise_ood, load_idx_split, synth_clusters
from tsoftmax.errors import DataFormatError
from tsoftmax.stats import ClassConditional
from tsoftmax.tensor import Tensor

from conftest import ACCEPTANCE_LINES, gradcheck, param_gradcheck
from gradcases import PRESET_CASES, op_cases, preset_case


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_01_gradient_correctness():
    start = time.perf_counter()
    worst, where, stats_ = 0.0, "", {}
    for name, factory in sorted(op_cases().items()):
        for seed in range(50):
            err = gradcheck(*factory(np.random.default_rng(seed)))
            if err > worst:
                worst, where = err, f"{name}/{seed}"
    for preset, head in PRESET_CASES:
        for seed in range(50):
            model, X, y = preset_case(preset, head, seed)
            err = param_gradcheck(model, X, y, np.random.default_rng(seed), stats=stats_)
            if err > worst:
                worst, where = err, f"{preset}-{head}/{seed}"
    elapsed = time.perf_counter() - start
    redrawn = stats_.get("skipped", 0) / stats_["checked"]
    report(1, "gradient correctness", worst < 1e-4 and elapsed < 120 and redrawn <= 0.05,
           f"worst rel err {worst:.2e} at {where}, {elapsed:.0f} s, kink redraws {redrawn:.1%}")


def test_02_quadratic_identity():
    r = np.random.default_rng(2)
    worst, negative = 0.0, 0
    layer = L.QuadraticLayer(1, 1)
    for _ in range(10_000):
        n, n_c, n_b = r.integers(1, 33), r.integers(1, 11), r.integers(1, 9)
        scale = 10.0 ** r.uniform(-2, 1)
        W, X = r.normal(size=(n_c, n)) * scale, r.normal(size=(n, n_b)) * scale
        layer.W = Tensor(W)
        Y = L.quadratic_forward(layer, X).data
        oracle = ((X.T[None, :, :] + W[:, None, :] / 2) ** 2).sum(axis=-1)
        worst = max(worst, float(np.abs(Y - oracle).max()))
        negative += int((Y < 0).sum())
    report(2, "quadratic-layer identity", worst < 1e-10 and negative == 0,
           f"max abs err {worst:.2e}, negative entries {negative}, 10^4 cases")


def test_03_limit_equivalence():
    r = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        Y = r.uniform(0, 10, size=(r.integers(2, 11), r.integers(1, 20)))
        worst = max(worst, float(np.abs(L.t_softmax(Y, 1e6).data - L.softmax(-Y / 2).data).max()))
    report(3, "nu -> infinity limit", worst < 1e-3, f"max abs diff {worst:.2e} at nu=1e6")


def test_04_oracle_equivalence():
    r = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        n, n_c = r.integers(1, 17), r.integers(2, 11)
        nu = float(10.0 ** r.uniform(-1, 2))
        W, x = r.normal(size=(n_c, n)) * 2, r.normal(size=n) * 3
        layer = L.QuadraticLayer(n, n_c)
        layer.W = Tensor(W)
        p = L.t_softmax(L.quadratic_forward(layer, x[:, None]), nu).data[:, 0]
        # class i is centered at -w_i/2, i.e. the (x + mu) offset is w_i/2
        q = stats.bayes_posterior([ClassConditional.student_t(-w / 2, nu) for w in W], x)
        worst = max(worst, float(np.abs(p - q).max()))
    report(4, "t-softmax vs Bayes posterior oracle", worst < 1e-12,
           f"max abs diff {worst:.2e}, 1000 cases")


def test_05_toy_reproduction():
    ds = synth_clusters(200, seed=0)
    probe = np.array([[-5.0, -5.0]])
    centers = np.array([[0.0, 2.0], [-math.sqrt(3), -1.0], [math.sqrt(3), -1.0]])
    distance = float(np.linalg.norm(centers - probe, axis=1).min())
    out, times = {}, {}
    for head in ("softmax", "t_softmax"):
        model = M.build_preset("toy", head, seed=0)
        start = time.perf_counter()
        TR.train(model, ds, TR.default_config("toy"))
        times[head] = time.perf_counter() - start
        out[head] = model.probabilities(probe)[:, 0]
    ok = (distance >= 5 and out["softmax"].max() > 0.95 and out["t_softmax"].max() <= 0.7
          and out["t_softmax"].min() >= 0.1 and max(times.values()) < 60)
    report(5, "toy decision-surface behaviour", ok,
           f"probe (-5,-5) at distance {distance:.2f}: softmax {np.round(out['softmax'], 3)}, "
           f"t-softmax {np.round(out['t_softmax'], 3)}, train {times['softmax']:.1f}/{times['t_softmax']:.1f} s")


def _mann_whitney(ind, ood):
    ind, ood = np.asarray(ind)[:, None], np.asarray(ood)[None, :]
    return ((ind > ood).sum() + 0.5 * (ind == ood).sum()) / (ind.size * ood.size)


def _threshold_oracles(ind, ood):
    terms, prev, fpr = [], 0.0, None
    for t in sorted(set(ind) | set(ood), reverse=True):
        tp, fp = sum(s >= t for s in ind), sum(s >= t for s in ood)
        recall = tp / len(ind)
        terms.append((recall - prev) * (tp / (tp + fp)))
        prev = recall
        if fpr is None and recall >= 0.95:
            fpr = fp / len(ood)
    return math.fsum(terms), fpr


def test_06_metric_oracles():
    r = np.random.default_rng(6)
    auroc_err, mismatches = 0.0, 0
    for _ in range(100):
        ind = np.round(r.normal(0.7, 1, r.integers(1, 501)), 2)
        ood = np.round(r.normal(0, 1, r.integers(1, 501)), 2)
        auroc_err = max(auroc_err, abs(O.auroc(O.samples_from_scores(ind, ood)) - _mann_whitney(ind, ood)))
    for _ in range(100):
        ind = list(r.integers(0, 30, r.integers(1, 26)) / 10)
        ood = list(r.integers(0, 30, r.integers(1, 26)) / 10)
        s = O.samples_from_scores(ind, ood)
        ap, fpr = _threshold_oracles(ind, ood)
        mismatches += (O.aupr(s) != ap) + (O.fpr_at_tpr(s) != fpr)
    de = [O.detection_error(f) for f in (0.0, 0.2, 1.0)]
    ok = auroc_err < 1e-9 and mismatches == 0 and de == [0.025, 0.125, 0.525]
    report(6, "metric oracles", ok,
           f"auroc diff {auroc_err:.1e}, aupr/fpr95 mismatches {mismatches}, DE {de}")


def _fmnist():
    root = os.environ.get("TSOFTMAX_FMNIST_DIR")
    if not root:
        raise DataFormatError("TSOFTMAX_FMNIST_DIR is not set")
    return load_idx_split(root, "train").head(10_000), load_idx_split(root, "t10k")


def test_07_reduced_fmnist_run():
    start = time.perf_counter()
    try:
        train_set, test_set = _fmnist()
    except DataFormatError as e:
        report(7, "reduced Fashion-MNIST run", False, f"data unavailable: {e}")
    noise = gaussian_noise_ood(len(test_set), (1, 28, 28), seed=1000).samples
    rows = []
    for seed in (0, 1, 2):
        res = {}
        for head in ("softmax", "t_softmax"):
            model = M.build_preset("cnn", head, seed=seed)
            TR.train(model, train_set, TR.TrainConfig(epochs=3, seed=seed))
            err = TR.evaluate_accuracy(model, test_set)
            m = O.evaluate_scores(O.confidence_max_prob(model, test_set.inputs),
                                  O.confidence_max_prob(model, noise), "noise")
            res[head] = (err, m.auroc, m.detection_error)
        rows.append(res)
    elapsed = time.perf_counter() - start
    errors_ok = all(res[h][0] <= 0.15 for res in rows for h in res)
    auroc_ok = all(res["t_softmax"][1] >= res["softmax"][1] - 0.01 for res in rows)
    de_wins = sum(res["t_softmax"][2] < res["softmax"][2] for res in rows)
    summary = "; ".join(
        f"seed {s}: " + ", ".join(f"{h} err {v[0]:.3f} auroc {v[1]:.3f} de {v[2]:.3f}" for h, v in res.items())
        for s, res in enumerate(rows))
    report(7, "reduced Fashion-MNIST run", errors_ok and auroc_ok and de_wins >= 2 and elapsed <= 1200,
           f"{summary}; DE wins {de_wins}/3; {elapsed:.0f} s")


def test_08_odin_cost():
    model = M.cnn(seed=0)
    X = gaussian_noise_ood(200, (1, 28, 28), seed=8).samples
    base = O.timing_harness(model, X, O.SCORERS["maxprob"])
    odin = O.timing_harness(model, X, O.SCORERS["odin"])
    report(8, "ODIN latency >= 2x max-prob", odin / base >= 2,
           f"max-prob {base * 1e3:.3f} ms, ODIN {odin * 1e3:.3f} ms per sample, ratio {odin / base:.2f}")


def test_09_determinism(tmp_path):
    for k in (1, 2):
        ck = tmp_path / f"m{k}.tsmx"
        assert cli.main(["train", "--head", "t_softmax", "--seed", "9", "--epochs", "20",
                         "--out", str(ck)]) == 0
        assert cli.main(["eval-ood", "--checkpoint", str(ck), "--model-name", "m", "--seed", "9",
                         "--ood", "noise", "--ood", "far:6", "--out", str(tmp_path / f"r{k}.csv")]) == 0
    same_ck = (tmp_path / "m1.tsmx").read_bytes() == (tmp_path / "m2.tsmx").read_bytes()
    same_csv = (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    report(9, "determinism", same_ck and same_csv,
           f"checkpoints identical: {same_ck}, CSVs identical: {same_csv}")


def test_10_binary_posteriors():
    t = [ClassConditional.student_t([-1.0], 1.0), ClassConditional.student_t([1.0], 1.0)]
    g = [ClassConditional.gaussian([-1.0]), ClassConditional.gaussian([1.0])]
    tv = [float(stats.bayes_posterior(t, [x])[0]) for x in (-30.0, 30.0)]
    gv = [float(stats.bayes_posterior(g, [x])[0]) for x in (-30.0, 30.0)]
    ok = all(0.45 <= v <= 0.55 for v in tv) and all(min(v, 1 - v) < 1e-3 for v in gv)
    report(10, "binary posteriors far from the centers", ok,
           f"t-sigmoid at -30/+30 {tv[0]:.4f}/{tv[1]:.4f}, sigmoid {gv[0]:.2e}/{gv[1]:.2e}")
