import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsoftmax import layers as L
from tsoftmax import model as M
from tsoftmax import ood_eval as O
from tsoftmax.errors import ConfigError, DimensionError, DomainError
from tsoftmax.tensor import Tensor


def S(ind, ood):
    return O.samples_from_scores(ind, ood)


def fixed_output_model(probs):
    """A one-layer softmax model whose output is ``probs`` for every input."""
    fc = L.FullyConnected(2, len(probs))
    fc.W, fc.b = Tensor(np.zeros((len(probs), 2))), Tensor(np.log(probs))
    return M.Model([fc], (2,))


@pytest.mark.parametrize("probs, expected", [
    ([0.5, 0.25, 0.25], 0.5),
    ([1.0 - 1e-300, 1e-300], 1.0),
    ([0.1] * 10, 0.1),
])
def test_max_prob_examples(probs, expected):
    scores = O.confidence_max_prob(fixed_output_model(probs), np.zeros((3, 2)))
    np.testing.assert_allclose(scores, expected, rtol=1e-15)


def test_max_prob_shape_mismatch():
    with pytest.raises(DimensionError):
        O.confidence_max_prob(M.toy_mlp(), np.zeros((3, 3)))


def test_max_prob_for_t_softmax_head(rng):
    model = M.toy_mlp("t_softmax", 1.0)
    X = rng.normal(size=(20, 2))
    np.testing.assert_allclose(O.confidence_max_prob(model, X), model.probabilities(X).max(axis=0))


def test_odin_zero_epsilon_unit_temperature_is_max_prob(rng):
    model = M.toy_mlp(seed=2)
    X = rng.normal(size=(700, 2)) * 3
    a = O.odin_score(model, X, O.OdinConfig(epsilon=0.0, gamma=1.0))
    assert np.array_equal(a, O.confidence_max_prob(model, X))


def test_odin_zero_epsilon_is_scaled_softmax(rng):
    model = M.toy_mlp(seed=3)
    X = rng.normal(size=(50, 2))
    z = model.logits(X).data / 1000.0
    expected = (np.exp(z - z.max(axis=0)) / np.exp(z - z.max(axis=0)).sum(axis=0)).max(axis=0)
    got = O.odin_score(model, X, O.OdinConfig(epsilon=0.0, gamma=1000.0))
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_odin_rejects_t_softmax_head():
    with pytest.raises(ConfigError):
        O.odin_score(M.toy_mlp("t_softmax", 1.0), np.zeros((2, 2)))


def test_odin_config_validation():
    with pytest.raises(ConfigError):
        O.OdinConfig(epsilon=-1e-3)
    with pytest.raises(ConfigError):
        O.OdinConfig(gamma=0.0)
    assert O.OdinConfig() == O.OdinConfig(0.0014, 1000.0)


def linear_1d(a, b):
    fc = L.FullyConnected(1, 2)
    fc.W, fc.b = Tensor(np.array(a, dtype=float)[:, None]), Tensor(np.array(b, dtype=float))
    return M.Model([fc], (1,))


@pytest.mark.parametrize("seed", range(20))
def test_odin_perturbation_direction_1d(seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=2) * 3, r.normal(size=2)
    model = linear_1d(a, b)
    x = r.normal(size=(8, 1)) * 2
    gamma, eps = 2.0, 0.01
    z = a[:, None] * x[:, 0] + b[:, None]
    top = z.argmax(axis=0)
    # d/dx log sigmoid((z_top - z_other)/γ) = σ(-(Δz)/γ)·(a_top - a_other)/γ
    slope = a[top] - a[1 - top]
    x_tilde = x[:, 0] + eps * np.sign(slope)
    zt = (a[:, None] * x_tilde + b[:, None]) / gamma
    expected = (np.exp(zt) / np.exp(zt).sum(axis=0)).max(axis=0)
    got = O.odin_score(model, x, O.OdinConfig(epsilon=eps, gamma=gamma))
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    baseline = O.odin_score(model, x, O.OdinConfig(epsilon=0.0, gamma=gamma))
    assert (got >= baseline).all()


def test_roc_examples():
    pts = O.roc_points(S([0.9, 0.8, 0.7, 0.6], [0.5, 0.4]))
    assert pts == [(0.0, 0.0), (0.0, 0.25), (0.0, 0.5), (0.0, 0.75), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]
    assert O.roc_points(S([0.3, 0.3], [0.3])) == [(0.0, 0.0), (1.0, 1.0)]
    assert (0.0, 1.0) in O.roc_points(S([5, 6], [1, 2]))


def test_metrics_need_both_classes():
    for fn in (O.roc_points, O.auroc, O.fpr_at_tpr):
        with pytest.raises(DomainError):
            fn(S([0.1, 0.2], []))
    with pytest.raises(DomainError):
        O.aupr(S([], [0.1]))


@pytest.mark.parametrize("ind, ood, expected", [
    ([0.9, 0.8], [0.1, 0.2], 1.0),
    ([0.5, 0.5], [0.5, 0.5, 0.5], 0.5),
    ([2, 3], [1, 4], 0.5),
])
def test_auroc_examples(ind, ood, expected):
    assert O.auroc(S(ind, ood)) == expected


def test_aupr_examples():
    assert O.aupr(S([0.9, 0.8], [0.1])) == 1.0
    assert O.aupr(S([0.4] * 3, [0.4] * 5)) == pytest.approx(3 / 8, abs=1e-15)
    interleaved = S([6, 4, 2], [5, 3, 1])
    assert O.aupr(interleaved) == pytest.approx(float(Fraction(34, 45)), abs=1e-15)
    assert O.aupr(interleaved) == pytest.approx(ap_oracle([6, 4, 2], [5, 3, 1]), abs=1e-15)


@pytest.mark.parametrize("ind, ood, expected", [
    ([0.9, 0.8, 0.7, 0.6], [0.5, 0.4], 0.0),
    ([0.9, 0.5], [0.7], 1.0),
    ([3, 4, 5], [0, 1, 2], 0.0),
])
def test_fpr_at_tpr_examples(ind, ood, expected):
    assert O.fpr_at_tpr(S(ind, ood)) == expected


@pytest.mark.parametrize("fpr, expected", [(0.0, 0.025), (1.0, 0.525), (0.2, 0.125)])
def test_detection_error_examples(fpr, expected):
    assert O.detection_error(fpr) == expected


def test_detection_error_domain():
    with pytest.raises(DomainError):
        O.detection_error(1.5)
    with pytest.raises(DomainError):
        O.detection_error(0.1, tpr=-0.1)


# -- brute-force oracles ------------------------------------------------------

def mann_whitney(ind, ood):
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in ind for b in ood)
    return wins / (len(ind) * len(ood))


def ap_oracle(ind, ood):
    terms, prev_recall = [], 0.0
    for t in sorted(set(ind) | set(ood), reverse=True):
        tp = sum(s >= t for s in ind)
        fp = sum(s >= t for s in ood)
        recall = tp / len(ind)
        terms.append((recall - prev_recall) * (tp / (tp + fp)))
        prev_recall = recall
    return math.fsum(terms)


def fpr_oracle(ind, ood, target=0.95):
    for t in sorted(set(ind) | set(ood), reverse=True):
        if sum(s >= t for s in ind) / len(ind) >= target:
            return sum(s >= t for s in ood) / len(ood)


score_lists = st.lists(st.integers(0, 60).map(lambda k: k / 20), min_size=1, max_size=40)


@settings(max_examples=300, deadline=None)
@given(score_lists, score_lists)
def test_metrics_match_enumeration(ind, ood):
    s = S(ind, ood)
    assert abs(O.auroc(s) - mann_whitney(ind, ood)) < 1e-9
    assert O.aupr(s) == ap_oracle(ind, ood)
    assert O.fpr_at_tpr(s) == fpr_oracle(ind, ood)


def test_auroc_matches_mann_whitney_large(rng):
    for _ in range(5):
        ind = np.round(rng.normal(0.5, 1, rng.integers(1, 1000)), 2)
        ood = np.round(rng.normal(0, 1, rng.integers(1, 1000)), 2)
        less = (ind[:, None] > ood[None, :]).sum() + 0.5 * (ind[:, None] == ood[None, :]).sum()
        assert abs(O.auroc(S(ind, ood)) - less / (ind.size * ood.size)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(score_lists, score_lists)
def test_auroc_invariant_to_increasing_transform(ind, ood):
    f = lambda v: np.exp(3 * np.asarray(v)) - 7.0
    assert O.auroc(S(f(ind), f(ood))) == pytest.approx(O.auroc(S(ind, ood)), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(score_lists, score_lists, st.integers(1, 40).map(lambda k: k / 20))
def test_fpr_non_increasing_under_ind_shift(ind, ood, shift):
    before = O.fpr_at_tpr(S(ind, ood))
    after = O.fpr_at_tpr(S([s + shift for s in ind], ood))
    assert after <= before


@settings(max_examples=200, deadline=None)
@given(score_lists, score_lists)
def test_detection_error_range(ind, ood):
    de = O.detection_error(O.fpr_at_tpr(S(ind, ood)), 0.95)
    assert 0.025 <= de <= 0.525
    r = O.evaluate_scores(ind, ood, "x")
    for v in (r.fpr_at_95_tpr, r.detection_error, r.auroc, r.aupr_in):
        assert 0.0 <= v <= 1.0


def test_non_finite_scores_rejected():
    with pytest.raises(DomainError):
        O.auroc(S([np.nan], [0.1]))


def test_balance_truncates_larger_set():
    ind, ood = np.arange(10), np.arange(100, 104)
    a, b = O.balance(ind, ood, seed=0)
    assert len(a) == len(b) == 4
    assert set(a) <= set(ind) and (np.diff(a) > 0).all()
    np.testing.assert_array_equal(b, ood)
    np.testing.assert_array_equal(a, O.balance(ind, ood, seed=0)[0])


def test_csv_row_format():
    r = O.MetricsReport("noise", 0.1, 0.1, 0.9, 0.8, 3, 3)
    text = O.write_csv([r.csv_row("m", "t_softmax", 1.0, 0.02)])
    assert text.splitlines() == [",".join(O.CSV_FIELDS), "m,t_softmax,1.0,noise,3,3,0.1,0.1,0.9,0.8,0.02"]


# -- timing -------------------------------------------------------------------

def sleepy(model, X):
    for _ in range(len(X)):
        time.sleep(1e-3)
    return np.zeros(len(X))


def test_timing_lower_bound():
    assert O.timing_harness(None, np.zeros((100, 2)), sleepy, repeats=3) >= 1e-3


def test_timing_preconditions():
    with pytest.raises(ConfigError):
        O.timing_harness(None, np.zeros((99, 2)), sleepy)
    with pytest.raises(ConfigError):
        O.timing_harness(None, np.zeros((100, 2)), sleepy, warmup=2)


def test_timing_repeatable():
    model = M.cnn(seed=0)
    X = np.random.default_rng(0).uniform(size=(100, 1, 28, 28))
    runs = [O.timing_harness(model, X, O.SCORERS["maxprob"]) for _ in range(2)]
    assert max(runs) / min(runs) < 1.5
