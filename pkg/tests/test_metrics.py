import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drgkit.metrics import (
    PredictionSet,
    acc5_bins,
    auc_scores,
    binary_auc,
    bootstrap,
    compute_metrics,
    f1_scores,
    metrics_report,
    per_drg_report,
    subset_eval,
    top_classes,
    top_k_accuracy,
    write_per_drg_csv,
)


def test_top_k_hand_case():
    rankings = [[0, 1, 2], [2, 1, 0], [0, 1, 2]]
    truths = [0, 1, 2]
    assert top_k_accuracy(rankings, truths, 1) == pytest.approx(1 / 3)
    assert top_k_accuracy(rankings, truths, 2) == pytest.approx(2 / 3)
    assert top_k_accuracy(rankings, truths, 3) == 1.0
    assert top_k_accuracy(rankings, truths, 7) == 1.0
    assert top_k_accuracy([[1, 0], [0, 1]], [1, 0], 1) == 1.0


def test_f1_hand_cases():
    assert f1_scores([0, 1], [0, 1], [0, 1]) == (1.0, 1.0)
    # class 0: TP=1 FP=1 FN=0 -> 2/3 ; class 1: TP=0 FP=0 FN=1 -> 0
    macro, micro = f1_scores([0, 0], [0, 1], [0, 1])
    assert macro == pytest.approx(1 / 3)
    assert micro == pytest.approx(0.5)


def _random_preds(rng, n=50, k=10):
    probs = rng.dirichlet(np.ones(k), size=n)
    return PredictionSet(probs, rng.integers(0, k, size=n), np.arange(k))


def test_micro_f1_equals_acc1_on_random_sets():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        ps = _random_preds(rng)
        m = compute_metrics(ps, ks=(1,))
        assert abs(m["micro_f1"] - m["acc1"]) <= 1e-12


def pair_count_auc(scores, pos):
    p = [s for s, y in zip(scores, pos) if y]
    q = [s for s, y in zip(scores, pos) if not y]
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in p for b in q) / (len(p) * len(q))


def test_auc_hand_case():
    probs = np.array([[0.9, 0.1], [0.4, 0.6], [0.5, 0.5], [0.2, 0.8]])
    truths = np.array([0, 1, 0, 1])
    macro, micro = auc_scores(probs, truths, [0, 1])
    onehot = truths[:, None] == np.array([0, 1])
    per = [pair_count_auc(probs[:, j], onehot[:, j]) for j in range(2)]
    assert macro == pytest.approx(np.mean(per))
    assert micro == pytest.approx(pair_count_auc(probs.ravel(), onehot.ravel()))


def test_auc_extremes():
    probs = np.eye(3)[[0, 1, 2, 1]]
    assert auc_scores(probs, [0, 1, 2, 1], [0, 1, 2]) == (1.0, 1.0)
    flat = np.full((4, 2), 0.5)
    assert auc_scores(flat, [0, 1, 0, 1], [0, 1]) == (0.5, 0.5)
    assert binary_auc(np.array([0.1, 0.2]), np.array([True, True])) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=25))
def test_auc_matches_pair_counting(pairs):
    scores = np.array([float(s) for s, _ in pairs])
    pos = np.array([y for _, y in pairs])
    if pos.all() or not pos.any():
        assert binary_auc(scores, pos) is None
    else:
        assert binary_auc(scores, pos) == pytest.approx(pair_count_auc(scores, pos))
        assert binary_auc(np.exp(3 * scores) - 7, pos) == pytest.approx(binary_auc(scores, pos))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_acc_monotone_and_relabel_invariance(seed):
    rng = np.random.default_rng(seed)
    ps = _random_preds(rng, n=30, k=6)
    ranks = ps.rankings()
    accs = [top_k_accuracy(ranks, ps.truth_columns, k) for k in range(1, 7)]
    assert accs == sorted(accs) and accs[-1] == 1.0
    perm = rng.permutation(100)[:6]
    relabel = dict(zip(range(6), perm.tolist()))
    a = f1_scores(ps.top1(), ps.truths, ps.classes)
    b = f1_scores([relabel[c] for c in ps.top1()], [relabel[c] for c in ps.truths], perm)
    assert a[0] == pytest.approx(b[0]) and a[1] == pytest.approx(b[1])


def _acc1(ps):
    return float(np.mean(ps.top1() == ps.truths))


def test_bootstrap_constant_and_deterministic():
    rng = np.random.default_rng(5)
    perfect = PredictionSet(np.eye(4)[[0, 1, 2, 3, 1]], [0, 1, 2, 3, 1], np.arange(4))
    assert bootstrap(_acc1, perfect, 30, seed=9) == (1.0, 0.0)
    ps = _random_preds(rng, n=40, k=4)
    assert bootstrap(_acc1, ps, 30, seed=3) == bootstrap(_acc1, ps, 30, seed=3)
    mean, _ = bootstrap(_acc1, ps, 30, seed=3)
    assert 0.0 <= mean <= 1.0


def test_bootstrap_matches_independent_resampler():
    probs = np.array([[0.6, 0.4], [0.3, 0.7], [0.8, 0.2], [0.55, 0.45], [0.1, 0.9]])
    truths = np.array([0, 0, 0, 1, 1])
    ps = PredictionSet(probs, truths, [0, 1])
    values = []
    for i in range(30):
        idx = np.random.default_rng(11 + i).integers(0, 5, size=5)
        values.append(np.mean(probs[idx].argmax(1) == truths[idx]))
    mean, sd = bootstrap(_acc1, ps, 30, seed=11)
    assert mean == pytest.approx(np.mean(values), abs=1e-15)
    assert sd == pytest.approx(np.sqrt(np.mean((np.array(values) - np.mean(values)) ** 2)), abs=1e-15)


def _subset_fixture():
    truths = [1] * 5 + [2] * 3 + [3] * 2
    probs = np.full((10, 3), 1 / 3)
    return PredictionSet(probs, truths, [1, 2, 3]), {1: 10, 2: 40, 3: 20}


def test_subset_eval_counts():
    ps, counts = _subset_fixture()
    assert top_classes(counts, 2) == [2, 3]
    r = subset_eval(ps, counts, 2, bootstrap_iterations=0)
    assert r["n"] == 5 and r["coverage_pct"] == 50.0 and r["subset"] == "top2"
    assert subset_eval(ps, counts, 1, bootstrap_iterations=0)["n"] == 3
    full = metrics_report(ps, bootstrap_iterations=0)
    every = subset_eval(ps, counts, 3, bootstrap_iterations=0)
    assert {k: every[k] for k in ("acc1", "acc5", "macro_f1", "micro_auc")} == \
           {k: full[k] for k in ("acc1", "acc5", "macro_f1", "micro_auc")}


def test_metrics_report_keys():
    rng = np.random.default_rng(2)
    r = metrics_report(_random_preds(rng, n=20, k=12), bootstrap_iterations=5)
    for key in ("acc1", "acc5", "acc10", "macro_f1", "micro_f1", "macro_auc", "micro_auc", "n",
                "coverage_pct", "metadata", "bootstrap"):
        assert key in r
    assert set(r["bootstrap"]["acc1"]) == {"mean", "sd"}
    with pytest.raises(ValueError):
        metrics_report(PredictionSet(np.zeros((0, 2)), [], [0, 1]))


def test_per_drg_report():
    ps = PredictionSet(np.eye(2)[[0, 0, 0]], [5, 5, 5], [5, 6])
    rows, bins = per_drg_report(ps, {5: 12, 6: 3})
    assert len(rows) == 1 and rows[0].acc5 == 1.0 and rows[0].rank == 1
    assert [b["n_classes"] for b in bins] == [0, 0, 0, 0, 1]
    assert bins[-1]["median_train"] == 12.0
    assert per_drg_report(PredictionSet(np.zeros((0, 2)), [], [5, 6]), {}) == ([], [])
    assert write_per_drg_csv(rows).splitlines()[1] == "5,12,3,1.000000,1.000000,1"


def test_acc5_bin_medians():
    from drgkit.metrics import PerDrgRow
    rows = [PerDrgRow(i, n, 1, 0, a, 0) for i, (n, a) in enumerate([(2, 0.1), (4, 0.0), (9, 0.5), (300, 0.9), (100, 1.0)])]
    bins = acc5_bins(rows)
    assert [b["n_classes"] for b in bins] == [2, 0, 1, 0, 2]
    assert bins[0]["median_train"] == 3.0 and bins[-1]["median_train"] == 200.0
