"""Metrics: confusion counts, kappa, macro scores, Wilcoxon signed-rank."""
import itertools

import numpy as np
import pytest
import scipy.stats as sps

from cfspm.metrics import (MetricsReport, compute_metrics, confusion_matrix,
                           wilcoxon_signed_rank)


def test_perfect_predictions():
    truth = np.array([1, 2, 1, 2, 1, 2])
    rep = compute_metrics(truth, truth, 2)
    assert rep.accuracy == 1.0
    assert rep.kappa == 1.0
    assert rep.precision == rep.recall == rep.f1 == 1.0


def test_hand_confusion_30_10_10_30():
    truth = np.array([1] * 40 + [2] * 40)
    pred = np.array([1] * 30 + [2] * 10 + [1] * 10 + [2] * 30)
    cm = confusion_matrix(truth, pred, 2)
    assert np.array_equal(cm, [[30, 10], [10, 30]])
    rep = compute_metrics(truth, pred, 2)
    assert rep.accuracy == 0.75
    assert rep.kappa == 0.5
    assert rep.precision == rep.recall == rep.f1 == 0.75


def test_constant_predictor_on_balanced_truth():
    truth = np.array([1] * 20 + [2] * 20)
    pred = np.ones(40, dtype=int)
    rep = compute_metrics(truth, pred, 2)
    assert rep.accuracy == 0.5
    assert rep.kappa == 0.0
    assert rep.precision == 0.25          # (0.5 + 0) / 2
    assert rep.recall == 0.5              # (1.0 + 0) / 2
    assert abs(rep.f1 - (2 * 0.5 / 1.5) / 2) < 1e-12


def test_kappa_invariant_to_label_permutation():
    rng = np.random.default_rng(0)
    truth = rng.integers(1, 3, size=60)
    pred = rng.integers(1, 3, size=60)
    base = compute_metrics(truth, pred, 2)
    swapped = compute_metrics(3 - truth, 3 - pred, 2)
    assert abs(base.kappa - swapped.kappa) < 1e-12
    assert abs(base.accuracy - swapped.accuracy) < 1e-12


def test_macro_f1_invariant_to_sample_order():
    rng = np.random.default_rng(1)
    truth = rng.integers(1, 4, size=50)
    pred = rng.integers(1, 4, size=50)
    perm = rng.permutation(50)
    a = compute_metrics(truth, pred, 3)
    b = compute_metrics(truth[perm], pred[perm], 3)
    assert a == b


def test_metric_validation_errors():
    with pytest.raises(ValueError, match="equal-length"):
        compute_metrics([1, 2], [1], 2)
    with pytest.raises(ValueError, match="1..2"):
        compute_metrics([1, 3], [1, 2], 2)
    with pytest.raises(ValueError, match="1..2"):
        compute_metrics([1, 2], [0, 2], 2)
    with pytest.raises(ValueError, match="classes"):
        compute_metrics([1, 1], [1, 1], 1)
    with pytest.raises(ValueError, match="empty"):
        compute_metrics([], [], 2)


def test_report_dict_round_trip():
    rep = MetricsReport(0.75, 0.5, 0.7, 0.8, 0.74)
    assert MetricsReport.from_dict(rep.to_dict()) == rep


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank


def brute_force_wilcoxon(d: np.ndarray) -> tuple[float, float]:
    d = d[d != 0.0]
    ranks = sps.rankdata(np.abs(d))
    w_plus = ranks[d > 0].sum()
    w_minus = ranks[d < 0].sum()
    w_obs = min(w_plus, w_minus)
    total = ranks.sum()
    count = 0
    for signs in itertools.product((1.0, -1.0), repeat=d.size):
        wp = sum(r for r, s in zip(ranks, signs) if s > 0)
        if min(wp, total - wp) <= w_obs + 1e-9:
            count += 1
    return float(w_obs), count / 2.0 ** d.size


def test_all_equal_pairs_rejected():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    with pytest.raises(ValueError, match="insufficient pairs"):
        wilcoxon_signed_rank(a, a)
    with pytest.raises(ValueError, match="insufficient pairs"):
        wilcoxon_signed_rank(a, a - np.array([0, 0, 1, 1, 0, 0.0]))


def test_five_positive_differences():
    a = np.array([2.0, 3.0, 4.0, 5.0, 6.0])
    b = np.array([1.0, 1.0, 1.0, 1.0, 1.0])
    w, p = wilcoxon_signed_rank(a, b)
    assert w == 0.0
    assert p == 2.0 / 32.0


def test_six_mixed_differences_match_enumeration():
    d = np.array([1.0, -2.0, 3.0, -4.0, 5.0, 6.0])
    w, p = wilcoxon_signed_rank(d, np.zeros(6))
    w_ref, p_ref = brute_force_wilcoxon(d)
    assert w == w_ref
    assert p == pytest.approx(p_ref, abs=1e-15)


def test_exact_branch_matches_enumeration_up_to_n12():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 50:
        n = int(rng.integers(5, 13))
        # small integer magnitudes force plenty of rank ties
        d = rng.integers(-5, 6, size=n).astype(np.float64)
        if np.count_nonzero(d) < 5:
            continue
        w, p = wilcoxon_signed_rank(d, np.zeros(n))
        w_ref, p_ref = brute_force_wilcoxon(d)
        assert w == pytest.approx(w_ref, abs=1e-12)
        assert p == pytest.approx(p_ref, abs=1e-12), d
        checked += 1


def test_statistic_properties_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(5, 30))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        if np.count_nonzero(a - b) < 5:
            continue
        w, p = wilcoxon_signed_rank(a, b)
        assert w >= 0.0
        assert 0.0 < p <= 1.0
        w2, p2 = wilcoxon_signed_rank(b, a)
        assert w == w2 and p == p2


def test_large_sample_normal_branch_matches_reference():
    rng = np.random.default_rng(4)
    a = rng.normal(size=40)
    b = rng.normal(loc=0.4, size=40)
    w, p = wilcoxon_signed_rank(a, b)
    ref = sps.wilcoxon(a, b, correction=True, method="approx",
                       alternative="two-sided")
    assert w == pytest.approx(float(ref.statistic), abs=1e-9)
    assert p == pytest.approx(float(ref.pvalue), abs=1e-9)
    # ties still handled in the normal branch
    at = np.round(rng.normal(size=30), 1)
    bt = np.round(rng.normal(loc=0.3, size=30), 1)
    d = at - bt
    if np.count_nonzero(d) > 25:
        w2, p2 = wilcoxon_signed_rank(at, bt)
        ref2 = sps.wilcoxon(at, bt, correction=True, method="approx",
                            alternative="two-sided")
        assert w2 == pytest.approx(float(ref2.statistic), abs=1e-9)
        assert p2 == pytest.approx(float(ref2.pvalue), abs=1e-9)
