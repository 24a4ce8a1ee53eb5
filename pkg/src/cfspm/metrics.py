"""Classification metrics and the paired Wilcoxon signed-rank test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("accuracy", "kappa", "precision", "recall", "f1")


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    kappa: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in METRIC_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{name: float(d[name]) for name in METRIC_NAMES})


def confusion_matrix(truth, pred, n_classes: int) -> np.ndarray:
    """K x K count matrix; rows are true classes, columns predictions."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ValueError(
            f"truth and pred must be equal-length 1-d, got {truth.shape} "
            f"and {pred.shape}")
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    for name, arr in (("truth", truth), ("pred", pred)):
        if arr.size and (arr.min() < 1 or arr.max() > n_classes):
            raise ValueError(
                f"{name} labels must lie in 1..{n_classes}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(truth, pred):
        cm[int(t) - 1, int(p) - 1] += 1
    return cm


def compute_metrics(truth, pred, n_classes: int) -> MetricsReport:
    """Accuracy, Cohen's kappa, and macro precision/recall/F1."""
    cm = confusion_matrix(truth, pred, n_classes)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("cannot score an empty prediction set")
    p_o = float(np.trace(cm)) / total
    rows = cm.sum(axis=1).astype(np.float64)
    cols = cm.sum(axis=0).astype(np.float64)
    p_e = float(rows @ cols) / (total * total)
    kappa = 0.0 if p_e == 1.0 else (p_o - p_e) / (1.0 - p_e)
    precisions, recalls, f1s = [], [], []
    for k in range(n_classes):
        tp = float(cm[k, k])
        prec = tp / cols[k] if cols[k] > 0 else 0.0
        rec = tp / rows[k] if rows[k] > 0 else 0.0
        f1 = 2.0 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return MetricsReport(accuracy=p_o, kappa=kappa,
                         precision=float(np.mean(precisions)),
                         recall=float(np.mean(recalls)),
                         f1=float(np.mean(f1s)))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing the average of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_min_sum_tail(doubled_ranks: list[int], w2: int) -> float:
    """P(min(W+, W-) <= w2/2) over all 2^n equally likely sign patterns.

    Works on doubled ranks so tied (half-integer) average ranks stay exact
    integers; counts are exact big integers.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    favourable = sum(c for s, c in enumerate(counts)
                     if min(s, total - s) <= w2)
    return favourable / float(2 ** len(doubled_ranks))


def wilcoxon_signed_rank(a, b) -> tuple[float, float]:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped; tied magnitudes get average ranks; the
    statistic is ``W = min(W+, W-)``.  The p-value is exact (full
    sign-pattern enumeration) for up to 25 retained pairs, and a normal
    approximation with tie and continuity corrections beyond that.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(
            f"paired scores must be equal-length 1-d, got {a.shape} and "
            f"{b.shape}")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n < 5:
        raise ValueError(
            f"insufficient pairs: {n} non-zero differences, need at least 5")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= 25:
        doubled = [int(round(2.0 * r)) for r in ranks]
        p = _exact_min_sum_tail(doubled, int(round(2.0 * w)))
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var -= float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
        if var <= 0.0:
            raise ValueError("insufficient pairs: zero rank variance")
        z = (w - mean + 0.5) / math.sqrt(var)
        p = 2.0 * 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return w, min(1.0, max(p, 0.0))
