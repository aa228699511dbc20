"""Evaluation protocols and statistics.

Confusion counting feeds every scalar metric: rows are true classes,
columns predictions. UAR is mean per-class recall, WAR is overall
accuracy, F1 is macro-averaged by default (the unweighted mean of
per-class F1, with an empty class contributing 0).
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np


def confusion(predictions, labels, num_classes):
    predictions = np.asarray(predictions, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for true, pred in zip(labels, predictions):
        if not (0 <= true < num_classes and 0 <= pred < num_classes):
            raise ValueError(f"class out of range: true={true} pred={pred}")
        counts[true, pred] += 1
    return counts


def uar(counts):
    """Unweighted average recall: mean over classes of TP / (TP + FN)."""
    counts = np.asarray(counts)
    row_sums = counts.sum(axis=1)
    for j, total in enumerate(row_sums):
        if total == 0:
            raise ValueError(f"class {j} has no samples; UAR undefined")
    return float(np.mean(np.diag(counts) / row_sums))


def war(counts):
    """Weighted average recall: sum of TP over total sample count."""
    counts = np.asarray(counts)
    total = counts.sum()
    if total == 0:
        raise ValueError("empty confusion matrix; WAR undefined")
    return float(np.trace(counts) / total)


def macro_f1(counts, weighted=False):
    """Mean per-class F1; a class with zero true positives scores 0.
    `weighted=True` weights classes by support instead."""
    counts = np.asarray(counts)
    m = counts.shape[0]
    f1s = np.zeros(m)
    for j in range(m):
        tp = counts[j, j]
        fp = counts[:, j].sum() - tp
        fn = counts[j, :].sum() - tp
        if tp == 0:
            continue
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        f1s[j] = 2.0 * precision * recall / (precision + recall)
    if weighted:
        support = counts.sum(axis=1)
        if support.sum() == 0:
            raise ValueError("empty confusion matrix")
        return float((f1s * support).sum() / support.sum())
    return float(f1s.mean())


@dataclass
class Fold:
    subject_id: str
    train_ids: list
    test_ids: list


def loso_folds(manifest):
    """One fold per subject (sorted by id); the subject's clips are the
    test set and everything else trains."""
    subjects = manifest.subjects()
    if len(subjects) < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")
    folds = []
    for subject in subjects:
        test = [r.clip_id for r in manifest.rows if r.subject_id == subject]
        train = [r.clip_id for r in manifest.rows if r.subject_id != subject]
        folds.append(Fold(subject, train, test))
    return folds


# ------------------------------------------------------- Wilcoxon rank sum

EXACT_LIMIT = 12  # combined sample size up to which enumeration runs

ALTERNATIVES = ("two-sided", "less", "greater")


@dataclass
class RankSumResult:
    z: float
    p_value: float
    alternative: str
    exact_p: float | None = None
    rank_sum: float = 0.0


def _midranks(values):
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _normal_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_rank_sum(a, b, alternative="two-sided"):
    """Rank-sum test on two samples.

    Midranks handle ties; z uses the tie-corrected variance and a 0.5
    continuity correction; p comes from the normal approximation. When
    the combined size is at most 12, the exact p by enumerating all
    rank assignments is reported alongside.

    `alternative="less"` tests that a tends below b (small rank sum of a).
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    na, nb = a.size, b.size
    n = na + nb
    ranks = _midranks(np.concatenate([a, b]))
    w = float(ranks[:na].sum())
    mu = na * (n + 1) / 2.0

    _, tie_counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = float(((tie_counts**3 - tie_counts).sum()) / (n * (n - 1))) if n > 1 else 0.0
    var = na * nb / 12.0 * ((n + 1) - tie_term)

    if var <= 0:  # all observations tied
        z = 0.0
        p = 1.0
    else:
        sd = math.sqrt(var)
        # continuity correction belongs to the tail being integrated
        p_greater = _normal_sf((w - mu - 0.5) / sd)
        p_less = 1.0 - _normal_sf((w - mu + 0.5) / sd)
        if w > mu:
            z = (w - mu - 0.5) / sd
        elif w < mu:
            z = (w - mu + 0.5) / sd
        else:
            z = 0.0
        if alternative == "two-sided":
            p = min(1.0, 2.0 * min(p_less, p_greater))
        elif alternative == "greater":
            p = p_greater
        else:
            p = p_less

    exact = _exact_p(ranks, na, w, alternative) if n <= EXACT_LIMIT else None
    return RankSumResult(z=z, p_value=p, alternative=alternative, exact_p=exact,
                         rank_sum=w)


def _exact_p(ranks, na, w, alternative):
    """Permutation p-value: enumerate every assignment of na positions."""
    n = len(ranks)
    total = 0
    le = 0
    ge = 0
    for combo in itertools.combinations(range(n), na):
        ws = ranks[list(combo)].sum()
        total += 1
        if ws <= w + 1e-9:
            le += 1
        if ws >= w - 1e-9:
            ge += 1
    p_less = le / total
    p_greater = ge / total
    if alternative == "less":
        return p_less
    if alternative == "greater":
        return p_greater
    return min(1.0, 2.0 * min(p_less, p_greater))
