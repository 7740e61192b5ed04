"""Binary-classification metrics: AUC, KS and log loss.

All three take a 0/1 label vector and a score vector of equal length.  AUC
and KS only use score ranks, so raw margins and calibrated probabilities
give the same numbers; log loss expects probabilities.
"""

from __future__ import annotations

import numpy as np

LOG_LOSS_EPS = 1e-12


def _check_inputs(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be 1-d arrays of equal length")
    if y.size == 0:
        raise ValueError("empty input")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    return y.astype(np.int8), s


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    n = scores.size
    ranks = np.empty(n, dtype=np.float64)
    # group boundaries of equal values in the sorted array
    boundary = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate(([0], boundary))
    ends = np.concatenate((boundary, [n]))
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = (a + b + 1) / 2
    return ranks


def auc(labels, scores) -> float:
    """Probability a random positive outranks a random negative, ties half.

    Computed from midranks (the Mann-Whitney statistic), so it is exact
    under ties rather than threshold-grid approximate.
    """
    y, s = _check_inputs(labels, scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative label")
    rank_sum = float(_midranks(s)[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def ks(labels, scores) -> float:
    """Max |TPR - FPR| over score thresholds.

    Equals the two-sample Kolmogorov-Smirnov distance between the score
    distributions of the two classes.
    """
    y, s = _check_inputs(labels, scores)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative label")
    order = np.argsort(s, kind="mergesort")[::-1]
    y_desc = y[order]
    s_desc = s[order]
    tp = np.cumsum(y_desc == 1)
    fp = np.cumsum(y_desc == 0)
    # evaluate only at the end of each tie group
    group_end = np.concatenate((s_desc[1:] != s_desc[:-1], [True]))
    tpr = tp[group_end] / n_pos
    fpr = fp[group_end] / n_neg
    return float(np.abs(tpr - fpr).max())


def log_loss(labels, probs) -> float:
    """Mean negative log likelihood with probabilities clamped away from 0/1."""
    y, p = _check_inputs(labels, probs)
    p = np.clip(p, LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))
