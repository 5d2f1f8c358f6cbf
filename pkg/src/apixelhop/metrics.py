"""Ranking and thresholded metrics for scored binary sets.

Labels are 1 for fake (positive) and 0 for real.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from .errors import NoPositives, SingleClass


def _as_arrays(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s, y


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    s, y = _as_arrays(scores, labels)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both labels")
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, labels) -> float:
    """Non-interpolated AP: mean of precision@k over the ranks k of positives.

    Ties in score keep the input order (stable sort).
    """
    s, y = _as_arrays(scores, labels)
    n_pos = int(np.sum(y == 1))
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = y[order] == 1
    precision = np.cumsum(hits) / np.arange(1, len(s) + 1)
    return float(precision[hits].sum() / n_pos)


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    s, y = _as_arrays(scores, labels)
    if len(s) == 0:
        raise ValueError("accuracy of an empty set")
    return float(np.mean((s >= threshold).astype(np.int64) == y))


def mean_ap(sets: Mapping[str, tuple]) -> float:
    """Unweighted mean of per-subset AP; ``sets`` maps name -> (scores, labels)."""
    if not sets:
        raise ValueError("mean_ap needs at least one set")
    return float(np.mean([average_precision(s, y) for s, y in sets.values()]))
