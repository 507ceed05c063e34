"""Evaluation statistics: accuracy, lift, CIEDE2000 summaries, ranking and
set metrics, year error, and Cramer's V.

Conventions that change reported numbers:

* medians of an even count take the lower middle element;
* macro-F1 counts a label with no true and no predicted instances as F1 = 0;
* chi-square has no continuity correction, and empty rows/columns are pruned
  before the expected counts are formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .colorspace import delta_e_2000_array
from .errors import DegenerateTable, EmptyInput, KTooLarge, LengthMismatch, RangeError, UnknownLabel


def _paired(pred, truth) -> None:
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} targets")
    if len(pred) == 0:
        raise EmptyInput("no items to score")


def top1_accuracy(pred: Sequence, truth: Sequence) -> float:
    _paired(pred, truth)
    return sum(p == t for p, t in zip(pred, truth)) / len(truth)


def lift(acc: float, majority: float) -> float:
    """Accuracy minus the majority baseline, in percentage points."""
    for name, v in (("accuracy", acc), ("majority", majority)):
        if not 0.0 <= v <= 1.0:
            raise RangeError(f"{name} must be a fraction in [0, 1], got {v}")
    return 100.0 * (acc - majority)


def lower_median(values) -> float:
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise EmptyInput("median of nothing")
    return float(v[(v.size - 1) // 2])


def delta_e_stats(pred, truth) -> dict[str, float]:
    pred = np.asarray(pred, dtype=float).reshape(-1, 3)
    truth = np.asarray(truth, dtype=float).reshape(-1, 3)
    _paired(pred, truth)
    de = delta_e_2000_array(pred, truth)
    return {"mean": float(de.mean()), "median": lower_median(de)}


def _ranked(scores_row, vocab: Sequence | None):
    if isinstance(scores_row, dict):
        labels = list(vocab) if vocab is not None else list(scores_row)
        vals = np.array([scores_row[l] for l in labels], dtype=float)
    else:
        vals = np.asarray(scores_row, dtype=float)
        labels = list(vocab) if vocab is not None else list(range(vals.size))
    # Stable sort on -score keeps vocabulary order among ties.
    order = np.argsort(-vals, kind="stable")
    return [labels[i] for i in order]


def precision_at_k(scores, truth_sets: Sequence[Iterable], k: int, vocab: Sequence | None = None) -> float:
    """Mean of |top-k & truth| / k.

    ``scores`` is a sequence of per-example rows, either arrays aligned with
    ``vocab`` or label->score dicts.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    _paired(scores, truth_sets)
    total = 0.0
    for row, truth in zip(scores, truth_sets):
        ranked = _ranked(row, vocab)
        if len(ranked) < k:
            raise KTooLarge(f"k={k} exceeds the {len(ranked)} scored labels")
        total += len(set(ranked[:k]) & set(truth)) / k
    return total / len(truth_sets)


def f1_scores(pred_sets: Sequence[Iterable], truth_sets: Sequence[Iterable], vocab: Sequence[Hashable]) -> dict[str, float]:
    _paired(pred_sets, truth_sets)
    index = {l: i for i, l in enumerate(vocab)}
    tp = np.zeros(len(index))
    fp = np.zeros(len(index))
    fn = np.zeros(len(index))
    for pred, truth in zip(pred_sets, truth_sets):
        pred, truth = set(pred), set(truth)
        unknown = (pred | truth) - set(index)
        if unknown:
            raise UnknownLabel(f"labels outside vocabulary: {sorted(map(str, unknown))}")
        for l in pred & truth:
            tp[index[l]] += 1
        for l in pred - truth:
            fp[index[l]] += 1
        for l in truth - pred:
            fn[index[l]] += 1
    denom = 2 * tp + fp + fn
    per_label = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    micro_denom = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / micro_denom) if micro_denom > 0 else 0.0
    return {"macro": float(per_label.mean()), "micro": micro}


def year_metrics(pred_years: Sequence[float], truth_years: Sequence[float], k: int = 2) -> dict[str, float]:
    _paired(pred_years, truth_years)
    err = np.abs(np.asarray(pred_years, dtype=float) - np.asarray(truth_years, dtype=float))
    return {"mae": float(err.mean()), "within_k": float(np.mean(err <= k))}


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError("counts shape must match the label vocabularies")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_pairs(cls, rows: Iterable, cols: Iterable, row_labels=None, col_labels=None) -> "ContingencyTable":
        rows, cols = list(rows), list(cols)
        if len(rows) != len(cols):
            raise LengthMismatch("row and column observations differ in length")
        row_labels = tuple(row_labels) if row_labels is not None else tuple(sorted(set(rows)))
        col_labels = tuple(col_labels) if col_labels is not None else tuple(sorted(set(cols)))
        ri = {l: i for i, l in enumerate(row_labels)}
        ci = {l: i for i, l in enumerate(col_labels)}
        counts = np.zeros((len(row_labels), len(col_labels)), dtype=np.int64)
        for r, c in zip(rows, cols):
            counts[ri[r], ci[c]] += 1
        return cls(counts, row_labels, col_labels)


def chi_square(t: ContingencyTable) -> float:
    c = t.counts.astype(float)
    c = c[c.sum(axis=1) > 0][:, c.sum(axis=0) > 0]
    n = c.sum()
    expected = np.outer(c.sum(axis=1), c.sum(axis=0)) / n
    return float(((c - expected) ** 2 / expected).sum())


def cramers_v(t: ContingencyTable) -> float:
    c = t.counts
    if t.total <= 0:
        raise DegenerateTable("contingency table is empty")
    r = int((c.sum(axis=1) > 0).sum())
    k = int((c.sum(axis=0) > 0).sum())
    if r < 2 or k < 2:
        raise DegenerateTable(f"need at least 2 non-empty rows and columns, got {r}x{k}")
    v = np.sqrt(chi_square(t) / (t.total * (min(r, k) - 1)))
    return float(min(max(v, 0.0), 1.0))
