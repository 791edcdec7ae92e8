"""Shared evaluation statistics: P/R/F1, AUC, rank correlations, rankings.

All functions are pure and deterministic. Rank correlations use average
ranks for ties (Spearman) and the tau-b tie correction (Kendall), matching
how system-metric ties actually occur in practice. Empty-denominator
precision/recall/F1 are defined as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInput,
    EmptyInput,
    EmptyMatrix,
    KeyMismatch,
    TooFewSystems,
)


@dataclass
class ConfusionMatrix:
    """Counts indexed as [gold class][predicted class]."""

    classes: list[str]
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        k = len(self.classes)
        if self.counts is None:
            self.counts = np.zeros((k, k), dtype=int)
        else:
            self.counts = np.asarray(self.counts, dtype=int)
            if self.counts.shape != (k, k):
                raise ValueError("counts shape must be (classes, classes)")

    @classmethod
    def from_pairs(cls, gold, predicted, classes=None) -> "ConfusionMatrix":
        gold = list(gold)
        predicted = list(predicted)
        if len(gold) != len(predicted):
            raise ValueError("gold and predicted must have equal length")
        if classes is None:
            classes = sorted(set(gold) | set(predicted))
        matrix = cls(classes=list(classes))
        index = {c: i for i, c in enumerate(matrix.classes)}
        for g, p in zip(gold, predicted):
            matrix.counts[index[g], index[p]] += 1
        return matrix

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, gold, predicted, n: int = 1) -> None:
        i = self.classes.index(gold)
        j = self.classes.index(predicted)
        self.counts[i, j] += n


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def per_class_prf(matrix: ConfusionMatrix) -> dict[str, dict[str, float]]:
    """Per-class precision/recall/F1/support with the 0-convention."""
    if matrix.total == 0:
        raise EmptyMatrix("confusion matrix holds no observations")
    out = {}
    for i, cls_name in enumerate(matrix.classes):
        tp = float(matrix.counts[i, i])
        fp = float(matrix.counts[:, i].sum() - matrix.counts[i, i])
        fn = float(matrix.counts[i, :].sum() - matrix.counts[i, i])
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * p * r, p + r)
        out[cls_name] = {
            "precision": p,
            "recall": r,
            "f1": f1,
            "support": int(matrix.counts[i, :].sum()),
        }
    return out


def prf(matrix: ConfusionMatrix, averaging: str = "macro") -> tuple[float, float, float]:
    """Averaged precision/recall/F1.

    macro: unweighted mean over all classes in the matrix (zero-support
    classes contribute their zeros). weighted: mean weighted by gold support.
    """
    if averaging not in ("macro", "weighted"):
        raise ValueError(f"unknown averaging: {averaging}")
    by_class = per_class_prf(matrix)
    metrics = np.array(
        [[c["precision"], c["recall"], c["f1"]] for c in by_class.values()]
    )
    if averaging == "macro":
        p, r, f1 = metrics.mean(axis=0)
    else:
        support = np.array([c["support"] for c in by_class.values()], dtype=float)
        weights = support / support.sum()
        p, r, f1 = (metrics * weights[:, None]).sum(axis=0)
    return float(p), float(r), float(f1)


def auc(positives, negatives) -> float:
    """Mann-Whitney AUC with half credit for ties."""
    pos = [float(v) for v in positives]
    neg = [float(v) for v in negatives]
    if not pos or not neg:
        raise EmptyInput("auc needs at least one positive and one negative score")
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def average_ranks(values, descending: bool = False) -> list[float]:
    """Average ranks (1-based); tied values share the mean of their positions."""
    values = [float(v) for v in values]
    order = sorted(range(len(values)), key=lambda i: -values[i] if descending else values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman correlation: Pearson on average ranks (tie-aware)."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise ValueError("inputs must have equal length")
    if len(x) < 2:
        raise DegenerateInput("need at least two observations")
    rx = np.array(average_ranks(x))
    ry = np.array(average_ranks(y))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    if denom == 0:
        raise DegenerateInput("constant input has no rank variance")
    return float((dx * dy).sum() / denom)


def kendall(x, y) -> float:
    """Kendall tau-b (tie-corrected) via exhaustive pair comparison."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise ValueError("inputs must have equal length")
    n = len(x)
    if n < 2:
        raise DegenerateInput("need at least two observations")
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0:
        raise DegenerateInput("all pairs tied on one side")
    return float((concordant - discordant) / denom)


@dataclass(frozen=True)
class CorrelationResult:
    spearman: float
    kendall: float
    n: int


def rank_systems(metric_values: dict[str, float]) -> dict[str, float]:
    """Rank systems by a metric, best (highest) first; ties share average rank."""
    if len(metric_values) < 2:
        raise TooFewSystems("ranking needs at least two systems")
    ids = sorted(metric_values)
    ranks = average_ranks([metric_values[i] for i in ids], descending=True)
    return dict(zip(ids, ranks))


def correlate_rankings(
    auto_metric: dict[str, float], reference_metric: dict[str, float]
) -> CorrelationResult:
    """Rank both metrics over the same systems, then correlate the rankings."""
    if set(auto_metric) != set(reference_metric):
        raise KeyMismatch(
            f"system sets differ: {sorted(set(auto_metric) ^ set(reference_metric))}"
        )
    auto_ranks = rank_systems(auto_metric)
    ref_ranks = rank_systems(reference_metric)
    ids = sorted(auto_metric)
    xs = [auto_ranks[i] for i in ids]
    ys = [ref_ranks[i] for i in ids]
    return CorrelationResult(spearman=spearman(xs, ys), kendall=kendall(xs, ys), n=len(ids))
