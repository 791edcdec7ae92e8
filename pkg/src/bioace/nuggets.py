"""Nugget extraction, similarity-matrix alignment, P/R/F1, threshold tuning.

System and ground-truth nuggets are embedded and compared pairwise by cosine
similarity. A per-question Bayesian mixture (see ``bgmm``) converts each
similarity into a probability of the pair being semantically similar; pairs
at or above the probability threshold are aligned. Matching is many-to-many
(no assignment step); a greedy one-to-one variant is available behind a flag
but is not the default.

Threshold tuning sweeps an exhaustive grid (default [0.50, 0.95] at 1e-4,
i.e. four-decimal thresholds) maximizing the scalarized combination of
average F1, average matched-pair similarity, and the matched-pair count
normalized by matrix size.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .bgmm import BgmmModel
from .errors import EmptyNuggetList, EmptyTrainSet, ZeroVector
from .prompts import NUGGET_GENERATION

_LIST_PREFIX = re.compile(r"^\s*(?:[-*•·]+|\d+[.)])\s*")


def parse_nugget_lines(raw: str) -> list[str]:
    """Split a completion into nuggets: one per line, prefixes stripped."""
    nuggets = []
    for line in raw.splitlines():
        stripped = _LIST_PREFIX.sub("", line).strip()
        if stripped:
            nuggets.append(stripped)
    return nuggets


def extract_nuggets(text: str, gateway, endpoint) -> list[str]:
    """Generate atomic fact nuggets for ``text`` via the generation endpoint."""
    if not text or not text.strip():
        raise EmptyNuggetList("cannot extract nuggets from empty text")
    raw = gateway.generate_text(NUGGET_GENERATION.format(text=text), endpoint)
    nuggets = parse_nugget_lines(raw)
    if not nuggets:
        raise EmptyNuggetList(f"model returned nothing parseable: {raw!r}")
    return nuggets


@dataclass
class SimilarityMatrix:
    values: np.ndarray  # shape (n_sys, n_gold), cosines in [-1, 1]
    row_nuggets: list[str]
    col_nuggets: list[str]

    @property
    def n_sys(self) -> int:
        return self.values.shape[0]

    @property
    def n_gold(self) -> int:
        return self.values.shape[1]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def build_similarity_matrix(
    sys_nuggets, gold_nuggets, gateway, embed_endpoint
) -> SimilarityMatrix:
    """All pairwise cosines between system (rows) and gold (columns) nuggets."""
    sys_nuggets = list(sys_nuggets)
    gold_nuggets = list(gold_nuggets)
    if not sys_nuggets or not gold_nuggets:
        raise EmptyNuggetList("both nugget lists must be non-empty")
    vectors = gateway.embed_batch(sys_nuggets + gold_nuggets, embed_endpoint)
    sys_vecs = vectors[: len(sys_nuggets)]
    gold_vecs = vectors[len(sys_nuggets) :]
    values = np.empty((len(sys_nuggets), len(gold_nuggets)), dtype=float)
    for i, u in enumerate(sys_vecs):
        for j, v in enumerate(gold_vecs):
            values[i, j] = cosine(u, v)
    return SimilarityMatrix(values=values, row_nuggets=sys_nuggets, col_nuggets=gold_nuggets)


@dataclass
class AlignmentResult:
    matched_pairs: list[tuple[int, int]]
    pair_probability: dict[tuple[int, int], float]
    pair_similarity: dict[tuple[int, int], float]
    threshold_used: float
    fallback_used: bool = False


def align_nuggets(
    matrix: SimilarityMatrix,
    model: BgmmModel | None,
    threshold: float,
    raw_cosine_fallback: float = 0.75,
    one_to_one: bool = False,
) -> AlignmentResult:
    """Match pairs whose similar-probability reaches ``threshold``.

    ``model=None`` or a single-component model triggers the fallback rule:
    match on raw cosine >= ``raw_cosine_fallback``. In fallback mode
    ``pair_probability`` carries the raw similarity.
    """
    values = matrix.values
    fallback = model is None or model.n_components < 2
    if fallback:
        probs = values
        cutoff = raw_cosine_fallback
    else:
        probs = model.similar_probabilities(values.ravel()).reshape(values.shape)
        cutoff = threshold

    candidates = [
        (i, j)
        for i in range(values.shape[0])
        for j in range(values.shape[1])
        if probs[i, j] >= cutoff
    ]
    if one_to_one:
        ranked = sorted(
            candidates, key=lambda p: (-probs[p], -values[p], p[0], p[1])
        )
        used_rows: set[int] = set()
        used_cols: set[int] = set()
        kept = []
        for i, j in ranked:
            if i in used_rows or j in used_cols:
                continue
            used_rows.add(i)
            used_cols.add(j)
            kept.append((i, j))
        candidates = sorted(kept)

    return AlignmentResult(
        matched_pairs=candidates,
        pair_probability={p: float(probs[p]) for p in candidates},
        pair_similarity={p: float(values[p]) for p in candidates},
        threshold_used=cutoff,
        fallback_used=fallback,
    )


@dataclass(frozen=True)
class NuggetPrf:
    precision: float
    recall: float
    f1: float


def score_prf(alignment: AlignmentResult, n_sys: int, n_gold: int) -> NuggetPrf:
    """Precision = matched system rows / n_sys; recall = matched gold cols / n_gold."""
    if n_sys < 1 or n_gold < 1:
        raise ValueError("n_sys and n_gold must be >= 1")
    rows = {i for i, _ in alignment.matched_pairs}
    cols = {j for _, j in alignment.matched_pairs}
    precision = len(rows) / n_sys
    recall = len(cols) / n_gold
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return NuggetPrf(precision=precision, recall=recall, f1=f1)


@dataclass(frozen=True)
class ThresholdSearchResult:
    best_threshold: float
    avg_f1: float
    avg_similarity: float
    avg_alignments: float
    scalarized_objective: float


def threshold_grid(lo: float = 0.50, hi: float = 0.95, step: float = 1e-4) -> list[float]:
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(n + 1)]


def tune_threshold(
    train_set,
    grid: tuple[float, float, float] = (0.50, 0.95, 1e-4),
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> ThresholdSearchResult:
    """Exhaustive grid sweep of the scalarized multi-objective.

    ``train_set`` holds (SimilarityMatrix, model) pairs; any model exposing
    ``similar_probabilities`` works. Objectives per instance at threshold t:
    F1 of the induced alignment, mean similarity of matched pairs (0 when
    none), and matched-pair count normalized by n_sys * n_gold. Ties resolve
    to the smallest threshold.
    """
    train_set = list(train_set)
    if not train_set:
        raise EmptyTrainSet("threshold tuning needs at least one instance")
    w_f1, w_sim, w_cnt = weights

    instances = []
    for matrix, model in train_set:
        probs = model.similar_probabilities(matrix.values.ravel()).reshape(
            matrix.values.shape
        )
        instances.append((matrix.values, np.asarray(probs, dtype=float)))

    best = None
    for t in threshold_grid(*grid):
        f1_sum = sim_sum = cnt_sum = 0.0
        for values, probs in instances:
            mask = probs >= t
            n_sys, n_gold = values.shape
            precision = float(mask.any(axis=1).sum()) / n_sys
            recall = float(mask.any(axis=0).sum()) / n_gold
            f1 = (
                2 * precision * recall / (precision + recall)
                if precision + recall > 0
                else 0.0
            )
            matched = int(mask.sum())
            f1_sum += f1
            sim_sum += float(values[mask].mean()) if matched else 0.0
            cnt_sum += matched / (n_sys * n_gold)
        k = len(instances)
        avg_f1, avg_sim, avg_cnt = f1_sum / k, sim_sum / k, cnt_sum / k
        objective = w_f1 * avg_f1 + w_sim * avg_sim + w_cnt * avg_cnt
        if best is None or objective > best.scalarized_objective:
            best = ThresholdSearchResult(
                best_threshold=t,
                avg_f1=avg_f1,
                avg_similarity=avg_sim,
                avg_alignments=avg_cnt,
                scalarized_objective=objective,
            )
    return best
