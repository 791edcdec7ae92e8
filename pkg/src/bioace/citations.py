"""Citation attribution: judging (sentence, cited document) pairs.

Three settings are supported: whole document (title + abstract), the single
document sentence most similar to the claim (maxSimSentence), and
nugget-list comparison. Label schemes: binary (attributable / not
attributable), ternary (support / contradict / neutral), and the quaternary
nugget scheme (supports / contradicts / neutral / not relevant).

Gold mapping for binary evaluation: supporting -> attributable, everything
else -> not attributable. For ternary evaluation, gold and predicted
not-relevant map to neutral (the ternary scheme has no non-committal class
other than neutral).
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import CitationLabel, Document
from .errors import DegenerateLabels, EmptyDocument, EmptyNuggetList
from .nuggets import cosine
from .prompts import (
    BINARY_CITATION,
    BINARY_CITATION_LABELS,
    NUGGET_COMPARISON,
    NUGGET_COMPARISON_LABELS,
    TERNARY_CITATION,
    TERNARY_CITATION_LABELS,
    render_nugget_list,
)

BINARY = "binary"
TERNARY = "ternary"
QUATERNARY = "quaternary"

SCHEME_LABELS = {
    BINARY: ("attributable", "not attributable"),
    TERNARY: ("support", "contradict", "neutral"),
    QUATERNARY: ("supports", "contradicts", "neutral", "not relevant"),
}

# Total mappings between schemes; composing them is consistent
# (supports -> support -> attributable).
QUATERNARY_TO_TERNARY = {
    "supports": "support",
    "contradicts": "contradict",
    "neutral": "neutral",
    "not relevant": "neutral",
}
TERNARY_TO_BINARY = {
    "support": "attributable",
    "contradict": "not attributable",
    "neutral": "not attributable",
}
QUATERNARY_TO_BINARY = {
    label: TERNARY_TO_BINARY[QUATERNARY_TO_TERNARY[label]]
    for label in SCHEME_LABELS[QUATERNARY]
}

_GOLD_TO_QUATERNARY = {
    CitationLabel.SUPPORTING: "supports",
    CitationLabel.CONTRADICTING: "contradicts",
    CitationLabel.NEUTRAL: "neutral",
    CitationLabel.NOT_RELEVANT: "not relevant",
}


def gold_to_scheme(label: CitationLabel, scheme: str) -> str:
    """Map an expert judgment onto a prediction scheme's label set."""
    quaternary = _GOLD_TO_QUATERNARY[CitationLabel(label)]
    if scheme == QUATERNARY:
        return quaternary
    if scheme == TERNARY:
        return QUATERNARY_TO_TERNARY[quaternary]
    if scheme == BINARY:
        return QUATERNARY_TO_BINARY[quaternary]
    raise ValueError(f"unknown scheme: {scheme!r}")


def map_label(label: str, from_scheme: str, to_scheme: str) -> str:
    if from_scheme == to_scheme:
        return label
    if from_scheme == QUATERNARY and to_scheme == TERNARY:
        return QUATERNARY_TO_TERNARY[label]
    if from_scheme == QUATERNARY and to_scheme == BINARY:
        return QUATERNARY_TO_BINARY[label]
    if from_scheme == TERNARY and to_scheme == BINARY:
        return TERNARY_TO_BINARY[label]
    raise ValueError(f"no mapping from {from_scheme!r} to {to_scheme!r}")


def reference_text(doc: Document) -> str:
    """Reference rendering for the whole-document setting: title + abstract."""
    return f"{doc.title} {doc.abstract}"


def judge_sentence_document(
    sentence_text: str, doc: Document, scheme: str, gateway, endpoint,
    reference: str | None = None,
) -> str:
    """Constrained binary/ternary judgment of a claim against a reference.

    ``reference`` overrides the default whole-document text (used by the
    maxSimSentence setting).
    """
    if scheme == BINARY:
        template, allowed = BINARY_CITATION, BINARY_CITATION_LABELS
    elif scheme == TERNARY:
        template, allowed = TERNARY_CITATION, TERNARY_CITATION_LABELS
    else:
        raise ValueError(f"judge_sentence_document handles binary/ternary, not {scheme!r}")
    prompt = template.format(
        claim=sentence_text,
        reference=reference if reference is not None else reference_text(doc),
    )
    return gateway.generate_label(prompt, allowed, endpoint)


@dataclass(frozen=True)
class MaxSimSentence:
    pmid: str
    sentence_index: int
    text: str
    similarity: float


def max_sim_sentence(sentence_text: str, doc: Document, gateway, embed_endpoint) -> MaxSimSentence:
    """Document sentence with the greatest cosine to the claim (smallest-index ties)."""
    if not doc.sentences:
        raise EmptyDocument(f"document {doc.pmid} has no sentences")
    vectors = gateway.embed_batch([sentence_text] + list(doc.sentences), embed_endpoint)
    claim_vec = vectors[0]
    best_index = 0
    best_sim = None
    for idx, vec in enumerate(vectors[1:]):
        sim = cosine(claim_vec, vec)
        if best_sim is None or sim > best_sim:
            best_sim = sim
            best_index = idx
    return MaxSimSentence(
        pmid=doc.pmid,
        sentence_index=best_index,
        text=doc.sentences[best_index],
        similarity=best_sim,
    )


def judge_nugget_lists(answer_nuggets, doc_nuggets, gateway, endpoint) -> str:
    """Quaternary judgment of an answer-nugget list against a document-nugget list."""
    answer_nuggets = list(answer_nuggets)
    doc_nuggets = list(doc_nuggets)
    if not answer_nuggets or not doc_nuggets:
        raise EmptyNuggetList("both nugget lists must be non-empty")
    prompt = NUGGET_COMPARISON.format(
        answer_nuggets=render_nugget_list(answer_nuggets),
        document_nuggets=render_nugget_list(doc_nuggets),
    )
    return gateway.generate_label(prompt, NUGGET_COMPARISON_LABELS, endpoint)


def aggregate_pair_labels(pair_labels) -> str:
    """Deterministic rubric over a full (answer nugget x doc nugget) label grid.

    contradicts if any pair contradicts; else supports if every answer
    nugget has at least one supporting document nugget; else neutral if any
    pair is supports or neutral; else not relevant.
    """
    grid = [list(row) for row in pair_labels]
    if not grid or any(not row for row in grid):
        raise EmptyNuggetList("pair label grid must be non-empty and rectangular")
    width = len(grid[0])
    if any(len(row) != width for row in grid):
        raise ValueError("pair label grid must be rectangular")
    for row in grid:
        for label in row:
            if label not in SCHEME_LABELS[QUATERNARY]:
                raise ValueError(f"unknown pair label: {label!r}")

    if any(label == "contradicts" for row in grid for label in row):
        return "contradicts"
    if all(any(label == "supports" for label in row) for row in grid):
        return "supports"
    if any(label in ("supports", "neutral") for row in grid for label in row):
        return "neutral"
    return "not relevant"


def fit_score_threshold(scores, gold) -> tuple[float, float]:
    """Threshold maximizing F1 of the attributable class; ties pick smallest.

    ``gold`` entries are truthy for attributable. Candidates are midpoints
    between consecutive distinct sorted scores plus -inf/+inf sentinels;
    prediction is attributable iff score >= threshold.
    """
    scores = [float(s) for s in scores]
    gold = [bool(g) for g in gold]
    if len(scores) != len(gold):
        raise ValueError("scores and gold must have equal length")
    positives = sum(gold)
    if positives == 0 or positives == len(gold):
        raise DegenerateLabels("need at least one positive and one negative label")

    distinct = sorted(set(scores))
    candidates = [float("-inf")]
    candidates += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    candidates.append(float("inf"))

    best_t = None
    best_f1 = -1.0
    for t in candidates:
        tp = sum(1 for s, g in zip(scores, gold) if g and s >= t)
        fp = sum(1 for s, g in zip(scores, gold) if not g and s >= t)
        fn = positives - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_t = t
    return best_t, best_f1


@dataclass(frozen=True)
class SystemCitationMetrics:
    citation_coverage: float
    citation_support_rate: float
    citation_contradict_rate: float
    citation_neutral_rate: float
    citation_not_relevant_rate: float

    def as_dict(self) -> dict[str, float]:
        return {
            "citation_coverage": self.citation_coverage,
            "citation_support_rate": self.citation_support_rate,
            "citation_contradict_rate": self.citation_contradict_rate,
            "citation_neutral_rate": self.citation_neutral_rate,
            "citation_not_relevant_rate": self.citation_not_relevant_rate,
        }


_SUPPORTISH = {"supports", "support", "attributable"}
_CONTRADICTISH = {"contradicts", "contradict"}
_NOT_RELEVANTISH = {"not relevant"}


def system_citation_metrics(sentences, labels: dict) -> SystemCitationMetrics:
    """Coverage and label rates for one system's run.

    ``labels`` maps (sentence_id, pmid) to a predicted label from any
    scheme. Coverage is the fraction of sentences with at least one
    supporting-class citation (a sentence with no citations is uncovered);
    rates are citation-level fractions, 0 on an empty denominator.
    """
    sentences = list(sentences)
    n_sentences = len(sentences)
    covered = 0
    counts = {"support": 0, "contradict": 0, "neutral": 0, "not_relevant": 0}
    total = 0
    for sentence in sentences:
        any_support = False
        for pmid in sentence.citations:
            label = labels.get((sentence.id, pmid))
            if label is None:
                continue
            total += 1
            if label in _SUPPORTISH:
                counts["support"] += 1
                any_support = True
            elif label in _CONTRADICTISH:
                counts["contradict"] += 1
            elif label in _NOT_RELEVANTISH:
                counts["not_relevant"] += 1
            else:
                counts["neutral"] += 1
        if any_support:
            covered += 1
    return SystemCitationMetrics(
        citation_coverage=covered / n_sentences if n_sentences else 0.0,
        citation_support_rate=counts["support"] / total if total else 0.0,
        citation_contradict_rate=counts["contradict"] / total if total else 0.0,
        citation_neutral_rate=counts["neutral"] / total if total else 0.0,
        citation_not_relevant_rate=counts["not_relevant"] / total if total else 0.0,
    )
