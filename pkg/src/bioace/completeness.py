"""Relevance labeling of answer sentences and completeness aggregates.

Each sentence is labeled independently (question + sentence only, exactly as
the prompt is structured) with one of Required / Unnecessary / Borderline /
Inappropriate. Aggregates are plain label-count ratios: completeness is the
Required fraction, redundancy the Unnecessary fraction, harmfulness the
Inappropriate fraction; Borderline counts toward none of the three.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import RelevanceLabel
from .errors import EmptyAnswer, KeyMismatch, UnparsableLabel
from .prompts import COMPLETENESS, COMPLETENESS_LABELS
from .stats import ConfusionMatrix, per_class_prf, prf


def label_sentence(question_text: str, sentence_text: str, gateway, endpoint) -> RelevanceLabel:
    """Ask the generation endpoint for the sentence's relevance label."""
    prompt = COMPLETENESS.format(question=question_text, answer_sentence=sentence_text)
    raw = gateway.generate_label(prompt, COMPLETENESS_LABELS, endpoint)
    return RelevanceLabel.parse(raw)


def label_run_sentences(corpus, gateway, endpoint) -> dict[str, RelevanceLabel]:
    """Label every run sentence; sentence_id -> label, deterministic order."""
    labels: dict[str, RelevanceLabel] = {}
    for (system_id, question_id) in sorted(corpus.runs):
        question = corpus.questions.get(question_id)
        if question is None:
            continue
        for sentence in corpus.runs[(system_id, question_id)]:
            try:
                labels[sentence.id] = label_sentence(
                    question.text, sentence.text, gateway, endpoint
                )
            except UnparsableLabel as exc:
                raise UnparsableLabel(
                    exc.raw_output, exc.allowed, context=f"sentence {sentence.id}"
                ) from exc
    return labels


@dataclass
class CompletenessReport:
    per_sentence: dict[str, RelevanceLabel]
    completeness: float
    redundancy: float
    harmfulness: float
    counts: dict[str, int] = field(default_factory=dict)


def compute_relevance_metrics(labels) -> CompletenessReport:
    """Aggregate a list of labels into the three count-ratio metrics."""
    labels = list(labels)
    if not labels:
        raise EmptyAnswer("cannot compute completeness of an empty answer")
    counts = {label.value: 0 for label in RelevanceLabel}
    for label in labels:
        counts[RelevanceLabel(label).value] += 1
    total = len(labels)
    return CompletenessReport(
        per_sentence={},
        completeness=counts[RelevanceLabel.REQUIRED.value] / total,
        redundancy=counts[RelevanceLabel.UNNECESSARY.value] / total,
        harmfulness=counts[RelevanceLabel.INAPPROPRIATE.value] / total,
        counts=counts,
    )


def evaluate_labels_vs_gold(predicted: dict, gold: dict) -> dict:
    """Compare predicted and gold labels on the same sentence set.

    Returns weighted and macro P/R/F1 plus the per-class breakdown and the
    raw confusion matrix (gold rows, predicted columns, fixed label order).
    """
    if set(predicted) != set(gold):
        raise KeyMismatch(
            f"sentence sets differ: {sorted(set(predicted) ^ set(gold))}"
        )
    classes = [label.value for label in RelevanceLabel]
    ids = sorted(predicted)
    matrix = ConfusionMatrix.from_pairs(
        [RelevanceLabel(gold[i]).value for i in ids],
        [RelevanceLabel(predicted[i]).value for i in ids],
        classes=classes,
    )
    weighted = prf(matrix, "weighted")
    macro = prf(matrix, "macro")
    return {
        "weighted": {"precision": weighted[0], "recall": weighted[1], "f1": weighted[2]},
        "macro": {"precision": macro[0], "recall": macro[1], "f1": macro[2]},
        "per_class": per_class_prf(matrix),
        "confusion": {
            "classes": matrix.classes,
            "counts": matrix.counts.tolist(),
        },
    }
