import itertools
import math
import random

import pytest

from bioace.citations import (
    BINARY,
    QUATERNARY,
    QUATERNARY_TO_BINARY,
    QUATERNARY_TO_TERNARY,
    SCHEME_LABELS,
    TERNARY,
    TERNARY_TO_BINARY,
    aggregate_pair_labels,
    fit_score_threshold,
    gold_to_scheme,
    judge_nugget_lists,
    judge_sentence_document,
    map_label,
    max_sim_sentence,
    reference_text,
    system_citation_metrics,
)
from bioace.config import EndpointConfig
from bioace.corpus import CitationLabel, Document
from bioace.errors import DegenerateLabels, EmptyDocument, EmptyNuggetList


def _endpoint(path, capability):
    return EndpointConfig(base_url=f"fixture:{path}", model_id="m", capability=capability)


def _doc(pmid="p1", title="Title", abstract="First point. Second point."):
    from bioace.segmentation import segment_sentences

    return Document(
        pmid=pmid, title=title, abstract=abstract, sentences=segment_sentences(abstract)
    )


# -- label mappings ---------------------------------------------------------------


def test_mappings_are_total_functions():
    assert set(QUATERNARY_TO_TERNARY) == set(SCHEME_LABELS[QUATERNARY])
    assert set(QUATERNARY_TO_TERNARY.values()) <= set(SCHEME_LABELS[TERNARY])
    assert set(TERNARY_TO_BINARY) == set(SCHEME_LABELS[TERNARY])
    assert set(QUATERNARY_TO_BINARY) == set(SCHEME_LABELS[QUATERNARY])


def test_mapping_composition_is_consistent():
    for label in SCHEME_LABELS[QUATERNARY]:
        via_ternary = TERNARY_TO_BINARY[QUATERNARY_TO_TERNARY[label]]
        assert QUATERNARY_TO_BINARY[label] == via_ternary
    assert map_label("supports", QUATERNARY, TERNARY) == "support"
    assert map_label("support", TERNARY, BINARY) == "attributable"
    assert map_label("not relevant", QUATERNARY, TERNARY) == "neutral"


def test_gold_mapping():
    assert gold_to_scheme(CitationLabel.SUPPORTING, BINARY) == "attributable"
    for other in (
        CitationLabel.CONTRADICTING,
        CitationLabel.NEUTRAL,
        CitationLabel.NOT_RELEVANT,
    ):
        assert gold_to_scheme(other, BINARY) == "not attributable"
    assert gold_to_scheme(CitationLabel.NOT_RELEVANT, TERNARY) == "neutral"
    assert gold_to_scheme(CitationLabel.CONTRADICTING, QUATERNARY) == "contradicts"


# -- sentence-document judging ---------------------------------------------------


def test_judge_sentence_document_binary(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"generate": {"default": "attributable"}})
    label = judge_sentence_document(
        "claim", _doc(), BINARY, memory_gateway, _endpoint(path, "generate")
    )
    assert label == "attributable"


def test_judge_sentence_document_ternary_normalized(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"generate": {"default": "Neutral."}})
    label = judge_sentence_document(
        "claim", _doc(), TERNARY, memory_gateway, _endpoint(path, "generate")
    )
    assert label == "neutral"


def test_reference_text_is_title_space_abstract():
    doc = _doc(title="T", abstract="A. B.")
    assert reference_text(doc) == "T A. B."


def test_judge_prompt_carries_reference(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {
            "generate": {
                "rules": [
                    {"contains": "Reference: OVERRIDE", "response": "support"},
                    {"contains": "Reference:", "response": "neutral"},
                ]
            }
        }
    )
    ep = _endpoint(path, "generate")
    assert (
        judge_sentence_document("c", _doc(), TERNARY, memory_gateway, ep, reference="OVERRIDE")
        == "support"
    )
    assert judge_sentence_document("c", _doc(), TERNARY, memory_gateway, ep) == "neutral"


# -- maxSimSentence ------------------------------------------------------------------


def test_max_sim_sentence_argmax(write_gateway_fixture, memory_gateway):
    doc = _doc(abstract="Sent zero. Sent one. Sent two.")
    vectors = {
        "claim": [1.0, 0.0],
        "Sent zero.": [0.2, math.sqrt(1 - 0.04)],
        "Sent one.": [0.9, math.sqrt(1 - 0.81)],
        "Sent two.": [0.4, math.sqrt(1 - 0.16)],
    }
    path = write_gateway_fixture({"embed": {"vectors": vectors}})
    best = max_sim_sentence("claim", doc, memory_gateway, _endpoint(path, "embed"))
    assert best.sentence_index == 1
    assert best.text == "Sent one."
    assert best.similarity == pytest.approx(0.9, abs=1e-9)


def test_max_sim_sentence_tie_takes_smallest_index(write_gateway_fixture, memory_gateway):
    doc = _doc(abstract="Sent zero. Sent one.")
    vectors = {
        "claim": [1.0, 0.0],
        "Sent zero.": [0.7, math.sqrt(1 - 0.49)],
        "Sent one.": [0.7, math.sqrt(1 - 0.49)],
    }
    path = write_gateway_fixture({"embed": {"vectors": vectors}})
    best = max_sim_sentence("claim", doc, memory_gateway, _endpoint(path, "embed"))
    assert best.sentence_index == 0


def test_max_sim_single_sentence(write_gateway_fixture, memory_gateway):
    doc = _doc(abstract="Only sentence.")
    path = write_gateway_fixture({"embed": {"default": {"mode": "hash", "dim": 4}}})
    best = max_sim_sentence("claim", doc, memory_gateway, _endpoint(path, "embed"))
    assert best.sentence_index == 0


def test_max_sim_empty_document(memory_gateway, write_gateway_fixture):
    doc = Document(pmid="p", title="t", abstract="", sentences=[])
    path = write_gateway_fixture({"embed": {"default": {"mode": "hash", "dim": 4}}})
    with pytest.raises(EmptyDocument):
        max_sim_sentence("claim", doc, memory_gateway, _endpoint(path, "embed"))


# -- nugget-list judging ----------------------------------------------------------


def test_judge_nugget_lists(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"generate": {"default": "Supports"}})
    label = judge_nugget_lists(["a"], ["d"], memory_gateway, _endpoint(path, "generate"))
    assert label == "supports"


def test_judge_nugget_lists_not_relevant(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"generate": {"default": "not relevant"}})
    label = judge_nugget_lists(["a"], ["d"], memory_gateway, _endpoint(path, "generate"))
    assert label == "not relevant"


def test_judge_nugget_lists_empty(memory_gateway, write_gateway_fixture):
    path = write_gateway_fixture({"generate": {"default": "Supports"}})
    with pytest.raises(EmptyNuggetList):
        judge_nugget_lists([], ["d"], memory_gateway, _endpoint(path, "generate"))


# -- pair-label aggregation ---------------------------------------------------------


def aggregate_oracle(grid):
    """Truth-table restatement of the rubric, via explicit counting."""
    flat = [label for row in grid for label in row]
    n_contra = sum(1 for v in flat if v == "contradicts")
    if n_contra > 0:
        return "contradicts"
    rows_supported = sum(1 for row in grid if "supports" in row)
    if rows_supported == len(grid):
        return "supports"
    n_informative = sum(1 for v in flat if v in ("supports", "neutral"))
    if n_informative > 0:
        return "neutral"
    return "not relevant"


def test_aggregate_examples():
    assert aggregate_pair_labels([["supports", "neutral"], ["neutral", "supports"]]) == "supports"
    assert aggregate_pair_labels([["supports", "contradicts"]]) == "contradicts"
    assert aggregate_pair_labels([["not relevant", "not relevant"]]) == "not relevant"
    assert aggregate_pair_labels([["supports"], ["neutral"]]) == "neutral"


def test_aggregate_matches_truth_table_on_all_2x2_grids():
    labels = SCHEME_LABELS[QUATERNARY]
    count = 0
    for assignment in itertools.product(labels, repeat=4):
        grid = [list(assignment[:2]), list(assignment[2:])]
        assert aggregate_pair_labels(grid) == aggregate_oracle(grid)
        count += 1
    assert count == 256


def test_contradiction_dominates_on_random_grids():
    rng = random.Random(41)
    labels = SCHEME_LABELS[QUATERNARY]
    for _ in range(1000):
        rows = rng.randint(1, 5)
        cols = rng.randint(1, 5)
        grid = [[rng.choice(labels) for _ in range(cols)] for _ in range(rows)]
        expected = aggregate_oracle(grid)
        assert aggregate_pair_labels(grid) == expected
        if any("contradicts" in row for row in grid):
            assert expected == "contradicts"


def test_aggregate_rejects_empty_or_ragged():
    with pytest.raises(EmptyNuggetList):
        aggregate_pair_labels([])
    with pytest.raises(ValueError):
        aggregate_pair_labels([["supports"], ["supports", "neutral"]])


# -- score threshold fitting -----------------------------------------------------


def test_fit_threshold_worked_example():
    scores = [0.9, 0.8, 0.6, 0.4, 0.2]
    gold = [True, True, False, True, False]
    threshold, f1 = fit_score_threshold(scores, gold)
    assert threshold == pytest.approx(0.3)
    assert f1 == pytest.approx(6 / 7, abs=1e-9)


def test_fit_threshold_perfect_separation():
    threshold, f1 = fit_score_threshold([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
    assert f1 == 1.0
    assert 0.2 < threshold < 0.8


def test_fit_threshold_degenerate():
    with pytest.raises(DegenerateLabels):
        fit_score_threshold([0.1, 0.2], [True, True])


def fit_oracle(scores, gold):
    distinct = sorted(set(scores))
    candidates = (
        [float("-inf")]
        + [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
        + [float("inf")]
    )
    best = None
    for t in candidates:
        tp = sum(1 for s, g in zip(scores, gold) if g and s >= t)
        fp = sum(1 for s, g in zip(scores, gold) if not g and s >= t)
        fn = sum(gold) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        if best is None or f1 > best[1]:
            best = (t, f1)
    return best


def test_fit_threshold_matches_exhaustive_sweep():
    rng = random.Random(8)
    for _ in range(200):
        n = rng.randint(2, 40)
        scores = [round(rng.random(), 2) for _ in range(n)]
        gold = [rng.random() < 0.5 for _ in range(n)]
        if not (0 < sum(gold) < n):
            continue
        assert fit_score_threshold(scores, gold) == fit_oracle(scores, gold)


def test_fit_threshold_skews_low_on_majority_positive():
    rng = random.Random(55)
    import statistics

    for _ in range(30):
        n = 40
        gold = [rng.random() < 0.85 for _ in range(n)]
        if not (0 < sum(gold) < n):
            continue
        scores = [rng.random() for _ in range(n)]  # uninformative scores
        threshold, _ = fit_score_threshold(scores, gold)
        assert threshold <= statistics.median(scores)


# -- system citation metrics ---------------------------------------------------------


class _Sentence:
    def __init__(self, sid, citations):
        self.id = sid
        self.citations = citations


def test_system_metrics_declared_ratios():
    sentences = [
        _Sentence("s1", ["p1"]),
        _Sentence("s2", ["p2"]),
        _Sentence("s3", []),
    ]
    labels = {("s1", "p1"): "supports", ("s2", "p2"): "neutral"}
    metrics = system_citation_metrics(sentences, labels)
    assert metrics.citation_coverage == pytest.approx(1 / 3)
    assert metrics.citation_support_rate == pytest.approx(1 / 2)
    assert metrics.citation_contradict_rate == 0.0


def test_system_metrics_all_contradict():
    sentences = [_Sentence("s1", ["p1"]), _Sentence("s2", ["p2"])]
    labels = {("s1", "p1"): "contradicts", ("s2", "p2"): "contradict"}
    metrics = system_citation_metrics(sentences, labels)
    assert metrics.citation_coverage == 0.0
    assert metrics.citation_contradict_rate == 1.0


def test_system_metrics_no_citations():
    metrics = system_citation_metrics([_Sentence("s1", [])], {})
    assert metrics.citation_coverage == 0.0
    assert metrics.citation_support_rate == 0.0
    assert metrics.citation_contradict_rate == 0.0


def test_system_metrics_rates_sum_to_one():
    rng = random.Random(3)
    labels_pool = ["supports", "contradicts", "neutral", "not relevant"]
    sentences = []
    labels = {}
    for i in range(10):
        cites = [f"p{i}-{j}" for j in range(rng.randint(0, 4))]
        sentences.append(_Sentence(f"s{i}", cites))
        for pmid in cites:
            labels[(f"s{i}", pmid)] = rng.choice(labels_pool)
    metrics = system_citation_metrics(sentences, labels)
    if labels:
        total = (
            metrics.citation_support_rate
            + metrics.citation_contradict_rate
            + metrics.citation_neutral_rate
            + metrics.citation_not_relevant_rate
        )
        assert total == pytest.approx(1.0)
