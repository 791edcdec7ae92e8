"""Answer-sentence correctness: fragment judging, training pairs, and the
similarity/NLI analysis, plus correctness over top-k retrieved documents.

Documents are split into overlapping short fragments (window 3, stride 1 by
default; stride = window available where non-overlapping windows are
wanted). A sentence is judged correct when any fragment of any candidate
document is judged correct; the deciding fragment is the first such in
(document order, fragment order), so lazy short-circuiting cannot change
either the verdict or the deciding fragment.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document
from .errors import (
    EmptyInput,
    InsufficientQuestions,
    MissingGold,
    NoNegativeAvailable,
)
from .nuggets import cosine
from .prompts import CORRECTNESS_FRAGMENT, CORRECTNESS_LABELS
from .retrieval import Bm25Params, InvertedIndex, bm25_top_k, build_index
from .stats import auc


@dataclass(frozen=True)
class DocumentFragment:
    pmid: str
    start_sentence: int
    sentences: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.sentences)

    @property
    def indices(self) -> range:
        return range(self.start_sentence, self.start_sentence + len(self.sentences))


def fragment_document(doc: Document, window: int = 3, stride: int = 1) -> list[DocumentFragment]:
    """Fragments at starts 0, stride, 2*stride, ... while start < #sentences.

    Each fragment takes min(window, remaining) sentences; a document shorter
    than the window yields exactly one whole-document fragment.
    """
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    n = len(doc.sentences)
    if n == 0:
        return []
    if n < window:
        return [DocumentFragment(doc.pmid, 0, tuple(doc.sentences))]
    fragments = []
    start = 0
    while start < n:
        fragments.append(
            DocumentFragment(doc.pmid, start, tuple(doc.sentences[start : start + window]))
        )
        start += stride
    return fragments


@dataclass(frozen=True)
class CorrectnessVerdict:
    sentence_id: str
    verdict: str  # "correct" | "incorrect"
    deciding_fragment: tuple[str, int] | None = None


class GenerationJudge:
    """Fragment judge backed by a constrained-label generation endpoint."""

    def __init__(self, gateway, endpoint):
        self.gateway = gateway
        self.endpoint = endpoint

    def __call__(self, sentence_text: str, fragment_text: str) -> bool:
        prompt = CORRECTNESS_FRAGMENT.format(sentence=sentence_text, fragment=fragment_text)
        label = self.gateway.generate_label(prompt, CORRECTNESS_LABELS, self.endpoint)
        return label == "correct"


class NliJudge:
    """Fragment judge: NLI support probability at or above a threshold."""

    def __init__(self, gateway, endpoint, threshold: float = 0.75):
        self.gateway = gateway
        self.endpoint = endpoint
        self.threshold = threshold

    def __call__(self, sentence_text: str, fragment_text: str) -> bool:
        result = self.gateway.nli(fragment_text, sentence_text, self.endpoint)
        return result.p_support >= self.threshold


class CosineJudge:
    """Fragment judge: embedding cosine similarity at or above a threshold."""

    def __init__(self, gateway, endpoint, threshold: float = 0.75):
        self.gateway = gateway
        self.endpoint = endpoint
        self.threshold = threshold

    def __call__(self, sentence_text: str, fragment_text: str) -> bool:
        u, v = self.gateway.embed_batch([sentence_text, fragment_text], self.endpoint)
        return cosine(u, v) >= self.threshold


def judge_sentence(
    sentence,
    docs,
    judge,
    window: int = 3,
    stride: int = 1,
    short_circuit: bool = True,
) -> CorrectnessVerdict:
    """Correct iff any fragment of any document is judged correct."""
    docs = list(docs)
    if not docs:
        raise EmptyInput("judge_sentence needs at least one document")
    deciding = None
    for doc in docs:
        for fragment in fragment_document(doc, window=window, stride=stride):
            if judge(sentence.text, fragment.text):
                if deciding is None:
                    deciding = (fragment.pmid, fragment.start_sentence)
                if short_circuit:
                    return CorrectnessVerdict(sentence.id, "correct", deciding)
    if deciding is not None:
        return CorrectnessVerdict(sentence.id, "correct", deciding)
    return CorrectnessVerdict(sentence.id, "incorrect", None)


@dataclass(frozen=True)
class TrainingPair:
    sentence_id: str
    sentence_text: str
    fragment_text: str
    label: str  # "correct" | "incorrect"
    provenance: str  # "annotated_span" | "bm25_negative"
    pmid: str
    start_sentence: int


def fragment_ref(pmid: str, start: int) -> str:
    return f"{pmid}#{start:04d}"


def build_fragment_index(
    documents, window: int = 3, stride: int = 1
) -> tuple[InvertedIndex, dict[str, DocumentFragment]]:
    """Index every fragment of every document; refs are ``pmid#start``."""
    fragments: dict[str, DocumentFragment] = {}
    units = []
    for doc in documents:
        for fragment in fragment_document(doc, window=window, stride=stride):
            ref = fragment_ref(fragment.pmid, fragment.start_sentence)
            fragments[ref] = fragment
            units.append((ref, fragment.text))
    return build_index(units), fragments


def build_training_pairs(
    corpus: Corpus,
    index: InvertedIndex,
    fragments: dict[str, DocumentFragment],
    params: Bm25Params = Bm25Params(),
) -> list[TrainingPair]:
    """One positive per annotated span; one BM25-mined negative per sentence.

    The negative is the top-BM25 fragment for the question, skipping any
    fragment that shares a sentence index with one of the sentence's
    annotated spans in the same document.
    """
    pairs: list[TrainingPair] = []
    for (system_id, question_id) in sorted(corpus.runs):
        question = corpus.questions.get(question_id)
        for sentence in corpus.runs[(system_id, question_id)]:
            if not sentence.gold_evidence:
                continue
            span_indices: dict[str, set[int]] = {}
            for span in sentence.gold_evidence:
                doc = corpus.documents[span.pmid]
                text = " ".join(doc.sentences[span.start_sentence : span.end_sentence + 1])
                pairs.append(
                    TrainingPair(
                        sentence_id=sentence.id,
                        sentence_text=sentence.text,
                        fragment_text=text,
                        label="correct",
                        provenance="annotated_span",
                        pmid=span.pmid,
                        start_sentence=span.start_sentence,
                    )
                )
                span_indices.setdefault(span.pmid, set()).update(
                    range(span.start_sentence, span.end_sentence + 1)
                )

            query = question.text if question is not None else sentence.text
            ranked = bm25_top_k(query, index, params, k=index.doc_count)
            negative = None
            for ref, _score in ranked:
                fragment = fragments[ref]
                overlap = span_indices.get(fragment.pmid)
                if overlap and overlap.intersection(fragment.indices):
                    continue
                negative = fragment
                break
            if negative is None:
                raise NoNegativeAvailable(
                    f"every fragment overlaps an annotated span for sentence {sentence.id}"
                )
            pairs.append(
                TrainingPair(
                    sentence_id=sentence.id,
                    sentence_text=sentence.text,
                    fragment_text=negative.text,
                    label="incorrect",
                    provenance="bm25_negative",
                    pmid=negative.pmid,
                    start_sentence=negative.start_sentence,
                )
            )
    return pairs


def _max_scores(sentence_text, texts, gateway, embed_endpoint, nli_endpoint):
    """Max cosine and max NLI support of ``sentence_text`` against ``texts``."""
    best_sim = None
    best_nli = None
    if texts:
        vectors = gateway.embed_batch([sentence_text] + texts, embed_endpoint)
        sent_vec = vectors[0]
        best_sim = max(cosine(sent_vec, v) for v in vectors[1:])
        best_nli = max(
            gateway.nli(text, sentence_text, nli_endpoint).p_support for text in texts
        )
    return best_sim, best_nli


def run_sim_nli_analysis(
    corpus: Corpus,
    gateway,
    embed_endpoint,
    nli_endpoint,
    seed: int = 13,
    window: int = 3,
    stride: int = 1,
    swap_negative: bool = False,
) -> dict:
    """Positive-vs-negative score analysis of cosine and NLI judges.

    For each annotated answer sentence the positive score is the max over
    window-grouped fragments of its gold supporting documents (the evidence
    variant uses the annotated spans verbatim). The negative repeats the
    computation against the supporting documents of the first annotated
    sentence of a uniformly sampled different question (seeded). With
    ``swap_negative`` the sampled sentence's text is scored against the
    original documents instead.
    """
    rows = []
    for question_id in sorted(corpus.questions):
        sentences = []
        for (system_id, qid) in sorted(corpus.runs):
            if qid != question_id:
                continue
            for sentence in corpus.runs[(system_id, qid)]:
                if sentence.gold_supporting_docs and sentence.gold_evidence:
                    sentences.append(sentence)
        if sentences:
            rows.append((question_id, sentences))
    if not rows:
        raise MissingGold(
            "no sentence carries both gold supporting documents and evidence spans"
        )
    if len(rows) < 2:
        raise InsufficientQuestions("negative sampling needs at least two questions")

    def doc_fragment_texts(sentence) -> list[str]:
        texts = []
        for pmid in sorted(set(sentence.gold_supporting_docs)):
            doc = corpus.documents[pmid]
            texts.extend(
                f.text for f in fragment_document(doc, window=window, stride=stride)
            )
        return texts

    def evidence_texts(sentence) -> list[str]:
        texts = []
        for span in sentence.gold_evidence:
            doc = corpus.documents[span.pmid]
            texts.append(" ".join(doc.sentences[span.start_sentence : span.end_sentence + 1]))
        return texts

    rng = random.Random(seed)
    variants = {
        name: {qid: {"sim_pos": [], "sim_neg": [], "nli_pos": [], "nli_neg": []} for qid, _ in rows}
        for name in ("document", "evidence")
    }

    for i, (question_id, sentences) in enumerate(rows):
        for sentence in sentences:
            other_index = rng.choice([j for j in range(len(rows)) if j != i])
            other_sentence = rows[other_index][1][0]

            for name, texts_of in (
                ("document", doc_fragment_texts),
                ("evidence", evidence_texts),
            ):
                pos_sim, pos_nli = _max_scores(
                    sentence.text, texts_of(sentence), gateway, embed_endpoint, nli_endpoint
                )
                if swap_negative:
                    neg_sim, neg_nli = _max_scores(
                        other_sentence.text, texts_of(sentence), gateway, embed_endpoint, nli_endpoint
                    )
                else:
                    neg_sim, neg_nli = _max_scores(
                        sentence.text, texts_of(other_sentence), gateway, embed_endpoint, nli_endpoint
                    )
                bucket = variants[name][question_id]
                bucket["sim_pos"].append(pos_sim)
                bucket["sim_neg"].append(neg_sim)
                bucket["nli_pos"].append(pos_nli)
                bucket["nli_neg"].append(neg_nli)

    def summarize(bucket) -> dict:
        out = {}
        for key in ("sim_pos", "sim_neg", "nli_pos", "nli_neg"):
            values = bucket[key]
            out[f"avg_{key}"] = float(np.mean(values)) if values else 0.0
        for kind in ("sim", "nli"):
            pos = bucket[f"{kind}_pos"]
            neg = bucket[f"{kind}_neg"]
            paired = [(p, q) for p, q in zip(pos, neg)]
            out[f"accuracy_{kind}"] = (
                sum(1 for p, q in paired if p > q) / len(paired) if paired else 0.0
            )
            out[f"auc_{kind}"] = auc(pos, neg) if pos and neg else 0.0
        out["n_sentences"] = len(bucket["sim_pos"])
        return out

    report = {}
    for name, per_question in variants.items():
        question_stats = {
            qid: summarize(bucket) for qid, bucket in sorted(per_question.items())
        }
        metric_names = [
            "avg_sim_pos", "avg_sim_neg", "avg_nli_pos", "avg_nli_neg",
            "accuracy_sim", "accuracy_nli", "auc_sim", "auc_nli",
        ]
        overall = {
            metric: float(np.mean([qs[metric] for qs in question_stats.values()]))
            for metric in metric_names
        }
        overall["n_questions"] = len(question_stats)
        report[name] = {"per_question": question_stats, "overall": overall}
    return report


def correctness_at_k(
    question,
    sentences,
    index: InvertedIndex,
    documents: dict[str, Document],
    gateway,
    rerank_endpoint,
    judge,
    k_list=(10, 20, 30, 40, 50, 60, 70, 80, 90, 100),
    retrieve_k: int = 1000,
    params: Bm25Params = Bm25Params(),
    window: int = 3,
    stride: int = 1,
) -> dict[int, float]:
    """Fraction of the question's sentences judged correct within the top-k.

    Retrieves ``retrieve_k`` documents by BM25, reranks them through the
    gateway, then for each k truncates the ranking and judges each sentence
    against those documents. Computed via each sentence's minimal satisfying
    rank, which is exactly equivalent to judging per k.
    """
    sentences = list(sentences)
    if not sentences:
        raise EmptyInput("correctness_at_k needs at least one answer sentence")
    ranked = bm25_top_k(question.text, index, params, k=retrieve_k)
    candidates = [(ref, f"{documents[ref].title} {documents[ref].abstract}") for ref, _ in ranked]
    reranked = gateway.rerank(question.text, candidates, rerank_endpoint)
    k_max = min(max(k_list), len(reranked))
    top_docs = [documents[ref] for ref, _ in reranked[:k_max]]

    minimal_rank: dict[str, int | None] = {}
    for sentence in sentences:
        found = None
        for rank, doc in enumerate(top_docs, start=1):
            verdict = judge_sentence(
                sentence, [doc], judge, window=window, stride=stride
            )
            if verdict.verdict == "correct":
                found = rank
                break
        minimal_rank[sentence.id] = found

    out = {}
    for k in k_list:
        correct = sum(
            1
            for sentence in sentences
            if minimal_rank[sentence.id] is not None and minimal_rank[sentence.id] <= k
        )
        out[int(k)] = correct / len(sentences)
    return out
