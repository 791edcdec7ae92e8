"""End-to-end evaluation pipelines shared by the service and the test suite.

Each pipeline takes a loaded corpus plus a gateway and returns a results
dict following the reporting convention: ``{"kind", "summary": {system:
{metric: value}}, "curves": {...}?, "details": {...}}``. Iteration is always
in sorted key order so results are byte-reproducible.
"""

from __future__ import annotations

import numpy as np

from . import citations as cit
from . import completeness as comp
from . import correctness as corr
from .bgmm import BgmmConfig, fit_bgmm
from .config import GatewayConfig
from .corpus import CitationLabel, Corpus
from .errors import EmptyAnswer, MissingGold, TooFewSamples
from .nuggets import align_nuggets, build_similarity_matrix, extract_nuggets, score_prf
from .retrieval import Bm25Params, InvertedIndex, build_index
from .stats import ConfusionMatrix, per_class_prf, prf


def _mean(values) -> float:
    values = list(values)
    return float(np.mean(values)) if values else 0.0


def index_documents(corpus: Corpus) -> InvertedIndex:
    """BM25 index over title + abstract of every corpus document."""
    units = [
        (pmid, f"{doc.title} {doc.abstract}")
        for pmid, doc in sorted(corpus.documents.items())
    ]
    return build_index(units)


def eval_nuggets(
    corpus: Corpus,
    gateway,
    embed_endpoint,
    threshold: float | str = "auto",
    config: GatewayConfig | None = None,
    generate_endpoint=None,
    one_to_one: bool = False,
    bgmm_config: BgmmConfig = BgmmConfig(),
) -> dict:
    """Nugget precision/recall/F1 per (question, system) and per system.

    System nuggets come from the corpus when present; otherwise they are
    extracted from the joined answer text through the generation endpoint.
    ``threshold="auto"`` resolves the shipped per-model probability
    threshold for the embedding model.
    """
    config = config or GatewayConfig()
    if threshold == "auto":
        resolved_threshold = config.threshold_for(embed_endpoint.model_id)
    else:
        resolved_threshold = float(threshold)

    per_question: dict[str, dict] = {}
    per_system_scores: dict[str, list] = {}

    for (system_id, question_id) in sorted(corpus.runs):
        gold = [n.text for n in corpus.gold_nuggets(question_id)]
        if not gold:
            continue
        system = [n.text for n in corpus.system_nuggets(question_id, system_id)]
        if not system:
            answer_text = " ".join(
                s.text for s in corpus.runs[(system_id, question_id)]
            )
            if not answer_text.strip():
                continue
            if generate_endpoint is None:
                raise MissingGold(
                    f"no system nuggets for ({system_id}, {question_id}) and no "
                    "generation endpoint to extract them"
                )
            system = extract_nuggets(answer_text, gateway, generate_endpoint)

        matrix = build_similarity_matrix(system, gold, gateway, embed_endpoint)
        try:
            model = fit_bgmm(matrix.values.ravel(), bgmm_config)
        except TooFewSamples:
            model = None
        alignment = align_nuggets(
            matrix,
            model,
            resolved_threshold,
            raw_cosine_fallback=config.raw_cosine_fallback,
            one_to_one=one_to_one,
        )
        scores = score_prf(alignment, matrix.n_sys, matrix.n_gold)
        entry = {
            "precision": scores.precision,
            "recall": scores.recall,
            "f1": scores.f1,
            "n_system_nuggets": matrix.n_sys,
            "n_gold_nuggets": matrix.n_gold,
            "n_matched_pairs": len(alignment.matched_pairs),
            "fallback_used": alignment.fallback_used,
            "threshold_used": alignment.threshold_used,
        }
        per_question.setdefault(question_id, {})[system_id] = entry
        per_system_scores.setdefault(system_id, []).append(scores)

    if not per_system_scores:
        raise MissingGold(
            "no (system, question) pair had both gold nuggets and an answer"
        )

    summary = {
        system_id: {
            "nugget_precision": _mean(s.precision for s in scores),
            "nugget_recall": _mean(s.recall for s in scores),
            "nugget_f1": _mean(s.f1 for s in scores),
        }
        for system_id, scores in sorted(per_system_scores.items())
    }
    mean_overall = {
        "nugget_precision": _mean(v["nugget_precision"] for v in summary.values()),
        "nugget_recall": _mean(v["nugget_recall"] for v in summary.values()),
        "nugget_f1": _mean(v["nugget_f1"] for v in summary.values()),
    }
    # long-format per-question values for plotdata.csv (x-axis = question id)
    curves: dict[str, dict[str, dict[str, float]]] = {
        "nugget_precision": {}, "nugget_recall": {}, "nugget_f1": {},
    }
    for question_id, by_system in per_question.items():
        for system_id, entry in by_system.items():
            curves["nugget_precision"].setdefault(system_id, {})[question_id] = entry["precision"]
            curves["nugget_recall"].setdefault(system_id, {})[question_id] = entry["recall"]
            curves["nugget_f1"].setdefault(system_id, {})[question_id] = entry["f1"]
    return {
        "kind": "nuggets",
        "threshold": resolved_threshold,
        "embed_model": embed_endpoint.model_id,
        "summary": summary,
        "mean": mean_overall,
        "curves": curves,
        "details": {"per_question": per_question},
    }


def eval_completeness(corpus: Corpus, gateway, generate_endpoint) -> dict:
    """Label every sentence and aggregate completeness metrics per system."""
    labels = comp.label_run_sentences(corpus, gateway, generate_endpoint)
    if not labels:
        raise EmptyAnswer("corpus has no labelable answer sentences")

    per_system: dict[str, dict] = {}
    per_question: dict[str, dict] = {}
    for (system_id, question_id) in sorted(corpus.runs):
        sentence_labels = [
            labels[s.id] for s in corpus.runs[(system_id, question_id)] if s.id in labels
        ]
        if not sentence_labels:
            continue
        report = comp.compute_relevance_metrics(sentence_labels)
        per_question.setdefault(question_id, {})[system_id] = {
            "completeness": report.completeness,
            "redundancy": report.redundancy,
            "harmfulness": report.harmfulness,
            "counts": report.counts,
        }
        per_system.setdefault(system_id, []).append(report)

    summary = {
        system_id: {
            "completeness": _mean(r.completeness for r in reports),
            "redundancy": _mean(r.redundancy for r in reports),
            "harmfulness": _mean(r.harmfulness for r in reports),
        }
        for system_id, reports in sorted(per_system.items())
    }

    results = {
        "kind": "completeness",
        "summary": summary,
        "details": {
            "per_sentence": {sid: label.value for sid, label in sorted(labels.items())},
            "per_question": per_question,
        },
    }

    gold = {
        s.id: s.gold_relevance
        for sents in corpus.runs.values()
        for s in sents
        if s.gold_relevance is not None and s.id in labels
    }
    if gold:
        predicted = {sid: labels[sid] for sid in gold}
        results["vs_gold"] = comp.evaluate_labels_vs_gold(predicted, gold)
    return results


def make_judge(kind: str, gateway, config: GatewayConfig, threshold: float = 0.75):
    """Fragment-level judge factory: gen, nli (p_support cutoff), or cosine."""
    if kind == "gen":
        return corr.GenerationJudge(gateway, config.endpoint_for("generate"))
    if kind == "nli":
        return corr.NliJudge(gateway, config.endpoint_for("nli"), threshold=threshold)
    if kind == "cosine":
        return corr.CosineJudge(gateway, config.endpoint_for("embed"), threshold=threshold)
    raise ValueError(f"unknown judge kind: {kind!r}")


def eval_correctness_classify(
    corpus: Corpus,
    gateway,
    judge,
    window: int = 3,
    stride: int = 1,
    supporting_only: bool = False,
    short_circuit: bool = True,
) -> dict:
    """Fragment-classification correctness over each sentence's documents.

    ``supporting_only`` restricts judging to documents the experts labeled
    supporting instead of everything the sentence cites.
    """
    verdicts: dict[str, dict] = {}
    per_system: dict[str, list] = {}
    per_question: dict[str, dict] = {}
    for (system_id, question_id) in sorted(corpus.runs):
        indicators = []
        for sentence in corpus.runs[(system_id, question_id)]:
            pmids = (
                sentence.gold_supporting_docs if supporting_only else sentence.citations
            )
            docs = [corpus.documents[p] for p in pmids if p in corpus.documents]
            if not docs:
                verdict = corr.CorrectnessVerdict(sentence.id, "incorrect", None)
            else:
                verdict = corr.judge_sentence(
                    sentence,
                    docs,
                    judge,
                    window=window,
                    stride=stride,
                    short_circuit=short_circuit,
                )
            verdicts[sentence.id] = {
                "verdict": verdict.verdict,
                "deciding_fragment": list(verdict.deciding_fragment)
                if verdict.deciding_fragment
                else None,
            }
            indicators.append(1.0 if verdict.verdict == "correct" else 0.0)
        if indicators:
            value = _mean(indicators)
            per_question.setdefault(question_id, {})[system_id] = value
            per_system.setdefault(system_id, []).append(value)

    summary = {
        system_id: {"correctness": _mean(values)}
        for system_id, values in sorted(per_system.items())
    }
    return {
        "kind": "correctness-classify",
        "summary": summary,
        "details": {"per_sentence": verdicts, "per_question": per_question},
    }


def eval_correctness_simnli(
    corpus: Corpus,
    gateway,
    embed_endpoint,
    nli_endpoint,
    seed: int = 13,
    window: int = 3,
    stride: int = 1,
    swap_negative: bool = False,
) -> dict:
    report = corr.run_sim_nli_analysis(
        corpus,
        gateway,
        embed_endpoint,
        nli_endpoint,
        seed=seed,
        window=window,
        stride=stride,
        swap_negative=swap_negative,
    )
    summary = {
        variant: {
            metric: value
            for metric, value in report[variant]["overall"].items()
            if metric != "n_questions"
        }
        for variant in sorted(report)
    }
    return {
        "kind": "correctness-simnli",
        "seed": seed,
        "summary": summary,
        "details": report,
    }


def eval_correctness_topk(
    corpus: Corpus,
    gateway,
    rerank_endpoint,
    judge,
    index: InvertedIndex | None = None,
    k_list=(10, 20, 30, 40, 50, 60, 70, 80, 90, 100),
    retrieve_k: int = 1000,
    window: int = 3,
    stride: int = 1,
) -> dict:
    """Correctness at top-k over BM25-retrieved, gateway-reranked documents."""
    if index is None:
        index = index_documents(corpus)
    curves: dict[str, dict[str, dict[int, float]]] = {"correctness_at_k": {}}
    per_question: dict[str, dict] = {}
    per_system: dict[str, dict[int, list]] = {}
    for (system_id, question_id) in sorted(corpus.runs):
        question = corpus.questions[question_id]
        sentences = corpus.runs[(system_id, question_id)]
        if not sentences:
            continue
        at_k = corr.correctness_at_k(
            question,
            sentences,
            index,
            corpus.documents,
            gateway,
            rerank_endpoint,
            judge,
            k_list=k_list,
            retrieve_k=retrieve_k,
            window=window,
            stride=stride,
        )
        per_question.setdefault(question_id, {})[system_id] = at_k
        bucket = per_system.setdefault(system_id, {k: [] for k in at_k})
        for k, v in at_k.items():
            bucket[k].append(v)

    summary = {}
    for system_id, bucket in sorted(per_system.items()):
        curve = {int(k): _mean(vs) for k, vs in sorted(bucket.items())}
        curves["correctness_at_k"][system_id] = curve
        summary[system_id] = {"correctness_at_max_k": curve[max(curve)]}
    return {
        "kind": "correctness-topk",
        "summary": summary,
        "curves": curves,
        "details": {"per_question": per_question},
    }


def _nuggets_for_text(cache: dict, key: str, text: str, gateway, endpoint) -> list[str]:
    if key not in cache:
        cache[key] = extract_nuggets(text, gateway, endpoint)
    return cache[key]


def eval_citations(
    corpus: Corpus,
    gateway,
    setting: str,
    scheme: str,
    config: GatewayConfig,
    judge: str = "gen",
    score_threshold: float | None = None,
    fit_train=None,
    lenient_supports: bool = False,
) -> dict:
    """Judge every (sentence, citation) pair and score against expert labels.

    ``setting``: doc (title+abstract), maxsim (most similar document
    sentence), or nuggets (nugget-list comparison, quaternary labels).
    ``judge``: gen (constrained generation), score (pairwise scorer plus a
    threshold, optionally fitted on ``fit_train``), or pairwise-oracle
    (per-nugget-pair generation aggregated by the deterministic rubric;
    nuggets setting only). ``lenient_supports`` aggregates with
    one-supported-answer-nugget semantics instead of all-supported.
    """
    if setting not in ("doc", "maxsim", "nuggets"):
        raise ValueError(f"unknown setting: {setting!r}")
    effective_scheme = cit.QUATERNARY if setting == "nuggets" else scheme
    if setting != "nuggets" and scheme not in (cit.BINARY, cit.TERNARY):
        raise ValueError(f"setting {setting!r} supports binary/ternary, not {scheme!r}")

    fitted = None
    if judge == "score":
        if fit_train is not None:
            train_scores = [row["score"] for row in fit_train]
            train_gold = [row["gold"] for row in fit_train]
            fitted = cit.fit_score_threshold(train_scores, train_gold)
            score_threshold = fitted[0]
        if score_threshold is None:
            raise ValueError("score judge needs score_threshold or fit_train")

    nugget_cache: dict[str, list[str]] = {}
    predicted: dict[tuple[str, str], str] = {}
    raw_scores: dict[tuple[str, str], float] = {}

    for (system_id, question_id) in sorted(corpus.runs):
        for sentence in corpus.runs[(system_id, question_id)]:
            for pmid in sentence.citations:
                doc = corpus.documents[pmid]
                pair = (sentence.id, pmid)
                if setting == "nuggets":
                    generate_endpoint = config.endpoint_for("generate")
                    answer_nuggets = _nuggets_for_text(
                        nugget_cache, f"s:{sentence.id}", sentence.text,
                        gateway, generate_endpoint,
                    )
                    doc_nuggets = _nuggets_for_text(
                        nugget_cache, f"d:{pmid}", cit.reference_text(doc),
                        gateway, generate_endpoint,
                    )
                    if judge == "pairwise-oracle":
                        grid = [
                            [
                                cit.judge_nugget_lists([a], [d], gateway, generate_endpoint)
                                for d in doc_nuggets
                            ]
                            for a in answer_nuggets
                        ]
                        if lenient_supports:
                            label = _aggregate_lenient(grid)
                        else:
                            label = cit.aggregate_pair_labels(grid)
                    else:
                        label = cit.judge_nugget_lists(
                            answer_nuggets, doc_nuggets, gateway, generate_endpoint
                        )
                elif judge == "score":
                    reference = (
                        cit.max_sim_sentence(
                            sentence.text, doc, gateway, config.endpoint_for("embed")
                        ).text
                        if setting == "maxsim"
                        else cit.reference_text(doc)
                    )
                    value = gateway.score_pair(
                        sentence.text, reference, config.endpoint_for("score")
                    )
                    raw_scores[pair] = value
                    label = (
                        "attributable" if value >= score_threshold else "not attributable"
                    )
                else:
                    reference = None
                    if setting == "maxsim":
                        reference = cit.max_sim_sentence(
                            sentence.text, doc, gateway, config.endpoint_for("embed")
                        ).text
                    label = cit.judge_sentence_document(
                        sentence.text, doc, effective_scheme, gateway,
                        config.endpoint_for("generate"), reference=reference,
                    )
                predicted[pair] = label

    # Score against expert judgments where available.
    eval_scheme = cit.BINARY if judge == "score" else effective_scheme
    gold_pairs = {
        (j.sentence_id, j.pmid): j.label
        for j in corpus.judgments
        if (j.sentence_id, j.pmid) in predicted
    }
    vs_gold = None
    if gold_pairs:
        keys = sorted(gold_pairs)
        gold_labels = [gold_to_scheme(gold_pairs[k], eval_scheme) for k in keys]
        predicted_labels = [
            cit.map_label(predicted[k], effective_scheme, eval_scheme) for k in keys
        ]
        matrix = ConfusionMatrix.from_pairs(
            gold_labels, predicted_labels, classes=list(cit.SCHEME_LABELS[eval_scheme])
        )
        macro = prf(matrix, "macro")
        weighted = prf(matrix, "weighted")
        vs_gold = {
            "scheme": eval_scheme,
            "macro": {"precision": macro[0], "recall": macro[1], "f1": macro[2]},
            "weighted": {
                "precision": weighted[0],
                "recall": weighted[1],
                "f1": weighted[2],
            },
            "per_class": per_class_prf(matrix),
            "confusion": {"classes": matrix.classes, "counts": matrix.counts.tolist()},
        }

    summary = {}
    for system_id in corpus.system_ids():
        sentences = [
            s
            for (sys_id, qid) in sorted(corpus.runs)
            if sys_id == system_id
            for s in corpus.runs[(sys_id, qid)]
        ]
        metrics = cit.system_citation_metrics(
            sentences, {k: v for k, v in predicted.items()}
        )
        summary[system_id] = metrics.as_dict()

    results = {
        "kind": f"citations-{setting}-{eval_scheme}",
        "setting": setting,
        "scheme": eval_scheme,
        "judge": judge,
        "summary": summary,
        "details": {
            "per_pair": {f"{sid}/{pmid}": label for (sid, pmid), label in sorted(predicted.items())},
        },
    }
    if raw_scores:
        results["details"]["scores"] = {
            f"{sid}/{pmid}": value for (sid, pmid), value in sorted(raw_scores.items())
        }
    if fitted is not None:
        results["fitted_threshold"] = {"threshold": fitted[0], "f1": fitted[1]}
    elif judge == "score":
        results["score_threshold"] = score_threshold
    if vs_gold is not None:
        results["vs_gold"] = vs_gold
    return results


def _aggregate_lenient(grid) -> str:
    """Prose-rule variant: one supported answer nugget suffices for supports."""
    labels = [label for row in grid for label in row]
    if any(label == "contradicts" for label in labels):
        return "contradicts"
    if any(label == "supports" for label in labels):
        return "supports"
    if any(label == "neutral" for label in labels):
        return "neutral"
    return "not relevant"


def gold_to_scheme(label: CitationLabel, scheme: str) -> str:
    return cit.gold_to_scheme(label, scheme)


def prep_training_pairs(
    corpus: Corpus,
    window: int = 3,
    stride: int = 1,
    params: Bm25Params = Bm25Params(),
):
    """Build classifier training pairs from annotated spans + BM25 negatives."""
    docs = [corpus.documents[p] for p in sorted(corpus.documents)]
    if not docs:
        raise MissingGold("training pairs need documents with annotated spans")
    index, fragments = corr.build_fragment_index(docs, window=window, stride=stride)
    return corr.build_training_pairs(corpus, index, fragments, params=params)
