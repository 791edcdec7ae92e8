import json

import pytest

from bioace.corpus import (
    AnswerSentence,
    CitationLabel,
    Corpus,
    Nugget,
    Question,
    RelevanceLabel,
    load_corpus,
    save_corpus,
    validate_corpus,
)
from bioace.errors import DanglingReference, DuplicateId, MalformedRecord


def test_load_fixture_corpus(corpus):
    assert len(corpus.questions) == 3
    assert len(corpus.documents) == 6
    assert len(corpus.runs) == 6
    assert {sys for sys, _ in corpus.runs} == {"M1", "M2"}
    # all citations resolve
    for sents in corpus.runs.values():
        for s in sents:
            for pmid in s.citations:
                assert pmid in corpus.documents


def test_documents_are_segmented(corpus):
    doc = corpus.documents["d2"]
    assert len(doc.sentences) == 4
    assert doc.sentences[1] == "Viruses depend on iron to replicate within host cells."


def test_gold_annotations_attach_to_sentences(corpus):
    by_id = corpus.sentences_by_id()
    assert by_id["M1-q1-0"].gold_supporting_docs == ["d1"]
    assert by_id["M1-q1-0"].gold_relevance is RelevanceLabel.REQUIRED
    assert by_id["M2-q3-1"].gold_supporting_docs == []
    span = by_id["M1-q1-1"].gold_evidence[0]
    assert (span.pmid, span.start_sentence, span.end_sentence) == ("d2", 1, 2)


def test_validate_fixture_is_clean(corpus):
    assert validate_corpus(corpus) == []


def test_round_trip_identity(corpus, tmp_path):
    save_corpus(corpus, tmp_path / "copy")
    reloaded = load_corpus(tmp_path / "copy")
    assert reloaded.questions == corpus.questions
    assert reloaded.documents == corpus.documents
    assert reloaded.runs == corpus.runs
    assert reloaded.nuggets == corpus.nuggets
    assert reloaded.judgments == corpus.judgments


def test_extra_fields_survive_round_trip(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "questions.jsonl").write_text(
        json.dumps({"id": "q1", "text": "What?", "topic": "iron"}) + "\n"
    )
    corpus = load_corpus(src)
    assert corpus.questions["q1"].extra == {"topic": "iron"}
    save_corpus(corpus, tmp_path / "dst")
    again = load_corpus(tmp_path / "dst")
    assert again.questions["q1"].extra == {"topic": "iron"}


def test_dangling_citation_names_the_pmid(tmp_path, corpus_dir):
    run = {
        "system_id": "M9",
        "question_id": "q1",
        "sentences": [
            {"id": "x0", "position": 0, "text": "t", "citations": ["d404"]}
        ],
    }
    bad = tmp_path / "runs.jsonl"
    bad.write_text(json.dumps(run) + "\n")
    with pytest.raises(DanglingReference, match="d404"):
        load_corpus(
            questions=corpus_dir / "questions.jsonl",
            documents=corpus_dir / "documents.jsonl",
            runs=bad,
        )


def test_bad_judgment_label_is_malformed(tmp_path, corpus_dir):
    bad = tmp_path / "judgments.jsonl"
    bad.write_text(json.dumps({"sentence_id": "M1-q1-0", "pmid": "d1", "label": "maybe"}) + "\n")
    with pytest.raises(MalformedRecord, match="maybe"):
        load_corpus(
            questions=corpus_dir / "questions.jsonl",
            documents=corpus_dir / "documents.jsonl",
            runs=corpus_dir / "runs.jsonl",
            judgments=bad,
        )


def test_malformed_record_carries_line_and_field(tmp_path):
    bad = tmp_path / "questions.jsonl"
    bad.write_text('{"id": "q1", "text": "ok"}\n{"id": "q2"}\n')
    with pytest.raises(MalformedRecord) as err:
        load_corpus(questions=bad)
    assert err.value.line == 2
    assert err.value.field == "text"


def test_duplicate_question_id(tmp_path):
    bad = tmp_path / "questions.jsonl"
    bad.write_text('{"id": "q1", "text": "a"}\n{"id": "q1", "text": "b"}\n')
    with pytest.raises(DuplicateId):
        load_corpus(questions=bad)


def test_system_nugget_without_system_id_is_malformed(tmp_path):
    bad = tmp_path / "nuggets.jsonl"
    bad.write_text(json.dumps({"question_id": "q1", "origin": "system", "text": "n"}) + "\n")
    with pytest.raises(MalformedRecord, match="system_id"):
        load_corpus(nuggets=bad)


def test_validate_reports_missing_system_ids():
    corpus = Corpus(questions={"q1": Question(id="q1", text="t")})
    corpus.nuggets = [
        Nugget(text="a", origin="system", question_id="q1", system_id=None),
        Nugget(text="b", origin="system", question_id="q1", system_id=None),
    ]
    violations = validate_corpus(corpus)
    assert sum(v.code == "system_nugget_missing_system_id" for v in violations) == 2


def test_validate_reports_non_contiguous_positions():
    corpus = Corpus(questions={"q1": Question(id="q1", text="t")})
    corpus.runs[("M1", "q1")] = [
        AnswerSentence(id="a", question_id="q1", system_id="M1", position=0, text="x"),
        AnswerSentence(id="b", question_id="q1", system_id="M1", position=2, text="y"),
    ]
    violations = validate_corpus(corpus)
    assert sum(v.code == "non_contiguous_positions" for v in violations) == 1


def test_validate_reports_duplicate_gold_nuggets():
    corpus = Corpus(questions={"q1": Question(id="q1", text="t")})
    corpus.nuggets = [
        Nugget(text="Iron is stored by ferritin.", origin="gold", question_id="q1"),
        Nugget(text="Iron is stored by  ferritin.", origin="gold", question_id="q1"),
    ]
    violations = validate_corpus(corpus)
    assert sum(v.code == "duplicate_gold_nugget" for v in violations) == 1


def test_relevance_parse_is_case_insensitive():
    assert RelevanceLabel.parse("  required \n") is RelevanceLabel.REQUIRED
    assert CitationLabel.parse("Not Relevant") is CitationLabel.NOT_RELEVANT
    with pytest.raises(ValueError):
        RelevanceLabel.parse("mandatory")


def test_missing_file_override_raises(tmp_path):
    with pytest.raises(MalformedRecord, match="no such file"):
        load_corpus(questions=tmp_path / "nope.jsonl")
