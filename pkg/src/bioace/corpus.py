"""Canonical data model, JSONL ingestion, validation, and persistence.

A corpus is a directory of JSONL files (one UTF-8 JSON object per line):

* ``questions.jsonl``  -- ``{"id", "text"}``
* ``documents.jsonl``  -- ``{"pmid", "title", "abstract"}``
* ``runs.jsonl``       -- ``{"system_id", "question_id", "sentences": [...]}``
* ``nuggets.jsonl``    -- ``{"question_id", "origin", "system_id"?, "text"}``
* ``judgments.jsonl``  -- citation labels, relevance labels, and evidence spans

Unknown fields are preserved on round-trip but otherwise ignored. The loaded
corpus is immutable by convention and safe for concurrent reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DanglingReference, DuplicateId, MalformedRecord
from .segmentation import segment_sentences

FILE_NAMES = {
    "questions": "questions.jsonl",
    "documents": "documents.jsonl",
    "runs": "runs.jsonl",
    "nuggets": "nuggets.jsonl",
    "judgments": "judgments.jsonl",
}


class RelevanceLabel(str, Enum):
    REQUIRED = "Required"
    UNNECESSARY = "Unnecessary"
    BORDERLINE = "Borderline"
    INAPPROPRIATE = "Inappropriate"

    @classmethod
    def parse(cls, raw: str) -> "RelevanceLabel":
        """Case-insensitive parse; surrounding whitespace ignored."""
        key = str(raw).strip().casefold()
        for member in cls:
            if member.value.casefold() == key:
                return member
        raise ValueError(f"unknown relevance label: {raw!r}")


class CitationLabel(str, Enum):
    SUPPORTING = "supporting"
    CONTRADICTING = "contradicting"
    NEUTRAL = "neutral"
    NOT_RELEVANT = "not_relevant"

    @classmethod
    def parse(cls, raw: str) -> "CitationLabel":
        key = str(raw).strip().casefold().replace(" ", "_")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown citation label: {raw!r}")


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    extra: dict = field(default_factory=dict, compare=False)


@dataclass
class Document:
    pmid: str
    title: str
    abstract: str
    sentences: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class EvidenceSpan:
    pmid: str
    start_sentence: int
    end_sentence: int


@dataclass
class AnswerSentence:
    id: str
    question_id: str
    system_id: str
    position: int
    text: str
    citations: list[str] = field(default_factory=list)
    gold_relevance: RelevanceLabel | None = None
    gold_supporting_docs: list[str] = field(default_factory=list)
    gold_evidence: list[EvidenceSpan] = field(default_factory=list)
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Nugget:
    text: str
    origin: str  # "gold" | "system"
    question_id: str
    system_id: str | None = None
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class CitationJudgment:
    sentence_id: str
    pmid: str
    label: CitationLabel


@dataclass(frozen=True)
class Violation:
    code: str
    record_id: str
    message: str


@dataclass
class Corpus:
    questions: dict[str, Question] = field(default_factory=dict)
    documents: dict[str, Document] = field(default_factory=dict)
    runs: dict[tuple[str, str], list[AnswerSentence]] = field(default_factory=dict)
    nuggets: list[Nugget] = field(default_factory=list)
    judgments: list[CitationJudgment] = field(default_factory=list)

    def sentence(self, sentence_id: str) -> AnswerSentence:
        return self.sentences_by_id()[sentence_id]

    def sentences_by_id(self) -> dict[str, AnswerSentence]:
        out = {}
        for sents in self.runs.values():
            for s in sents:
                out[s.id] = s
        return out

    def system_ids(self) -> list[str]:
        return sorted({sys_id for sys_id, _ in self.runs})

    def gold_nuggets(self, question_id: str) -> list[Nugget]:
        return [
            n
            for n in self.nuggets
            if n.origin == "gold" and n.question_id == question_id
        ]

    def system_nuggets(self, question_id: str, system_id: str) -> list[Nugget]:
        return [
            n
            for n in self.nuggets
            if n.origin == "system"
            and n.question_id == question_id
            and n.system_id == system_id
        ]


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON: {exc}", path=path, line=lineno)
            if not isinstance(record, dict):
                raise MalformedRecord("record is not an object", path=path, line=lineno)
            yield lineno, record


def _require(record: dict, fields: tuple[str, ...], path: Path, lineno: int) -> None:
    for name in fields:
        if name not in record:
            raise MalformedRecord("missing field", path=path, line=lineno, field=name)


def _nonempty_str(record, name, path, lineno) -> str:
    value = record.get(name)
    if not isinstance(value, str) or not value.strip():
        raise MalformedRecord(
            "must be a non-empty string", path=path, line=lineno, field=name
        )
    return value


def _extra(record: dict, known: tuple[str, ...]) -> dict:
    return {k: v for k, v in record.items() if k not in known}


def resolve_paths(
    directory: str | Path | None = None, **overrides: str | Path | None
) -> dict[str, Path | None]:
    """Resolve the five corpus file paths from a directory and/or overrides.

    Files missing from the directory are simply absent (value ``None``);
    explicit overrides must exist.
    """
    paths: dict[str, Path | None] = {}
    for kind, default_name in FILE_NAMES.items():
        override = overrides.get(kind)
        if override is not None:
            paths[kind] = Path(override)
        elif directory is not None:
            candidate = Path(directory) / default_name
            paths[kind] = candidate if candidate.exists() else None
        else:
            paths[kind] = None
    return paths


def load_corpus(
    directory: str | Path | None = None,
    segmenter=segment_sentences,
    **overrides: str | Path | None,
) -> Corpus:
    """Load and cross-reference a corpus.

    Raises MalformedRecord, DuplicateId, or DanglingReference on the first
    hard schema violation. Reference checks against documents are only
    enforced when a documents file is present, so partial corpora (e.g. runs
    plus nuggets only) stay loadable for pipelines that do not need them.
    """
    paths = resolve_paths(directory, **overrides)
    for kind, p in paths.items():
        if p is not None and not p.exists():
            raise MalformedRecord(f"no such file: {p}", path=p)

    corpus = Corpus()

    if paths["questions"] is not None:
        for lineno, rec in _iter_jsonl(paths["questions"]):
            _require(rec, ("id", "text"), paths["questions"], lineno)
            qid = _nonempty_str(rec, "id", paths["questions"], lineno)
            text = _nonempty_str(rec, "text", paths["questions"], lineno)
            if qid in corpus.questions:
                raise DuplicateId(f"duplicate question id: {qid}")
            corpus.questions[qid] = Question(
                id=qid, text=text, extra=_extra(rec, ("id", "text"))
            )

    if paths["documents"] is not None:
        for lineno, rec in _iter_jsonl(paths["documents"]):
            _require(rec, ("pmid", "title", "abstract"), paths["documents"], lineno)
            pmid = _nonempty_str(rec, "pmid", paths["documents"], lineno)
            if pmid in corpus.documents:
                raise DuplicateId(f"duplicate pmid: {pmid}")
            title = rec.get("title")
            abstract = rec.get("abstract")
            if not isinstance(title, str) or not isinstance(abstract, str):
                raise MalformedRecord(
                    "title and abstract must be strings",
                    path=paths["documents"],
                    line=lineno,
                )
            corpus.documents[pmid] = Document(
                pmid=pmid,
                title=title,
                abstract=abstract,
                sentences=segmenter(abstract),
                extra=_extra(rec, ("pmid", "title", "abstract")),
            )

    have_documents = paths["documents"] is not None
    have_questions = paths["questions"] is not None

    if paths["runs"] is not None:
        seen_sentence_ids: set[str] = set()
        for lineno, rec in _iter_jsonl(paths["runs"]):
            _require(rec, ("system_id", "question_id", "sentences"), paths["runs"], lineno)
            system_id = _nonempty_str(rec, "system_id", paths["runs"], lineno)
            question_id = _nonempty_str(rec, "question_id", paths["runs"], lineno)
            if have_questions and question_id not in corpus.questions:
                raise DanglingReference(
                    f"run for unknown question_id: {question_id}"
                )
            key = (system_id, question_id)
            if key in corpus.runs:
                raise DuplicateId(f"duplicate run for {key}")
            if not isinstance(rec["sentences"], list):
                raise MalformedRecord(
                    "must be a list", path=paths["runs"], line=lineno, field="sentences"
                )
            sentences = []
            for s in rec["sentences"]:
                if not isinstance(s, dict):
                    raise MalformedRecord(
                        "sentence entry is not an object", path=paths["runs"], line=lineno
                    )
                _require(s, ("id", "position", "text"), paths["runs"], lineno)
                sid = _nonempty_str(s, "id", paths["runs"], lineno)
                if sid in seen_sentence_ids:
                    raise DuplicateId(f"duplicate sentence id: {sid}")
                seen_sentence_ids.add(sid)
                text = _nonempty_str(s, "text", paths["runs"], lineno)
                position = s.get("position")
                if not isinstance(position, int) or position < 0:
                    raise MalformedRecord(
                        "must be a non-negative integer",
                        path=paths["runs"],
                        line=lineno,
                        field="position",
                    )
                citations = s.get("citations", [])
                if not isinstance(citations, list) or not all(
                    isinstance(c, str) for c in citations
                ):
                    raise MalformedRecord(
                        "must be a list of pmid strings",
                        path=paths["runs"],
                        line=lineno,
                        field="citations",
                    )
                if have_documents:
                    for pmid in citations:
                        if pmid not in corpus.documents:
                            raise DanglingReference(
                                f"sentence {sid} cites unknown pmid: {pmid}"
                            )
                sentences.append(
                    AnswerSentence(
                        id=sid,
                        question_id=question_id,
                        system_id=system_id,
                        position=position,
                        text=text,
                        citations=list(citations),
                        extra=_extra(s, ("id", "position", "text", "citations")),
                    )
                )
            sentences.sort(key=lambda s: s.position)
            corpus.runs[key] = sentences

    if paths["nuggets"] is not None:
        for lineno, rec in _iter_jsonl(paths["nuggets"]):
            _require(rec, ("question_id", "origin", "text"), paths["nuggets"], lineno)
            question_id = _nonempty_str(rec, "question_id", paths["nuggets"], lineno)
            if have_questions and question_id not in corpus.questions:
                raise DanglingReference(
                    f"nugget for unknown question_id: {question_id}"
                )
            origin = rec.get("origin")
            if origin not in ("gold", "system"):
                raise MalformedRecord(
                    "must be 'gold' or 'system'",
                    path=paths["nuggets"],
                    line=lineno,
                    field="origin",
                )
            system_id = rec.get("system_id")
            if origin == "system" and (not isinstance(system_id, str) or not system_id):
                raise MalformedRecord(
                    "required for system nuggets",
                    path=paths["nuggets"],
                    line=lineno,
                    field="system_id",
                )
            if origin == "gold" and system_id is not None:
                raise MalformedRecord(
                    "not allowed for gold nuggets",
                    path=paths["nuggets"],
                    line=lineno,
                    field="system_id",
                )
            text = _nonempty_str(rec, "text", paths["nuggets"], lineno)
            corpus.nuggets.append(
                Nugget(
                    text=text,
                    origin=origin,
                    question_id=question_id,
                    system_id=system_id,
                    extra=_extra(rec, ("question_id", "origin", "system_id", "text")),
                )
            )

    if paths["judgments"] is not None:
        sentences_by_id = corpus.sentences_by_id()
        seen_pairs: set[tuple[str, str]] = set()
        for lineno, rec in _iter_jsonl(paths["judgments"]):
            _require(rec, ("sentence_id",), paths["judgments"], lineno)
            sid = _nonempty_str(rec, "sentence_id", paths["judgments"], lineno)
            sentence = sentences_by_id.get(sid)
            if paths["runs"] is not None and sentence is None:
                raise DanglingReference(f"judgment for unknown sentence_id: {sid}")

            if "label" in rec:
                _require(rec, ("pmid",), paths["judgments"], lineno)
                pmid = _nonempty_str(rec, "pmid", paths["judgments"], lineno)
                if have_documents and pmid not in corpus.documents:
                    raise DanglingReference(
                        f"judgment for unknown pmid: {pmid}"
                    )
                try:
                    label = CitationLabel.parse(rec["label"])
                except ValueError as exc:
                    raise MalformedRecord(
                        str(exc), path=paths["judgments"], line=lineno, field="label"
                    )
                if (sid, pmid) in seen_pairs:
                    raise DuplicateId(f"duplicate judgment for ({sid}, {pmid})")
                seen_pairs.add((sid, pmid))
                corpus.judgments.append(
                    CitationJudgment(sentence_id=sid, pmid=pmid, label=label)
                )
                if label is CitationLabel.SUPPORTING and sentence is not None:
                    sentence.gold_supporting_docs.append(pmid)
            elif "relevance" in rec:
                try:
                    relevance = RelevanceLabel.parse(rec["relevance"])
                except ValueError as exc:
                    raise MalformedRecord(
                        str(exc), path=paths["judgments"], line=lineno, field="relevance"
                    )
                if sentence is not None:
                    sentence.gold_relevance = relevance
            elif "evidence" in rec:
                spans = rec["evidence"]
                if not isinstance(spans, list):
                    raise MalformedRecord(
                        "must be a list",
                        path=paths["judgments"],
                        line=lineno,
                        field="evidence",
                    )
                for span in spans:
                    if not isinstance(span, dict):
                        raise MalformedRecord(
                            "evidence entry is not an object",
                            path=paths["judgments"],
                            line=lineno,
                        )
                    _require(
                        span,
                        ("pmid", "start_sentence", "end_sentence"),
                        paths["judgments"],
                        lineno,
                    )
                    pmid = span["pmid"]
                    start, end = span["start_sentence"], span["end_sentence"]
                    if (
                        not isinstance(start, int)
                        or not isinstance(end, int)
                        or start < 0
                        or end < start
                    ):
                        raise MalformedRecord(
                            "requires 0 <= start_sentence <= end_sentence",
                            path=paths["judgments"],
                            line=lineno,
                            field="evidence",
                        )
                    if have_documents:
                        doc = corpus.documents.get(pmid)
                        if doc is None:
                            raise DanglingReference(
                                f"evidence for unknown pmid: {pmid}"
                            )
                        if end >= len(doc.sentences):
                            raise MalformedRecord(
                                f"end_sentence {end} out of range for {pmid} "
                                f"({len(doc.sentences)} sentences)",
                                path=paths["judgments"],
                                line=lineno,
                                field="evidence",
                            )
                    if sentence is not None:
                        sentence.gold_evidence.append(
                            EvidenceSpan(
                                pmid=pmid, start_sentence=start, end_sentence=end
                            )
                        )
            else:
                raise MalformedRecord(
                    "judgment needs one of: label, relevance, evidence",
                    path=paths["judgments"],
                    line=lineno,
                )

    return corpus


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    """Write a corpus back to its five JSONL files (extras preserved)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def dump(path: Path, records) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    dump(
        directory / FILE_NAMES["questions"],
        ({"id": q.id, "text": q.text, **q.extra} for q in corpus.questions.values()),
    )
    dump(
        directory / FILE_NAMES["documents"],
        (
            {"pmid": d.pmid, "title": d.title, "abstract": d.abstract, **d.extra}
            for d in corpus.documents.values()
        ),
    )

    def run_record(key):
        system_id, question_id = key
        return {
            "system_id": system_id,
            "question_id": question_id,
            "sentences": [
                {
                    "id": s.id,
                    "position": s.position,
                    "text": s.text,
                    "citations": list(s.citations),
                    **s.extra,
                }
                for s in corpus.runs[key]
            ],
        }

    dump(directory / FILE_NAMES["runs"], (run_record(k) for k in corpus.runs))

    def nugget_record(n):
        rec = {"question_id": n.question_id, "origin": n.origin, "text": n.text}
        if n.system_id is not None:
            rec["system_id"] = n.system_id
        rec.update(n.extra)
        return rec

    dump(directory / FILE_NAMES["nuggets"], (nugget_record(n) for n in corpus.nuggets))

    judgment_records = [
        {"sentence_id": j.sentence_id, "pmid": j.pmid, "label": j.label.value}
        for j in corpus.judgments
    ]
    for sents in corpus.runs.values():
        for s in sents:
            if s.gold_relevance is not None:
                judgment_records.append(
                    {"sentence_id": s.id, "relevance": s.gold_relevance.value}
                )
            if s.gold_evidence:
                judgment_records.append(
                    {
                        "sentence_id": s.id,
                        "evidence": [
                            {
                                "pmid": e.pmid,
                                "start_sentence": e.start_sentence,
                                "end_sentence": e.end_sentence,
                            }
                            for e in s.gold_evidence
                        ],
                    }
                )
    dump(directory / FILE_NAMES["judgments"], judgment_records)


def _squash_ws(text: str) -> str:
    return "".join(text.split())


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Check every data-model invariant; an empty list means valid."""
    violations: list[Violation] = []

    for qid, q in corpus.questions.items():
        if not q.text.strip():
            violations.append(Violation("empty_question_text", qid, "question text is empty"))

    for pmid, doc in corpus.documents.items():
        if _squash_ws("".join(doc.sentences)) != _squash_ws(doc.abstract):
            violations.append(
                Violation(
                    "sentence_concat_mismatch",
                    pmid,
                    "joined sentences do not reproduce the abstract",
                )
            )

    seen_sentence_ids: set[str] = set()
    for (system_id, question_id), sents in corpus.runs.items():
        if question_id not in corpus.questions and corpus.questions:
            violations.append(
                Violation("dangling_question", f"{system_id}/{question_id}", "unknown question_id")
            )
        positions = sorted(s.position for s in sents)
        if positions != list(range(len(sents))):
            violations.append(
                Violation(
                    "non_contiguous_positions",
                    f"{system_id}/{question_id}",
                    f"positions {positions} are not contiguous from 0",
                )
            )
        for s in sents:
            if s.id in seen_sentence_ids:
                violations.append(Violation("duplicate_sentence_id", s.id, "duplicate id"))
            seen_sentence_ids.add(s.id)
            if not s.text.strip():
                violations.append(Violation("empty_sentence_text", s.id, "sentence text is empty"))
            if corpus.documents:
                for pmid in s.citations:
                    if pmid not in corpus.documents:
                        violations.append(
                            Violation("dangling_citation", s.id, f"cites unknown pmid {pmid}")
                        )

    seen_gold: set[tuple[str, str]] = set()
    for i, n in enumerate(corpus.nuggets):
        rid = f"nugget[{i}]"
        if n.origin == "system" and not n.system_id:
            violations.append(
                Violation("system_nugget_missing_system_id", rid, "origin=system needs system_id")
            )
        if n.origin == "gold" and n.system_id:
            violations.append(
                Violation("gold_nugget_with_system_id", rid, "origin=gold must not carry system_id")
            )
        if corpus.questions and n.question_id not in corpus.questions:
            violations.append(Violation("dangling_question", rid, "unknown question_id"))
        if n.origin == "gold":
            key = (n.question_id, _squash_ws(n.text).casefold())
            if key in seen_gold:
                violations.append(
                    Violation("duplicate_gold_nugget", rid, f"duplicate gold nugget for {n.question_id}")
                )
            seen_gold.add(key)

    sentences_by_id = corpus.sentences_by_id()
    for j in corpus.judgments:
        rid = f"{j.sentence_id}/{j.pmid}"
        if corpus.runs and j.sentence_id not in sentences_by_id:
            violations.append(Violation("dangling_sentence", rid, "unknown sentence_id"))
        if corpus.documents and j.pmid not in corpus.documents:
            violations.append(Violation("dangling_pmid", rid, "unknown pmid"))

    for s in sentences_by_id.values():
        for e in s.gold_evidence:
            doc = corpus.documents.get(e.pmid)
            if doc is None:
                if corpus.documents:
                    violations.append(
                        Violation("dangling_pmid", s.id, f"evidence in unknown pmid {e.pmid}")
                    )
                continue
            if not (0 <= e.start_sentence <= e.end_sentence < max(len(doc.sentences), 1)):
                violations.append(
                    Violation(
                        "evidence_out_of_range",
                        s.id,
                        f"span ({e.start_sentence}, {e.end_sentence}) outside {e.pmid}",
                    )
                )

    return violations
