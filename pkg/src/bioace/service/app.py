"""FastAPI service wrapping the evaluation pipelines.

Every endpoint is a stateless wrapper: load config + corpus from the request
paths, run the pipeline, optionally emit report files server-side, and
return the results. Domain errors map to HTTP 400 (validation, exit code 2
for the CLI) and gateway failures to HTTP 502 (exit code 3).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, pipelines
from ..citations import fit_score_threshold
from ..config import GatewayConfig, load_config
from ..corpus import load_corpus, validate_corpus
from ..errors import BioaceError, GatewayError, MalformedRecord
from ..gateway import ModelGateway
from ..reporting import emit_report, sanitize
from ..retrieval import build_index
from ..stats import correlate_rankings, rank_systems
from . import schemas


def _load_corpus(paths: schemas.CorpusPaths):
    return load_corpus(
        paths.dir,
        questions=paths.questions,
        documents=paths.documents,
        runs=paths.runs,
        nuggets=paths.nuggets,
        judgments=paths.judgments,
    )


def _gateway(settings: schemas.GatewaySettings) -> tuple[GatewayConfig, ModelGateway]:
    config = load_config(settings.config)
    gateway = ModelGateway(
        cache_dir=settings.cache_dir,
        max_in_flight_override=settings.max_in_flight,
    )
    return config, gateway


def _respond(results: dict, out_dir: str | None) -> schemas.EvalResponse:
    files = emit_report(results, out_dir) if out_dir else []
    return schemas.EvalResponse(results=sanitize(results), files=files)


def _read_train_rows(path: str):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON: {exc}", path=path, line=lineno)
            if "score" not in rec or "label" not in rec:
                raise MalformedRecord(
                    "train rows need 'score' and 'label'", path=path, line=lineno
                )
            label = str(rec["label"]).strip().casefold().replace("_", " ")
            rows.append(
                {
                    "score": float(rec["score"]),
                    "gold": label in ("attributable", "supporting", "supports", "support"),
                }
            )
    return rows


def create_app() -> FastAPI:
    app = FastAPI(title="bioace", version=__version__)

    @app.exception_handler(BioaceError)
    async def _domain_error(request: Request, exc: BioaceError):
        status = 502 if isinstance(exc, GatewayError) else 400
        return JSONResponse(
            status_code=status,
            content={"error": {"type": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/corpus/validate", response_model=schemas.ValidateResponse)
    def corpus_validate(request: schemas.ValidateRequest):
        corpus = _load_corpus(request.corpus)
        violations = validate_corpus(corpus)
        return schemas.ValidateResponse(
            violations=[
                schemas.ViolationModel(
                    code=v.code, record_id=v.record_id, message=v.message
                )
                for v in violations
            ]
        )

    @app.post("/index/build", response_model=schemas.BuildIndexResponse)
    def index_build(request: schemas.BuildIndexRequest):
        corpus = _load_corpus(schemas.CorpusPaths(documents=request.documents))
        units = [
            (pmid, f"{doc.title} {doc.abstract}")
            for pmid, doc in sorted(corpus.documents.items())
        ]
        index = build_index(units, min_token_len=request.min_token_len)
        index.save(request.out)
        return schemas.BuildIndexResponse(
            doc_count=index.doc_count,
            avg_doc_length=index.avg_doc_length,
            out=str(request.out),
        )

    @app.post("/eval/nuggets", response_model=schemas.EvalResponse)
    def eval_nuggets(request: schemas.EvalNuggetsRequest):
        from ..bgmm import BgmmConfig

        config, gateway = _gateway(request.gateway)
        corpus = _load_corpus(request.corpus)
        embed_endpoint = config.endpoint_for("embed", request.embed_model)
        generate_endpoint = (
            config.endpoints.get("generate") and config.endpoint_for("generate")
        )
        results = pipelines.eval_nuggets(
            corpus,
            gateway,
            embed_endpoint,
            threshold=request.threshold,
            config=config,
            generate_endpoint=generate_endpoint,
            one_to_one=request.one_to_one,
            bgmm_config=BgmmConfig(seed=request.bgmm_seed),
        )
        return _respond(results, request.out_dir)

    @app.post("/eval/completeness", response_model=schemas.EvalResponse)
    def eval_completeness(request: schemas.EvalCompletenessRequest):
        config, gateway = _gateway(request.gateway)
        corpus = _load_corpus(request.corpus)
        endpoint = config.endpoint_for("generate", request.gen_model)
        results = pipelines.eval_completeness(corpus, gateway, endpoint)
        return _respond(results, request.out_dir)

    @app.post("/eval/correctness", response_model=schemas.EvalResponse)
    def eval_correctness(request: schemas.EvalCorrectnessRequest):
        config, gateway = _gateway(request.gateway)
        corpus = _load_corpus(request.corpus)

        if request.mode == "simnli":
            results = pipelines.eval_correctness_simnli(
                corpus,
                gateway,
                config.endpoint_for("embed"),
                config.endpoint_for("nli"),
                seed=request.seed,
                window=request.window,
                stride=request.stride,
                swap_negative=request.swap_negative,
            )
            return _respond(results, request.out_dir)

        judge = pipelines.make_judge(
            request.judge, gateway, config, threshold=request.judge_threshold
        )
        if request.mode == "classify":
            results = pipelines.eval_correctness_classify(
                corpus,
                gateway,
                judge,
                window=request.window,
                stride=request.stride,
                supporting_only=request.supporting_only,
                short_circuit=not request.deterministic_deciding,
            )
        else:
            from ..retrieval import InvertedIndex

            index = InvertedIndex.load(request.index) if request.index else None
            results = pipelines.eval_correctness_topk(
                corpus,
                gateway,
                config.endpoint_for("rerank"),
                judge,
                index=index,
                k_list=tuple(request.k_list),
                retrieve_k=request.retrieve_k,
                window=request.window,
                stride=request.stride,
            )
        return _respond(results, request.out_dir)

    @app.post("/eval/citations", response_model=schemas.EvalResponse)
    def eval_citations(request: schemas.EvalCitationsRequest):
        config, gateway = _gateway(request.gateway)
        corpus = _load_corpus(request.corpus)
        fit_train = (
            _read_train_rows(request.fit_threshold) if request.fit_threshold else None
        )
        results = pipelines.eval_citations(
            corpus,
            gateway,
            setting=request.setting,
            scheme=request.scheme,
            config=config,
            judge=request.judge,
            score_threshold=request.score_threshold,
            fit_train=fit_train,
            lenient_supports=request.lenient_supports,
        )
        return _respond(results, request.out_dir)

    @app.post("/prep/training-pairs", response_model=schemas.TrainingPairsResponse)
    def prep_training_pairs(request: schemas.TrainingPairsRequest):
        corpus = _load_corpus(request.corpus)
        pairs = pipelines.prep_training_pairs(
            corpus, window=request.window, stride=request.stride
        )
        out = Path(request.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for pair in pairs:
                fh.write(
                    json.dumps(
                        {
                            "sentence_id": pair.sentence_id,
                            "sentence": pair.sentence_text,
                            "fragment": pair.fragment_text,
                            "label": pair.label,
                            "provenance": pair.provenance,
                            "pmid": pair.pmid,
                            "start_sentence": pair.start_sentence,
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                    + "\n"
                )
        return schemas.TrainingPairsResponse(count=len(pairs), out=str(out))

    @app.post("/fit/score-threshold", response_model=schemas.FitScoreThresholdResponse)
    def fit_threshold(request: schemas.FitScoreThresholdRequest):
        rows = _read_train_rows(request.train)
        threshold, f1 = fit_score_threshold(
            [row["score"] for row in rows], [row["gold"] for row in rows]
        )
        if math.isinf(threshold):
            threshold = "inf" if threshold > 0 else "-inf"
        return schemas.FitScoreThresholdResponse(threshold=threshold, f1=f1)

    @app.post("/rank", response_model=schemas.RankResponse)
    def rank(request: schemas.RankRequest):
        def resolve(inline, path):
            if inline is not None:
                return inline
            if path is None:
                return None
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            if not isinstance(data, dict):
                raise MalformedRecord("metric file must map system_id to value", path=path)
            return {str(k): float(v) for k, v in data.items()}

        metrics = resolve(request.metrics, request.metrics_path)
        if metrics is None:
            raise MalformedRecord("rank needs metrics or metrics_path")
        ranks = rank_systems(metrics)
        correlation = None
        reference = resolve(request.reference, request.reference_path)
        if reference is not None:
            result = correlate_rankings(metrics, reference)
            correlation = schemas.CorrelationModel(
                spearman=result.spearman, kendall=result.kendall, n=result.n
            )
        return schemas.RankResponse(
            metric_name=request.metric_name, ranks=ranks, correlation=correlation
        )

    @app.post("/report", response_model=schemas.ReportResponse)
    def report(request: schemas.ReportRequest):
        try:
            results = json.loads(Path(request.results_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MalformedRecord(f"no such file: {request.results_path}")
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc}", path=request.results_path)
        files = emit_report(results, request.out_dir)
        return schemas.ReportResponse(files=files)

    return app


app = create_app()
