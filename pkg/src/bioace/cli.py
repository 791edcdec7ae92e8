"""Command-line client for the evaluation service.

The CLI is a thin HTTP client over the FastAPI app. By default it mounts the
app in-process (no network, fully deterministic); pass ``--server URL`` to
talk to a running instance instead (``bioace serve``). Exit codes: 0 on
success, 2 on validation errors, 3 on model-endpoint failures.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx

EXIT_VALIDATION = 2
EXIT_ENDPOINT = 3


def _request(ctx_obj: dict, path: str, payload: dict) -> httpx.Response:
    server = ctx_obj.get("server")
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    from .service.app import create_app

    async def go():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://bioace.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _finish(response: httpx.Response) -> None:
    try:
        body = response.json()
    except ValueError:
        body = {"error": {"type": "BadResponse", "message": response.text[:500]}}
    if response.status_code == 200:
        click.echo(json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False))
        return
    click.echo(json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False), err=True)
    if response.status_code in (502, 503, 504):
        sys.exit(EXIT_ENDPOINT)
    sys.exit(EXIT_VALIDATION)


def _corpus_payload(corpus, run, questions, documents, nuggets, judgments) -> dict:
    return {
        "dir": corpus,
        "runs": run,
        "questions": questions,
        "documents": documents,
        "nuggets": nuggets,
        "judgments": judgments,
    }


def _gateway_payload(ctx_obj: dict) -> dict:
    return {
        "config": ctx_obj.get("config"),
        "cache_dir": ctx_obj.get("cache_dir"),
        "max_in_flight": ctx_obj.get("max_in_flight"),
    }


@click.group()
@click.option("--config", type=click.Path(), default=None, help="Gateway config file (JSON/YAML).")
@click.option("--cache-dir", type=click.Path(), default=None, help="Model response cache directory.")
@click.option("--seed", type=int, default=None, help="Seed for seeded operations.")
@click.option("--max-in-flight", type=int, default=None, help="Override per-endpoint concurrency cap.")
@click.option("--server", default=None, help="Remote service URL; default runs in-process.")
@click.pass_context
def main(ctx, config, cache_dir, seed, max_in_flight, server):
    """Evaluate biomedical answers and citations against expert references."""
    ctx.obj = {
        "config": config,
        "cache_dir": cache_dir,
        "seed": seed,
        "max_in_flight": max_in_flight,
        "server": server,
    }


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the evaluation service."""
    import uvicorn

    uvicorn.run("bioace.service.app:app", host=host, port=port)


@main.command()
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--run", type=click.Path(), default=None)
@click.option("--questions", type=click.Path(), default=None)
@click.option("--documents", type=click.Path(), default=None)
@click.option("--nuggets", type=click.Path(), default=None)
@click.option("--judgments", type=click.Path(), default=None)
@click.pass_obj
def validate(obj, corpus, run, questions, documents, nuggets, judgments):
    """Check every corpus invariant; prints violations."""
    payload = {
        "corpus": _corpus_payload(corpus, run, questions, documents, nuggets, judgments)
    }
    _finish(_request(obj, "/corpus/validate", payload))


@main.group()
def index():
    """Build and inspect BM25 indexes."""


@index.command("build")
@click.option("--docs", "documents", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--min-token-len", type=int, default=2)
@click.pass_obj
def index_build(obj, documents, out, min_token_len):
    """Index documents.jsonl into a JSON inverted index."""
    payload = {"documents": documents, "out": out, "min_token_len": min_token_len}
    _finish(_request(obj, "/index/build", payload))


@main.group()
def prep():
    """Data preparation utilities."""


@prep.command("training-pairs")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--run", type=click.Path(), default=None)
@click.option("--questions", type=click.Path(), default=None)
@click.option("--documents", type=click.Path(), default=None)
@click.option("--judgments", type=click.Path(), default=None)
@click.option("--window", type=int, default=3)
@click.option("--stride", type=int, default=1)
@click.option("--out", type=click.Path(), required=True)
@click.pass_obj
def prep_training_pairs(obj, corpus, run, questions, documents, judgments, window, stride, out):
    """Emit correct/incorrect training pairs as JSONL."""
    payload = {
        "corpus": _corpus_payload(corpus, run, questions, documents, None, judgments),
        "window": window,
        "stride": stride,
        "out": out,
    }
    _finish(_request(obj, "/prep/training-pairs", payload))


@main.group()
def eval():
    """Answer and citation evaluations."""


@eval.command("nuggets")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--run", type=click.Path(), default=None)
@click.option("--gold", "gold_nuggets", type=click.Path(), default=None, help="nuggets.jsonl")
@click.option("--questions", type=click.Path(), default=None)
@click.option("--documents", type=click.Path(), default=None)
@click.option("--embed-model", default=None)
@click.option("--threshold", default="auto", help="Probability threshold or 'auto'.")
@click.option("--one-to-one", is_flag=True, default=False)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_obj
def eval_nuggets(obj, corpus, run, gold_nuggets, questions, documents, embed_model, threshold, one_to_one, out_dir):
    """Nugget precision/recall/F1 against ground-truth nuggets."""
    if threshold != "auto":
        threshold = float(threshold)
    payload = {
        "corpus": _corpus_payload(corpus, run, questions, documents, gold_nuggets, None),
        "gateway": _gateway_payload(obj),
        "embed_model": embed_model,
        "threshold": threshold,
        "one_to_one": one_to_one,
        "bgmm_seed": obj.get("seed") if obj.get("seed") is not None else 0,
        "out_dir": out_dir,
    }
    _finish(_request(obj, "/eval/nuggets", payload))


@eval.command("completeness")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--run", type=click.Path(), default=None)
@click.option("--questions", type=click.Path(), default=None)
@click.option("--gold", "judgments", type=click.Path(), default=None, help="judgments.jsonl")
@click.option("--gen-model", default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_obj
def eval_completeness(obj, corpus, run, questions, judgments, gen_model, out_dir):
    """Relevance labels per sentence; completeness/redundancy/harmfulness."""
    payload = {
        "corpus": _corpus_payload(corpus, run, questions, None, None, judgments),
        "gateway": _gateway_payload(obj),
        "gen_model": gen_model,
        "out_dir": out_dir,
    }
    _finish(_request(obj, "/eval/completeness", payload))


@eval.command("correctness")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--run", type=click.Path(), default=None)
@click.option("--questions", type=click.Path(), default=None)
@click.option("--documents", type=click.Path(), default=None)
@click.option("--judgments", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["classify", "simnli", "topk"]), required=True)
@click.option("--judge", type=click.Choice(["gen", "nli", "cosine"]), default="gen")
@click.option("--window", type=int, default=3)
@click.option("--stride", type=int, default=1)
@click.option("--judge-threshold", type=float, default=0.75)
@click.option("--supporting-only", is_flag=True, default=False)
@click.option("--swap-negative", is_flag=True, default=False)
@click.option("--deterministic-deciding", is_flag=True, default=False,
              help="Disable fragment short-circuiting in classify mode.")
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--retrieve-k", type=int, default=1000)
@click.option("--k-list", default=None, help="Comma-separated k values for topk mode.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_obj
def eval_correctness(obj, corpus, run, questions, documents, judgments, mode, judge,
                     window, stride, judge_threshold, supporting_only, swap_negative,
                     deterministic_deciding, index_path, retrieve_k, k_list, out_dir):
    """Answer-sentence correctness (classify / simnli / topk)."""
    payload = {
        "corpus": _corpus_payload(corpus, run, questions, documents, None, judgments),
        "gateway": _gateway_payload(obj),
        "mode": mode,
        "judge": judge,
        "window": window,
        "stride": stride,
        "seed": obj.get("seed") if obj.get("seed") is not None else 13,
        "judge_threshold": judge_threshold,
        "supporting_only": supporting_only,
        "swap_negative": swap_negative,
        "deterministic_deciding": deterministic_deciding,
        "index": index_path,
        "retrieve_k": retrieve_k,
        "out_dir": out_dir,
    }
    if k_list:
        payload["k_list"] = [int(v) for v in k_list.split(",")]
    _finish(_request(obj, "/eval/correctness", payload))


@eval.command("citations")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--run", type=click.Path(), default=None)
@click.option("--questions", type=click.Path(), default=None)
@click.option("--documents", type=click.Path(), default=None)
@click.option("--judgments", type=click.Path(), default=None)
@click.option("--setting", type=click.Choice(["doc", "maxsim", "nuggets"]), required=True)
@click.option("--scheme", type=click.Choice(["binary", "ternary"]), default="binary")
@click.option("--judge", type=click.Choice(["gen", "score", "pairwise-oracle"]), default="gen")
@click.option("--score-threshold", type=float, default=None)
@click.option("--fit-threshold", type=click.Path(), default=None, help="Train JSONL for threshold fitting.")
@click.option("--lenient-supports", is_flag=True, default=False)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_obj
def eval_citations(obj, corpus, run, questions, documents, judgments, setting, scheme,
                   judge, score_threshold, fit_threshold, lenient_supports, out_dir):
    """Citation attribution under the document/maxsim/nugget settings."""
    payload = {
        "corpus": _corpus_payload(corpus, run, questions, documents, None, judgments),
        "gateway": _gateway_payload(obj),
        "setting": setting,
        "scheme": scheme,
        "judge": judge,
        "score_threshold": score_threshold,
        "fit_threshold": fit_threshold,
        "lenient_supports": lenient_supports,
        "out_dir": out_dir,
    }
    _finish(_request(obj, "/eval/citations", payload))


@main.group()
def fit():
    """Threshold fitting for scoring judges."""


@fit.command("score-threshold")
@click.option("--train", type=click.Path(), required=True)
@click.pass_obj
def fit_score_threshold(obj, train):
    """Fit the attributable-score threshold maximizing F1 on a train set."""
    _finish(_request(obj, "/fit/score-threshold", {"train": train}))


@main.command()
@click.option("--metrics", "metrics_path", type=click.Path(), required=True,
              help="JSON file mapping system_id to metric value.")
@click.option("--reference", "reference_path", type=click.Path(), default=None)
@click.option("--metric", "metric_name", default="metric")
@click.pass_obj
def rank(obj, metrics_path, reference_path, metric_name):
    """Rank systems; optionally correlate against a reference metric."""
    payload = {
        "metrics_path": metrics_path,
        "reference_path": reference_path,
        "metric_name": metric_name,
    }
    _finish(_request(obj, "/rank", payload))


@main.command()
@click.option("--results", "results_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def report(obj, results_path, out_dir):
    """Re-emit a results JSON as report.json/summary.csv/plotdata.csv."""
    _finish(_request(obj, "/report", {"results_path": results_path, "out_dir": out_dir}))


if __name__ == "__main__":
    main()
