import json
import threading

import httpx
import numpy as np
import pytest

from bioace.config import EndpointConfig
from bioace.errors import (
    DimensionMismatch,
    EmptyInput,
    EndpointUnavailable,
    MalformedResponse,
    UnparsableLabel,
)
from bioace.gateway import (
    FixtureTransport,
    ModelGateway,
    NliResult,
    ResponseCache,
    cache_key,
    normalize_label_text,
    parse_label,
)


def fixture_endpoint(path, capability, model_id="m"):
    return EndpointConfig(
        base_url=f"fixture:{path}", model_id=model_id, capability=capability
    )


# -- label parsing -------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        (" Required.\n", "Required"),
        ("'borderline'", "Borderline"),
        ('"UNNECESSARY!"', "Unnecessary"),
        ("**Inappropriate**", "Inappropriate"),
    ],
)
def test_parse_relevance_surface_forms(raw, expected):
    allowed = ("Required", "Unnecessary", "Borderline", "Inappropriate")
    assert parse_label(raw, allowed) == expected


def test_parse_label_no_substring_matching():
    allowed = ("attributable", "not attributable")
    assert parse_label("attributable", allowed) == "attributable"
    assert parse_label("not attributable", allowed) == "not attributable"
    assert parse_label("not_attributable", allowed) == "not attributable"
    assert parse_label("I think it is attributable", allowed) is None


def test_normalize_label_text_collapses_whitespace_and_case():
    assert normalize_label_text("  Not\tRELEVANT ") == "not relevant"
    assert normalize_label_text("'Supports.'") == "supports"


# -- fixture transport and caching ----------------------------------------------


def test_embed_cache_hit_for_duplicate_texts(write_gateway_fixture, tmp_path):
    path = write_gateway_fixture({"embed": {"default": {"mode": "hash", "dim": 4}}})
    gw = ModelGateway(cache_dir=tmp_path / "cache", sleep=lambda _: None)
    ep = fixture_endpoint(path, "embed")
    vectors = gw.embed_batch(["a", "a"], ep)
    assert np.array_equal(vectors[0], vectors[1])
    assert gw.stats["misses"] == 1
    again = gw.embed_batch(["a"], ep)
    assert np.array_equal(again[0], vectors[0])
    assert gw.stats["hits"] >= 1


def test_embed_empty_input(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"embed": {"default": {"mode": "hash", "dim": 4}}})
    ep = fixture_endpoint(path, "embed")
    with pytest.raises(EmptyInput):
        memory_gateway.embed_batch([], ep)
    with pytest.raises(EmptyInput):
        memory_gateway.embed_batch(["ok", ""], ep)


def test_embed_batch_preserves_input_order(write_gateway_fixture, memory_gateway):
    import random

    path = write_gateway_fixture({"embed": {"default": {"mode": "hash", "dim": 6}}})
    ep = fixture_endpoint(path, "embed")
    texts = [f"text-{i}" for i in range(10)]
    baseline = {t: v for t, v in zip(texts, memory_gateway.embed_batch(texts, ep))}
    rng = random.Random(1)
    for _ in range(5):
        shuffled = texts.copy()
        rng.shuffle(shuffled)
        vectors = memory_gateway.embed_batch(shuffled, ep)
        for text, vec in zip(shuffled, vectors):
            assert np.array_equal(vec, baseline[text])


def test_embed_canned_vectors_bit_equal(write_gateway_fixture, memory_gateway):
    canned = {"u": [1.0, 0.0, 0.0, 0.0], "v": [0.25, -0.5, 0.125, 1.0]}
    path = write_gateway_fixture({"embed": {"vectors": canned}})
    ep = fixture_endpoint(path, "embed")
    u, v = memory_gateway.embed_batch(["u", "v"], ep)
    assert u.tolist() == canned["u"]
    assert v.tolist() == canned["v"]


def test_embed_dimension_mismatch(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {"embed": {"vectors": {"u": [1.0, 0.0], "v": [1.0, 0.0, 0.0]}}}
    )
    ep = fixture_endpoint(path, "embed")
    with pytest.raises(DimensionMismatch):
        memory_gateway.embed_batch(["u", "v"], ep)


def test_generate_text_cached_identical(write_gateway_fixture, tmp_path):
    path = write_gateway_fixture({"generate": {"exact": {"p": "out"}}})
    gw = ModelGateway(cache_dir=tmp_path / "c", sleep=lambda _: None)
    ep = fixture_endpoint(path, "generate")
    first = gw.generate_text("p", ep)
    second = gw.generate_text("p", ep)
    assert first == second == "out"
    assert gw.stats == {"hits": 1, "misses": 1}


def test_cache_survives_gateway_restart(write_gateway_fixture, tmp_path):
    path = write_gateway_fixture({"generate": {"exact": {"p": "out"}}})
    ep = fixture_endpoint(path, "generate")
    ModelGateway(cache_dir=tmp_path / "c").generate_text("p", ep)
    # new gateway, same cache dir: served without touching the transport
    gw = ModelGateway(cache_dir=tmp_path / "c")
    assert gw.generate_text("p", ep) == "out"
    assert gw.stats == {"hits": 1, "misses": 0}


def test_cache_layout_and_digest_verification(tmp_path):
    cache = ResponseCache(tmp_path)
    material = {"capability": "generate", "model": "m", "prompt": "p", "temperature": 0.0}
    cache.put("generate", material, "out")
    digest = cache_key(material)
    path = tmp_path / "generate" / digest[:2] / f"{digest}.json"
    assert path.exists()
    entry = json.loads(path.read_text())
    assert entry["response"] == "out"
    # corrupt the stored key: the entry no longer verifies, treated as a miss
    entry["key"]["prompt"] = "tampered"
    path.write_text(json.dumps(entry))
    fresh = ResponseCache(tmp_path)
    hit, _ = fresh.get("generate", material)
    assert hit is False


def test_generate_label_retry_with_suffix(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {
            "generate": {
                "rules": [
                    {"contains": "Answer with exactly one of", "response": "Required"},
                    {"contains": "classify this", "response": "hmm, unclear"},
                ]
            }
        }
    )
    ep = fixture_endpoint(path, "generate")
    label = memory_gateway.generate_label(
        "classify this", ("Required", "Unnecessary"), ep
    )
    assert label == "Required"


def test_generate_label_unparsable_after_retry(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"generate": {"default": "I think it supports"}})
    ep = fixture_endpoint(path, "generate")
    with pytest.raises(UnparsableLabel) as err:
        memory_gateway.generate_label("p", ("supports", "not supports"), ep)
    assert err.value.raw_output == "I think it supports"


def test_nli_renormalizes_and_validates(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {
            "nli": {
                "rules": [
                    {
                        "premise_contains": "x",
                        "hypothesis_contains": "",
                        "support": 0.90,
                        "refute": 0.03,
                        "insufficient": 0.05,
                    }
                ]
            }
        }
    )
    ep = fixture_endpoint(path, "nli")
    result = memory_gateway.nli("x", "h", ep)
    total = result.p_support + result.p_refute + result.p_insufficient
    assert total == pytest.approx(1.0, abs=1e-9)
    assert result.p_support == pytest.approx(0.90 / 0.98)


def test_nli_missing_class_is_malformed(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {"nli": {"default": {"support": 0.9, "refute": 0.1}}}
    )
    ep = fixture_endpoint(path, "nli")
    with pytest.raises(MalformedResponse, match="insufficient"):
        memory_gateway.nli("p", "h", ep)


def test_score_pair_canned_values(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {
            "score": {
                "rules": [
                    {"claim_contains": "c1", "score": 0.12},
                    {"claim_contains": "c2", "score": 0.55},
                    {"claim_contains": "c3", "score": 0.97},
                ]
            }
        }
    )
    ep = fixture_endpoint(path, "score")
    assert memory_gateway.score_pair("c1", "r", ep) == 0.12
    assert memory_gateway.score_pair("c2", "r", ep) == 0.55
    assert memory_gateway.score_pair("c3", "r", ep) == 0.97
    # repeated call is served from cache
    memory_gateway.score_pair("c1", "r", ep)
    assert memory_gateway.stats["hits"] == 1


class _NanScoreTransport:
    def score(self, claim, reference, endpoint):
        return float("nan")


def test_score_nan_is_malformed(memory_gateway):
    ep = EndpointConfig(base_url="http://x", model_id="m", capability="score")
    memory_gateway._transports["http://x"] = _NanScoreTransport()
    with pytest.raises(MalformedResponse):
        memory_gateway.score_pair("c", "r", ep)


def test_rerank_orders_scores_with_input_order_ties(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture(
        {"rerank": {"scores": {"A": 0.2, "B": 0.9, "C": 0.2}}}
    )
    ep = fixture_endpoint(path, "rerank")
    ranked = memory_gateway.rerank("q", [("A", "ta"), ("B", "tb"), ("C", "tc")], ep)
    assert [r for r, _ in ranked] == ["B", "A", "C"]
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)


def test_rerank_single_and_empty(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"rerank": {"default": 0.0}})
    ep = fixture_endpoint(path, "rerank")
    assert memory_gateway.rerank("q", [("A", "t")], ep) == [("A", 0.0)]
    with pytest.raises(EmptyInput):
        memory_gateway.rerank("q", [], ep)


def test_capability_mismatch_rejected(write_gateway_fixture, memory_gateway):
    path = write_gateway_fixture({"embed": {"default": {"mode": "hash", "dim": 4}}})
    ep = fixture_endpoint(path, "embed")
    with pytest.raises(ValueError, match="capability"):
        memory_gateway.generate_text("p", ep)


def test_fixture_miss_is_not_retried(write_gateway_fixture):
    path = write_gateway_fixture({"generate": {}})
    sleeps = []
    gw = ModelGateway(cache_dir=None, sleep=sleeps.append)
    ep = fixture_endpoint(path, "generate")
    with pytest.raises(MalformedResponse):
        gw.generate_text("p", ep)
    assert sleeps == []


# -- HTTP transport ---------------------------------------------------------------


def _http_gateway(handler, **kwargs):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return ModelGateway(cache_dir=None, http_client=client, sleep=lambda _: None, **kwargs)


def test_http_completion_and_embedding_convention():
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        if "prompt" in body:
            assert body["temperature"] == 0.0
            return httpx.Response(200, json={"choices": [{"text": "hello"}]})
        return httpx.Response(
            200, json={"data": [{"embedding": [0.1, 0.2]} for _ in body["input"]]}
        )

    gw = _http_gateway(handler)
    gen = EndpointConfig(base_url="http://srv/v1/completions", model_id="m", capability="generate")
    emb = EndpointConfig(base_url="http://srv/v1/embeddings", model_id="m", capability="embed")
    assert gw.generate_text("hi", gen) == "hello"
    vectors = gw.embed_batch(["a", "b"], emb)
    assert len(vectors) == 2 and vectors[0].tolist() == [0.1, 0.2]


def test_http_retries_then_unavailable():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(500)

    sleeps = []
    client = httpx.Client(transport=httpx.MockTransport(handler))
    gw = ModelGateway(cache_dir=None, http_client=client, sleep=sleeps.append)
    ep = EndpointConfig(base_url="http://down", model_id="m", capability="generate")
    with pytest.raises(EndpointUnavailable):
        gw.generate_text("p", ep)
    assert calls["n"] == 3  # initial try + two retries
    assert sleeps == [1.0, 4.0]


def test_http_recovers_after_transient_failure():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] == 1:
            return httpx.Response(503)
        return httpx.Response(200, json={"text": "ok"})

    gw = _http_gateway(handler)
    ep = EndpointConfig(base_url="http://flaky", model_id="m", capability="generate")
    assert gw.generate_text("p", ep) == "ok"


def test_max_in_flight_is_bounded():
    active = {"now": 0, "peak": 0}
    lock = threading.Lock()

    def handler(request):
        with lock:
            active["now"] += 1
            active["peak"] = max(active["peak"], active["now"])
        with lock:
            active["now"] -= 1
        return httpx.Response(200, json={"text": "ok"})

    gw = _http_gateway(handler)
    ep = EndpointConfig(
        base_url="http://srv", model_id="m", capability="generate", max_in_flight=2
    )
    threads = [
        threading.Thread(target=gw.generate_text, args=(f"p{i}", ep)) for i in range(8)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert active["peak"] <= 2


def test_nli_result_shape():
    r = NliResult(0.7, 0.2, 0.1)
    assert r.as_dict() == {"support": 0.7, "refute": 0.2, "insufficient": 0.1}
