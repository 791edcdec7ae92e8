"""Uniform, cached client for the external model capabilities.

Five capabilities are exposed behind one interface: text embedding,
constrained label generation, free-text generation, NLI probabilities,
pairwise scoring, and document reranking. Two transports implement it:

* ``HttpTransport`` speaks the de-facto JSON inference-server convention
  (completion endpoints take ``{"model", "prompt", "temperature"}`` and
  return text; embedding endpoints take ``{"model", "input": [...]}`` and
  return ``{"data": [{"embedding": [...]}]}``).
* ``FixtureTransport`` serves canned responses from a JSON file so the whole
  pipeline runs deterministically offline; all tests use it.

Responses are cached content-addressed under
``cache/<capability>/<first-2-hex>/<digest>.json`` with atomic
write-temp-then-rename, so with temperature 0 and a warm cache every call is
a pure function of its canonical input.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
import unicodedata
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import httpx
import numpy as np

from .config import EndpointConfig
from .errors import (
    DimensionMismatch,
    EmptyInput,
    EndpointUnavailable,
    MalformedResponse,
    UnparsableLabel,
)

_STRIP_CHARS = "\"'`“”‘’().,:;!?[]{}*<>"


def normalize_label_text(raw: str) -> str:
    """Canonical form used to match model output against allowed labels.

    NFC-normalize, collapse whitespace, treat underscores as spaces, strip
    surrounding quotes/punctuation, casefold. No substring matching happens
    anywhere: labels that contain other labels ("not attributable") stay
    unambiguous.
    """
    s = unicodedata.normalize("NFC", str(raw))
    s = s.replace("_", " ")
    prev = None
    while prev != s:
        prev = s
        s = s.strip().strip(_STRIP_CHARS)
    return " ".join(s.casefold().split())


def parse_label(raw: str, allowed) -> str | None:
    """Return the allowed label matching ``raw`` exactly (normalized), else None."""
    normalized = normalize_label_text(raw)
    for label in allowed:
        if normalized == normalize_label_text(label):
            return label
    return None


@dataclass(frozen=True)
class NliResult:
    p_support: float
    p_refute: float
    p_insufficient: float

    def as_dict(self) -> dict[str, float]:
        return {
            "support": self.p_support,
            "refute": self.p_refute,
            "insufficient": self.p_insufficient,
        }


def _canonical(value):
    if isinstance(value, str):
        return unicodedata.normalize("NFC", value)
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    return value


def cache_key(material: dict) -> str:
    blob = json.dumps(
        _canonical(material), sort_keys=True, ensure_ascii=False, separators=(",", ":")
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed response store; safe for concurrent writers."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root is not None else None
        self._memory: dict[str, object] = {}
        self._lock = threading.Lock()

    def _path(self, capability: str, digest: str) -> Path:
        return self.root / capability / digest[:2] / f"{digest}.json"

    def get(self, capability: str, material: dict):
        digest = cache_key(material)
        with self._lock:
            if digest in self._memory:
                return True, self._memory[digest]
        if self.root is None:
            return False, None
        path = self._path(capability, digest)
        if not path.exists():
            return False, None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return False, None
        # Soundness: the stored key must hash back to the file name.
        if cache_key(entry.get("key", {})) != digest:
            return False, None
        with self._lock:
            self._memory[digest] = entry["response"]
        return True, entry["response"]

    def put(self, capability: str, material: dict, response) -> None:
        digest = cache_key(material)
        with self._lock:
            self._memory[digest] = response
        if self.root is None:
            return
        path = self._path(capability, digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "key": _canonical(material),
            "response": response,
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True))
            os.replace(tmp, path)
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _auth_headers(endpoint: EndpointConfig) -> dict[str, str]:
    if endpoint.api_key:
        return {"Authorization": f"Bearer {endpoint.api_key}"}
    return {}


class HttpTransport:
    """JSON-over-HTTP transport for hosted or local inference servers."""

    def __init__(self, client: httpx.Client | None = None):
        self._client = client or httpx.Client()

    def _post(self, endpoint: EndpointConfig, payload: dict) -> dict:
        try:
            response = self._client.post(
                endpoint.base_url,
                json=payload,
                timeout=endpoint.timeout,
                headers=_auth_headers(endpoint),
            )
        except httpx.HTTPError as exc:
            raise EndpointUnavailable(f"{endpoint.base_url}: {exc}") from exc
        if response.status_code >= 500:
            raise EndpointUnavailable(
                f"{endpoint.base_url}: HTTP {response.status_code}"
            )
        if response.status_code >= 400:
            raise MalformedResponse(
                f"{endpoint.base_url}: HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise MalformedResponse(f"{endpoint.base_url}: non-JSON body") from exc

    def embed(self, texts: list[str], endpoint: EndpointConfig) -> list[list[float]]:
        body = self._post(endpoint, {"model": endpoint.model_id, "input": list(texts)})
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise MalformedResponse("embedding response missing one entry per input")
        vectors = []
        for item in data:
            vec = item.get("embedding") if isinstance(item, dict) else None
            if not isinstance(vec, list):
                raise MalformedResponse("embedding entry missing 'embedding' list")
            vectors.append([float(v) for v in vec])
        return vectors

    def generate(self, prompt: str, endpoint: EndpointConfig) -> str:
        body = self._post(
            endpoint,
            {
                "model": endpoint.model_id,
                "prompt": prompt,
                "temperature": endpoint.temperature,
            },
        )
        if isinstance(body.get("text"), str):
            return body["text"]
        choices = body.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first, dict):
                if isinstance(first.get("text"), str):
                    return first["text"]
                message = first.get("message")
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
        raise MalformedResponse("completion response carries no text")

    def nli(self, premise: str, hypothesis: str, endpoint: EndpointConfig) -> dict:
        body = self._post(
            endpoint,
            {"model": endpoint.model_id, "premise": premise, "hypothesis": hypothesis},
        )
        probs = body.get("probabilities", body)
        if not isinstance(probs, dict):
            raise MalformedResponse("nli response is not an object")
        return probs

    def score(self, claim: str, reference: str, endpoint: EndpointConfig) -> float:
        body = self._post(
            endpoint,
            {"model": endpoint.model_id, "claim": claim, "reference": reference},
        )
        if "score" not in body:
            raise MalformedResponse("score response missing 'score'")
        return body["score"]

    def rerank(self, query: str, candidates, endpoint: EndpointConfig) -> dict:
        body = self._post(
            endpoint,
            {
                "model": endpoint.model_id,
                "query": query,
                "candidates": [{"id": cid, "text": text} for cid, text in candidates],
            },
        )
        results = body.get("results")
        if not isinstance(results, list):
            raise MalformedResponse("rerank response missing 'results'")
        scores = {}
        for item in results:
            if not isinstance(item, dict) or "id" not in item or "score" not in item:
                raise MalformedResponse("rerank result entry needs 'id' and 'score'")
            scores[item["id"]] = item["score"]
        return scores


def hash_vector(text: str, model_id: str, dim: int) -> list[float]:
    """Deterministic pseudo-random unit vector derived from the text."""
    digest = hashlib.sha256(f"{model_id}\x00{text}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    return [float(v) for v in vec]


class FixtureTransport:
    """File-backed transport serving canned responses (see tests/fixtures).

    Lookup order per capability: exact match, then the first matching rule,
    then the declared default. A miss raises MalformedResponse (it is a
    fixture-authoring bug, not a network condition, so it is not retried).
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.spec = json.loads(self.path.read_text(encoding="utf-8"))

    def _section(self, capability: str) -> dict:
        section = self.spec.get(capability)
        if not isinstance(section, dict):
            raise MalformedResponse(
                f"fixture {self.path} has no '{capability}' section"
            )
        return section

    def embed(self, texts: list[str], endpoint: EndpointConfig) -> list[list[float]]:
        section = self._section("embed")
        vectors = section.get("vectors", {})
        default = section.get("default")
        out = []
        for text in texts:
            if text in vectors:
                out.append([float(v) for v in vectors[text]])
            elif isinstance(default, dict) and default.get("mode") == "hash":
                out.append(hash_vector(text, endpoint.model_id, int(default.get("dim", 8))))
            else:
                raise MalformedResponse(f"fixture has no embedding for {text!r}")
        return out

    def generate(self, prompt: str, endpoint: EndpointConfig) -> str:
        section = self._section("generate")
        exact = section.get("exact", {})
        if prompt in exact:
            return exact[prompt]
        for rule in section.get("rules", ()):
            needles = rule.get("contains_all")
            if needles is None:
                needles = [rule["contains"]]
            if all(needle in prompt for needle in needles):
                return rule["response"]
        if "default" in section:
            return section["default"]
        raise MalformedResponse(
            f"fixture has no canned completion for prompt starting {prompt[:80]!r}"
        )

    def nli(self, premise: str, hypothesis: str, endpoint: EndpointConfig) -> dict:
        section = self._section("nli")
        for rule in section.get("rules", ()):
            if rule.get("premise_contains", "") in premise and rule.get(
                "hypothesis_contains", ""
            ) in hypothesis:
                return {k: rule[k] for k in ("support", "refute", "insufficient") if k in rule}
        if "default" in section:
            return dict(section["default"])
        raise MalformedResponse("fixture has no canned NLI response for this pair")

    def score(self, claim: str, reference: str, endpoint: EndpointConfig) -> float:
        section = self._section("score")
        for rule in section.get("rules", ()):
            if rule.get("claim_contains", "") in claim and rule.get(
                "reference_contains", ""
            ) in reference:
                return rule["score"]
        if "default" in section:
            return section["default"]
        raise MalformedResponse("fixture has no canned score for this pair")

    def rerank(self, query: str, candidates, endpoint: EndpointConfig) -> dict:
        section = self._section("rerank")
        scores = section.get("scores", {})
        default = section.get("default")
        out = {}
        for cid, _text in candidates:
            if cid in scores:
                out[cid] = scores[cid]
            elif default is not None:
                out[cid] = default
            else:
                raise MalformedResponse(f"fixture has no rerank score for {cid!r}")
        return out


def transport_for(base_url: str, http_client: httpx.Client | None = None):
    if base_url.startswith("fixture:"):
        return FixtureTransport(base_url[len("fixture:") :])
    return HttpTransport(http_client)


class ModelGateway:
    """Shared, thread-safe entry point for all model calls.

    ``retry_delays`` and ``sleep`` are injectable so tests do not wait on the
    real backoff schedule (one parse retry for labels; two network retries
    with 1 s / 4 s backoff otherwise).
    """

    def __init__(
        self,
        cache_dir: str | Path | None = None,
        http_client: httpx.Client | None = None,
        retry_delays: tuple[float, ...] = (1.0, 4.0),
        sleep=time.sleep,
        max_in_flight_override: int | None = None,
    ):
        self.cache = ResponseCache(cache_dir)
        self._http_client = http_client
        self.retry_delays = tuple(retry_delays)
        self.sleep = sleep
        self.max_in_flight_override = max_in_flight_override
        self.stats = {"hits": 0, "misses": 0}
        self._transports: dict[str, object] = {}
        self._semaphores: dict[tuple, threading.Semaphore] = {}
        self._lock = threading.Lock()

    # -- plumbing -----------------------------------------------------------

    def _transport(self, endpoint: EndpointConfig):
        with self._lock:
            if endpoint.base_url not in self._transports:
                self._transports[endpoint.base_url] = transport_for(
                    endpoint.base_url, self._http_client
                )
            return self._transports[endpoint.base_url]

    def _semaphore(self, endpoint: EndpointConfig) -> threading.Semaphore:
        key = (endpoint.base_url, endpoint.model_id, endpoint.capability)
        limit = self.max_in_flight_override or endpoint.max_in_flight
        with self._lock:
            if key not in self._semaphores:
                self._semaphores[key] = threading.Semaphore(limit)
            return self._semaphores[key]

    def _call(self, endpoint: EndpointConfig, fn, *args):
        attempt = 0
        while True:
            try:
                with self._semaphore(endpoint):
                    return fn(*args, endpoint)
            except EndpointUnavailable:
                if attempt >= len(self.retry_delays):
                    raise
                self.sleep(self.retry_delays[attempt])
                attempt += 1

    def _cached(self, endpoint: EndpointConfig, material: dict, fetch):
        hit, response = self.cache.get(endpoint.capability, material)
        if hit:
            self.stats["hits"] += 1
            return response
        self.stats["misses"] += 1
        response = fetch()
        self.cache.put(endpoint.capability, material, response)
        return response

    @staticmethod
    def _require_capability(endpoint: EndpointConfig, capability: str) -> None:
        if endpoint.capability != capability:
            raise ValueError(
                f"endpoint has capability {endpoint.capability!r}, need {capability!r}"
            )

    # -- capabilities ---------------------------------------------------------

    def embed_batch(self, texts, endpoint: EndpointConfig) -> list[np.ndarray]:
        self._require_capability(endpoint, "embed")
        texts = list(texts)
        if not texts or any(not isinstance(t, str) or not t for t in texts):
            raise EmptyInput("embed_batch needs a non-empty list of non-empty strings")

        def material(text: str) -> dict:
            return {"capability": "embed", "model": endpoint.model_id, "input": text}

        resolved: dict[str, list[float]] = {}
        missing: list[str] = []
        for text in texts:
            if text in resolved:
                continue
            hit, response = self.cache.get("embed", material(text))
            if hit:
                self.stats["hits"] += 1
                resolved[text] = response
            elif text not in missing:
                missing.append(text)

        if missing:
            self.stats["misses"] += len(missing)
            transport = self._transport(endpoint)
            vectors = self._call(endpoint, transport.embed, missing)
            if len(vectors) != len(missing):
                raise MalformedResponse("embedding endpoint dropped inputs")
            for text, vec in zip(missing, vectors):
                if not all(np.isfinite(v) for v in vec):
                    raise MalformedResponse(f"non-finite embedding for {text!r}")
                self.cache.put("embed", material(text), vec)
                resolved[text] = vec

        dims = {len(resolved[t]) for t in texts}
        if len(dims) != 1:
            raise DimensionMismatch(f"inconsistent embedding dims: {sorted(dims)}")
        return [np.asarray(resolved[t], dtype=float) for t in texts]

    def generate_text(self, prompt: str, endpoint: EndpointConfig) -> str:
        self._require_capability(endpoint, "generate")
        material = {
            "capability": "generate",
            "model": endpoint.model_id,
            "prompt": prompt,
            "temperature": endpoint.temperature,
        }
        transport = self._transport(endpoint)

        def fetch():
            text = self._call(endpoint, transport.generate, prompt)
            if not isinstance(text, str):
                raise MalformedResponse("completion is not a string")
            return text

        return self._cached(endpoint, material, fetch)

    def generate_label(self, prompt: str, allowed, endpoint: EndpointConfig) -> str:
        allowed = list(allowed)
        if not allowed:
            raise ValueError("allowed label set must be non-empty")
        raw = self.generate_text(prompt, endpoint)
        label = parse_label(raw, allowed)
        if label is not None:
            return label
        retry_prompt = prompt + "\nAnswer with exactly one of: " + ", ".join(allowed)
        raw = self.generate_text(retry_prompt, endpoint)
        label = parse_label(raw, allowed)
        if label is not None:
            return label
        raise UnparsableLabel(raw, allowed)

    def nli(self, premise: str, hypothesis: str, endpoint: EndpointConfig) -> NliResult:
        self._require_capability(endpoint, "nli")
        material = {
            "capability": "nli",
            "model": endpoint.model_id,
            "premise": premise,
            "hypothesis": hypothesis,
        }
        transport = self._transport(endpoint)

        def fetch():
            return self._call(endpoint, transport.nli, premise, hypothesis)

        probs = self._cached(endpoint, material, fetch)
        missing = [k for k in ("support", "refute", "insufficient") if k not in probs]
        if missing:
            raise MalformedResponse(f"nli response missing classes: {missing}")
        values = [float(probs[k]) for k in ("support", "refute", "insufficient")]
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise MalformedResponse(f"nli probabilities out of range: {values}")
        total = sum(values)
        if total <= 0:
            raise MalformedResponse("nli probabilities sum to zero")
        return NliResult(*(v / total for v in values))

    def score_pair(self, claim: str, reference: str, endpoint: EndpointConfig) -> float:
        self._require_capability(endpoint, "score")
        material = {
            "capability": "score",
            "model": endpoint.model_id,
            "claim": claim,
            "reference": reference,
        }
        transport = self._transport(endpoint)

        def fetch():
            return self._call(endpoint, transport.score, claim, reference)

        value = self._cached(endpoint, material, fetch)
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise MalformedResponse(f"score is not a number: {value!r}")
        if not np.isfinite(value):
            raise MalformedResponse(f"score is not finite: {value!r}")
        return value

    def rerank(self, query: str, candidates, endpoint: EndpointConfig):
        self._require_capability(endpoint, "rerank")
        candidates = [(cid, text) for cid, text in candidates]
        if not candidates:
            raise EmptyInput("rerank needs at least one candidate")
        material = {
            "capability": "rerank",
            "model": endpoint.model_id,
            "query": query,
            "candidates": [[cid, text] for cid, text in candidates],
        }
        transport = self._transport(endpoint)

        def fetch():
            scores = self._call(endpoint, transport.rerank, query, candidates)
            missing = [cid for cid, _ in candidates if cid not in scores]
            if missing:
                raise MalformedResponse(f"rerank response missing candidates: {missing}")
            values = {cid: float(scores[cid]) for cid, _ in candidates}
            if any(not np.isfinite(v) for v in values.values()):
                raise MalformedResponse("rerank scores must be finite")
            # Stable sort keeps input order among equal scores.
            order = sorted(
                range(len(candidates)), key=lambda i: -values[candidates[i][0]]
            )
            return [[candidates[i][0], values[candidates[i][0]]] for i in order]

        ranked = self._cached(endpoint, material, fetch)
        return [(cid, float(score)) for cid, score in ranked]
