"""Endpoint configuration: file schema, environment overrides, and defaults.

A config file (JSON or YAML, chosen by extension) looks like::

    {
      "endpoints": {
        "embed":    {"base_url": "http://host/v1/embeddings", "model_id": "all-MiniLM-L6-v2"},
        "generate": {"base_url": "fixture:tests/fixtures/gateway.json", "model_id": "judge"},
        "nli":      {...}, "score": {...}, "rerank": {...}
      },
      "nugget_thresholds": {"my-embedder": 0.61},
      "raw_cosine_fallback": 0.75
    }

``base_url`` values starting with ``fixture:`` point the gateway at a canned
response file instead of the network. Environment variables override file
values: ``BIOACE_<CAPABILITY>_BASE_URL``, ``BIOACE_<CAPABILITY>_MODEL_ID``,
``BIOACE_<CAPABILITY>_API_KEY``, and ``BIOACE_API_KEY`` as a shared key.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigError

CAPABILITIES = ("embed", "generate", "nli", "score", "rerank")

# Tuned alignment-probability cutoffs shipped per embedding model; "auto"
# threshold selection resolves against this table (extendable via config).
DEFAULT_PROBABILITY_THRESHOLDS = {
    "all-MiniLM-L6-v2": 0.6267,
    "sup-simcse-roberta-large": 0.6035,
    "all-mpnet-base-v2": 0.6211,
}

DEFAULT_RAW_COSINE_FALLBACK = 0.75


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_id: str
    capability: str
    max_in_flight: int = 4
    timeout: float = 30.0
    temperature: float = 0.0
    api_key: str | None = None

    def __post_init__(self):
        if self.capability not in CAPABILITIES:
            raise ConfigError(f"unknown capability: {self.capability!r}")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")


@dataclass
class GatewayConfig:
    endpoints: dict[str, EndpointConfig] = field(default_factory=dict)
    nugget_thresholds: dict[str, float] = field(default_factory=dict)
    raw_cosine_fallback: float = DEFAULT_RAW_COSINE_FALLBACK

    def endpoint_for(self, capability: str, model_id: str | None = None) -> EndpointConfig:
        endpoint = self.endpoints.get(capability)
        if endpoint is None:
            raise ConfigError(f"no endpoint configured for capability {capability!r}")
        if model_id:
            endpoint = replace(endpoint, model_id=model_id)
        return endpoint

    def threshold_for(self, model_id: str) -> float:
        table = {**DEFAULT_PROBABILITY_THRESHOLDS, **self.nugget_thresholds}
        if model_id not in table:
            raise ConfigError(
                f"no shipped probability threshold for embedding model {model_id!r}; "
                f"pass an explicit threshold or add it to nugget_thresholds"
            )
        return table[model_id]


def _apply_env(capability: str, raw: dict) -> dict:
    prefix = f"BIOACE_{capability.upper()}_"
    out = dict(raw)
    if os.environ.get(prefix + "BASE_URL"):
        out["base_url"] = os.environ[prefix + "BASE_URL"]
    if os.environ.get(prefix + "MODEL_ID"):
        out["model_id"] = os.environ[prefix + "MODEL_ID"]
    api_key = os.environ.get(prefix + "API_KEY") or os.environ.get("BIOACE_API_KEY")
    if api_key:
        out["api_key"] = api_key
    return out


def load_config(path: str | Path | None) -> GatewayConfig:
    """Load a gateway config file; ``None`` yields an endpoint-less config."""
    if path is None:
        return GatewayConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        raw = yaml.safe_load(text) or {}
    else:
        raw = json.loads(text)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")

    endpoints = {}
    for capability, entry in (raw.get("endpoints") or {}).items():
        if capability not in CAPABILITIES:
            raise ConfigError(f"unknown capability in config: {capability!r}")
        if not isinstance(entry, dict):
            raise ConfigError(f"endpoint entry for {capability!r} must be an object")
        entry = _apply_env(capability, entry)
        missing = [k for k in ("base_url", "model_id") if not entry.get(k)]
        if missing:
            raise ConfigError(f"endpoint {capability!r} missing fields: {missing}")
        known = ("base_url", "model_id", "max_in_flight", "timeout", "temperature", "api_key")
        kwargs = {k: entry[k] for k in known if k in entry}
        endpoints[capability] = EndpointConfig(capability=capability, **kwargs)

    thresholds = raw.get("nugget_thresholds") or {}
    if not isinstance(thresholds, dict):
        raise ConfigError("nugget_thresholds must be an object")

    return GatewayConfig(
        endpoints=endpoints,
        nugget_thresholds={str(k): float(v) for k, v in thresholds.items()},
        raw_cosine_fallback=float(
            raw.get("raw_cosine_fallback", DEFAULT_RAW_COSINE_FALLBACK)
        ),
    )
