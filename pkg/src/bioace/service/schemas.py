"""Pydantic request/response models for the evaluation service.

Requests reference corpus files by path: the service and its clients share a
filesystem (the CLI mounts the app in-process by default, so this is always
true there; remote deployments need a shared volume).
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class CorpusPaths(BaseModel):
    dir: str | None = None
    questions: str | None = None
    documents: str | None = None
    runs: str | None = None
    nuggets: str | None = None
    judgments: str | None = None


class GatewaySettings(BaseModel):
    config: str | None = None
    cache_dir: str | None = None
    max_in_flight: int | None = Field(default=None, ge=1)


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateRequest(BaseModel):
    corpus: CorpusPaths


class ViolationModel(BaseModel):
    code: str
    record_id: str
    message: str


class ValidateResponse(BaseModel):
    violations: list[ViolationModel]


class BuildIndexRequest(BaseModel):
    documents: str
    out: str
    min_token_len: int = Field(default=2, ge=1)


class BuildIndexResponse(BaseModel):
    doc_count: int
    avg_doc_length: float
    out: str


class EvalNuggetsRequest(BaseModel):
    corpus: CorpusPaths
    gateway: GatewaySettings = GatewaySettings()
    embed_model: str | None = None
    threshold: float | Literal["auto"] = "auto"
    one_to_one: bool = False
    bgmm_seed: int = 0
    out_dir: str | None = None


class EvalCompletenessRequest(BaseModel):
    corpus: CorpusPaths
    gateway: GatewaySettings = GatewaySettings()
    gen_model: str | None = None
    out_dir: str | None = None


class EvalCorrectnessRequest(BaseModel):
    corpus: CorpusPaths
    gateway: GatewaySettings = GatewaySettings()
    mode: Literal["classify", "simnli", "topk"]
    judge: Literal["gen", "nli", "cosine"] = "gen"
    window: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    seed: int = 13
    judge_threshold: float = 0.75
    supporting_only: bool = False
    swap_negative: bool = False
    deterministic_deciding: bool = False
    index: str | None = None
    k_list: list[int] = Field(
        default_factory=lambda: [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
    )
    retrieve_k: int = Field(default=1000, ge=1)
    out_dir: str | None = None


class EvalCitationsRequest(BaseModel):
    corpus: CorpusPaths
    gateway: GatewaySettings = GatewaySettings()
    setting: Literal["doc", "maxsim", "nuggets"]
    scheme: Literal["binary", "ternary"] = "binary"
    judge: Literal["gen", "score", "pairwise-oracle"] = "gen"
    score_threshold: float | None = None
    fit_threshold: str | None = None  # path to a {"score","label"} JSONL train set
    lenient_supports: bool = False
    out_dir: str | None = None


class EvalResponse(BaseModel):
    results: dict
    files: list[str] = []


class TrainingPairsRequest(BaseModel):
    corpus: CorpusPaths
    window: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    out: str


class TrainingPairsResponse(BaseModel):
    count: int
    out: str


class FitScoreThresholdRequest(BaseModel):
    train: str  # path to a {"score","label"} JSONL file


class FitScoreThresholdResponse(BaseModel):
    threshold: float | str  # "-inf"/"inf" when the optimum is a sentinel
    f1: float


class RankRequest(BaseModel):
    metrics: dict[str, float] | None = None
    metrics_path: str | None = None
    reference: dict[str, float] | None = None
    reference_path: str | None = None
    metric_name: str = "metric"


class CorrelationModel(BaseModel):
    spearman: float
    kendall: float
    n: int


class RankResponse(BaseModel):
    metric_name: str
    ranks: dict[str, float]
    correlation: CorrelationModel | None = None


class ReportRequest(BaseModel):
    results_path: str
    out_dir: str


class ReportResponse(BaseModel):
    files: list[str]


class ErrorBody(BaseModel):
    type: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody
