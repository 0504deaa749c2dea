"""Pydantic request/response models for the HTTP service.

Non-finite numbers travel as the strings "NaN", "Infinity" and "-Infinity",
matching the trace file convention, so every payload stays valid JSON.
"""

from __future__ import annotations

from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field

Num = Union[float, int, str]


class HealthResponse(BaseModel):
    status: str
    version: str


class StatsRequest(BaseModel):
    values: list[Num]


class StatsResponse(BaseModel):
    stats: dict[str, Num]
    frozen: list[Num] = Field(description="the ten statistics in serialization order")
    n: int


class TraceValidateRequest(BaseModel):
    trace_jsonl: str


class TraceValidateResponse(BaseModel):
    ok: bool
    trial_id: Optional[str] = None
    epochs_run: int = 0
    layer_records: int = 0
    truncated_tail: bool = False
    warnings: list[str] = Field(default_factory=list)
    error: Optional[str] = None


class VerdictModel(BaseModel):
    indicator: str
    positive: bool
    benign: bool
    evidence: str


class DiagnosisModel(BaseModel):
    trial_id: str
    epoch: int
    decision: str
    verdicts: list[VerdictModel]


class DiagnoseRequest(BaseModel):
    trace_jsonl: str
    indicator_config: Optional[dict[str, Any]] = None
    epoch: Optional[int] = None


class DiagnoseResponse(BaseModel):
    trial_id: str
    reports: list[DiagnosisModel]
    first_positive_epoch: Optional[int] = None


class RunManifest(BaseModel):
    runner: str = "toy_mlp"
    policy: Literal["none", "bttackler", "msr"] = "bttackler"
    budget: str = "trials:8"
    concurrency: int = 8
    seed: int = 0
    out_dir: str
    experiment_id: Optional[str] = None
    space_file: Optional[str] = None
    indicator_config: Optional[dict[str, Any]] = None
    indicator_config_path: Optional[str] = None
    time_mode: Optional[Literal["sim", "real"]] = None
    checker_latency_ms: int = 0
    min_peers: int = 5


class RunResponse(BaseModel):
    experiment_id: str
    experiment_dir: str
    summary: dict[str, Any]
    summary_table: str


class ReplayRequest(BaseModel):
    trace_dir: str
    mode: Literal["combined", "per_indicator"] = "combined"
    indicator_config: Optional[dict[str, Any]] = None


class ReplayTrialModel(BaseModel):
    trial_id: str
    first_positive_epoch: Optional[int]
    triggering_indicators: list[str]
    decision: str
    epochs_run: int
    epochs_saved: int
    wall_saved_ms: int


class ReplayResponse(BaseModel):
    mode: str
    trials: list[ReplayTrialModel]
    indicator_counts: dict[str, int]
    estimated_epochs_saved: int
    estimated_wall_saved_ms: int
    warnings: list[str]
    table: str
    report_jsonl: str


class CalibrateRequest(BaseModel):
    trace_dir: str
    labels: dict[str, Literal["good", "bad"]]
    grid: list[dict[str, Any]]


class CalibrationRow(BaseModel):
    indicator_config: dict[str, Any]
    false_positive_rate: float
    false_negative_rate: float
    epochs_saved: int


class CalibrateResponse(BaseModel):
    ranked: list[CalibrationRow]


class CompareRequest(BaseModel):
    run_a: str
    run_b: str
    k: int = 10
    baseline_best: Optional[float] = None
    baseline_time_ms: Optional[int] = None


class CompareResponse(BaseModel):
    document: dict[str, Any]
    table: str
    timeline_csv: str


class SpaceListResponse(BaseModel):
    runners: list[str]


class SpaceResponse(BaseModel):
    space: dict[str, Any]
