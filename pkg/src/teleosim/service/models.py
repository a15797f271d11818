"""Pydantic request/response models for the session service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..session import VARIANTS


class RunRequest(BaseModel):
    scenario: str
    variant: str = Field(pattern="^(" + "|".join(VARIANTS) + ")$")
    seed: int = 0
    channel: str = "inperson"
    channel_config: Optional[dict] = None  # overrides on top of the profile
    include_log: bool = False


class RunMetrics(BaseModel):
    scenario: str
    variant: str
    seed: int
    status: str
    completion_time: Optional[float]
    estop_count: int
    peak_force: float
    sim_time: float


class RunResponse(BaseModel):
    metrics: RunMetrics
    log: Optional[str] = None


class ReplayRequest(BaseModel):
    log: str  # JSON-lines session log content


class ReplayResponse(BaseModel):
    match: bool
    first_divergence: Optional[int]
    metrics: RunMetrics


class ReportRequest(BaseModel):
    logs: list[str]


class ReportRow(BaseModel):
    variant: str
    runs: int
    successes: int
    timeouts: int
    mean_time: Optional[float]
    std_time: Optional[float]
    estops: int


class ReportResponse(BaseModel):
    rows: list[ReportRow]
    csv: str
    table: str


class ScenarioSummary(BaseModel):
    name: str
    tags: list[str]
    timeout: float
    arms: list[int]
    props: int


class HealthResponse(BaseModel):
    status: str
    live_scenario: Optional[str] = None
    live_variant: Optional[str] = None
