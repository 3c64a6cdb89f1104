"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


# -- economy calculators ------------------------------------------------------

class EconomyParamsModel(BaseModel):
    n_agents: int = 10
    n_tasks: int = 1000
    task_reward: int = 100
    task_cost: int = 0
    honesty_deposit: int = 1000
    reporting_deposit: int = 1000


class BoundsRequest(BaseModel):
    params: EconomyParamsModel = EconomyParamsModel()
    group_size: int = Field(2, ge=2)
    shirked_tasks: int = Field(0, ge=0)


class BoundsResponse(BaseModel):
    full_bound: str                 # exact rational, as "p/q"
    full_bound_rounded: int         # ceiling at the currency grain
    conservative_bound: str
    conservative_bound_rounded: int
    reporting_reward: int
    collusion_collateral_floor: int


class EquilibriaRequest(BaseModel):
    params: EconomyParamsModel = EconomyParamsModel()
    group_size: int = Field(2, ge=2, le=12)
    extra_share: int | None = Field(None, description="default: worst-case monopoly share")
    shirked_tasks: int = Field(0, ge=0)


class EquilibriaResponse(BaseModel):
    equilibria: list[list[str]]
    defection_dominates: bool
    margin: str                     # exact rational


class DefamationRequest(BaseModel):
    acceptance_probability: float = Field(ge=0.0, le=1.0)
    reporting_reward: int
    reporting_deposit: int


class DefamationResponse(BaseModel):
    expected_utility: float
    rational: bool                  # whether attacking has positive expectation


# -- simulation ---------------------------------------------------------------

class RunRequest(BaseModel):
    config_text: str | None = Field(None, description="flat key = value scenario file")
    overrides: dict[str, str] = Field(default_factory=dict)
    jobs: int = Field(1, ge=1, le=64)
    transcript_replica: int = Field(0, ge=0)


class AggregateModel(BaseModel):
    completion_rate: float
    success_rate: float
    avg_processing_time: float
    report_count: float
    verified_count: float
    collusion_rate: float


class RunResponse(BaseModel):
    replicas: int
    aggregate: AggregateModel
    metrics_csv: str
    transcript_jsonl: str
    txlog_csv: str


class SweepRequest(BaseModel):
    parameter: str = Field(description="honesty_deposit, temperature, or group_size")
    values: list[float]
    config_text: str | None = None
    overrides: dict[str, str] = Field(default_factory=dict)
    jobs: int = Field(1, ge=1, le=64)


class SweepRow(BaseModel):
    parameter: str
    value: float
    collusion_rate: float
    collusion_rate_std: float
    completion_rate: float
    completion_rate_std: float
    report_count: float
    verified_count: float


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    csv: str


class AblateRequest(BaseModel):
    config_text: str | None = None
    overrides: dict[str, str] = Field(default_factory=dict)
    jobs: int = Field(1, ge=1, le=64)


class AblateRow(BaseModel):
    variant: str
    collusion_rate: float
    collusion_rate_std: float
    completion_rate: float
    report_count: float
    verified_count: float


class AblateResponse(BaseModel):
    rows: list[AblateRow]
    csv: str


class AuditRequest(BaseModel):
    transcript_jsonl: str


class AuditResponse(BaseModel):
    ok: bool
    issues: list[str]
    rendered: str
