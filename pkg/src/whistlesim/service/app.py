"""FastAPI service exposing the calculators, the simulator, and the auditor.

The CLI is a thin client of these endpoints; anything it can do, any other
HTTP client can do. Experiment endpoints are synchronous: a request runs the
replicas and returns the CSV payloads in the response body.
"""

from __future__ import annotations

import io
import statistics

from fastapi import FastAPI, HTTPException

from .. import __version__, economy
from ..audit import audit_transcript
from ..economy import CollusionPlan, EconomyParams
from ..sim import (
    ConfigError,
    ReplicaRunner,
    Scenario,
    SimConfig,
    apply_overrides,
    parse_config_text,
    reports_to_csv,
)
from ..sim.metrics import MetricsReport
from . import schemas

SWEEP_SCHEMA = "sweep-v1"
ABLATION_SCHEMA = "ablation-v1"

app = FastAPI(
    title="whistlesim",
    description="Anti-collusion incentive mechanism: bounds, equilibria, "
    "reporting protocol simulation, and transcript audits.",
    version="0.1.0",
)


def _economy_params(model: schemas.EconomyParamsModel) -> EconomyParams:
    try:
        return EconomyParams(**model.model_dump())
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _build_config(config_text: str | None, overrides: dict[str, str]) -> SimConfig:
    try:
        config = parse_config_text(config_text) if config_text else SimConfig()
        return apply_overrides(config, overrides)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _aggregate(reports: list[MetricsReport]) -> schemas.AggregateModel:
    def mean(attr):
        return statistics.fmean(getattr(r, attr) for r in reports)

    return schemas.AggregateModel(
        completion_rate=mean("completion_rate"),
        success_rate=mean("success_rate"),
        avg_processing_time=mean("avg_processing_time"),
        report_count=mean("report_count"),
        verified_count=mean("verified_count"),
        collusion_rate=mean("collusion_rate"),
    )


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/economy/bounds", response_model=schemas.BoundsResponse)
def bounds(req: schemas.BoundsRequest) -> schemas.BoundsResponse:
    p = _economy_params(req.params)
    try:
        full = economy.min_honesty_deposit_full(p, req.group_size, req.shirked_tasks)
        conservative = economy.min_honesty_deposit_conservative(p)
        reward = economy.reporting_reward(req.group_size, p.honesty_deposit)
        collateral = economy.min_collusion_collateral(p.honesty_deposit, req.group_size)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return schemas.BoundsResponse(
        full_bound=str(full),
        full_bound_rounded=economy.grain_ceil(full),
        conservative_bound=str(conservative),
        conservative_bound_rounded=economy.grain_ceil(conservative),
        reporting_reward=int(reward),
        collusion_collateral_floor=int(collateral),
    )


@app.post("/economy/equilibria", response_model=schemas.EquilibriaResponse)
def equilibria(req: schemas.EquilibriaRequest) -> schemas.EquilibriaResponse:
    p = _economy_params(req.params)
    try:
        extra = (
            req.extra_share
            if req.extra_share is not None
            else economy.worst_case_extra_share(p, req.group_size)
        )
        plan = CollusionPlan(req.group_size, extra, req.shirked_tasks)
        eqs = economy.enumerate_equilibria(p, plan)
        dominant, margin = economy.defection_dominates(p, plan)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    rendered = sorted([c.value for c in profile] for profile in eqs)
    return schemas.EquilibriaResponse(
        equilibria=rendered, defection_dominates=dominant, margin=str(margin)
    )


@app.post("/economy/defamation", response_model=schemas.DefamationResponse)
def defamation(req: schemas.DefamationRequest) -> schemas.DefamationResponse:
    value = economy.defamation_expected_utility(
        req.acceptance_probability, req.reporting_reward, req.reporting_deposit
    )
    return schemas.DefamationResponse(expected_utility=float(value), rational=value > 0)


@app.post("/simulation/run", response_model=schemas.RunResponse)
def run(req: schemas.RunRequest) -> schemas.RunResponse:
    config = _build_config(req.config_text, req.overrides)
    runner = ReplicaRunner(jobs=req.jobs)
    results = runner.run(config)
    reports = [r.metrics for r in results]
    replica = min(req.transcript_replica, len(results) - 1)
    return schemas.RunResponse(
        replicas=config.replicas,
        aggregate=_aggregate(reports),
        metrics_csv=reports_to_csv(reports),
        transcript_jsonl=results[replica].transcript_jsonl,
        txlog_csv=results[replica].txlog_csv,
    )


_SWEEPABLE = ("honesty_deposit", "temperature", "group_size")


@app.post("/simulation/sweep", response_model=schemas.SweepResponse)
def sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
    if req.parameter not in _SWEEPABLE:
        raise HTTPException(400, detail=f"sweepable parameters are {_SWEEPABLE}")
    if not req.values:
        raise HTTPException(400, detail="sweep grid is empty")
    if any(b <= a for a, b in zip(req.values, req.values[1:])):
        raise HTTPException(400, detail="sweep grid must be strictly increasing")
    config = _build_config(req.config_text, req.overrides)
    if config.scenario is Scenario.BASELINE:
        # the collusion-rate column needs invited agents to decide
        config = apply_overrides(config, {"scenario": "cnr"})
    runner = ReplicaRunner(jobs=req.jobs)

    rows = []
    for value in req.values:
        raw = str(value) if req.parameter == "temperature" else str(int(value))
        overrides = {req.parameter: raw}
        if req.parameter == "honesty_deposit":
            # the two deposits are a matched pair in the mechanism
            overrides["reporting_deposit"] = raw
        point = apply_overrides(config, overrides)
        reports = runner.run_metrics(point)
        rates = [r.collusion_rate for r in reports]
        completions = [r.completion_rate for r in reports]
        rows.append(
            schemas.SweepRow(
                parameter=req.parameter,
                value=value,
                collusion_rate=statistics.fmean(rates),
                collusion_rate_std=statistics.pstdev(rates),
                completion_rate=statistics.fmean(completions),
                completion_rate_std=statistics.pstdev(completions),
                report_count=statistics.fmean(r.report_count for r in reports),
                verified_count=statistics.fmean(r.verified_count for r in reports),
            )
        )
    return schemas.SweepResponse(rows=rows, csv=_sweep_csv(rows))


def _sweep_csv(rows: list[schemas.SweepRow]) -> str:
    out = io.StringIO()
    out.write(f"# schema={SWEEP_SCHEMA}\n")
    cols = list(schemas.SweepRow.model_fields)
    out.write(",".join(cols) + "\n")
    for row in rows:
        out.write(",".join(str(getattr(row, c)) for c in cols) + "\n")
    return out.getvalue()


_ABLATION_VARIANTS = [
    ("full", {}),
    ("wo_anonymity", {"ablate_anonymity": "true"}),
    ("wo_incentive", {"ablate_incentive": "true"}),
    ("wo_deposit", {"ablate_deposit": "true"}),
]


@app.post("/simulation/ablate", response_model=schemas.AblateResponse)
def ablate(req: schemas.AblateRequest) -> schemas.AblateResponse:
    config = _build_config(req.config_text, req.overrides)
    if config.scenario is Scenario.BASELINE:
        config = apply_overrides(config, {"scenario": "cnr"})
    runner = ReplicaRunner(jobs=req.jobs)
    rows = []
    for variant, flags in _ABLATION_VARIANTS:
        reports = runner.run_metrics(apply_overrides(config, flags))
        rates = [r.collusion_rate for r in reports]
        rows.append(
            schemas.AblateRow(
                variant=variant,
                collusion_rate=statistics.fmean(rates),
                collusion_rate_std=statistics.pstdev(rates),
                completion_rate=statistics.fmean(r.completion_rate for r in reports),
                report_count=statistics.fmean(r.report_count for r in reports),
                verified_count=statistics.fmean(r.verified_count for r in reports),
            )
        )
    return schemas.AblateResponse(rows=rows, csv=_ablate_csv(rows))


def _ablate_csv(rows: list[schemas.AblateRow]) -> str:
    out = io.StringIO()
    out.write(f"# schema={ABLATION_SCHEMA}\n")
    cols = list(schemas.AblateRow.model_fields)
    out.write(",".join(cols) + "\n")
    for row in rows:
        out.write(",".join(str(getattr(row, c)) for c in cols) + "\n")
    return out.getvalue()


@app.post("/audit", response_model=schemas.AuditResponse)
def audit(req: schemas.AuditRequest) -> schemas.AuditResponse:
    try:
        report = audit_transcript(req.transcript_jsonl)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return schemas.AuditResponse(ok=report.ok, issues=report.issues, rendered=report.render())
