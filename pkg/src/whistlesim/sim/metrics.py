"""Per-episode metrics and their CSV shapes."""

from __future__ import annotations

import io
import statistics
from dataclasses import dataclass, field

METRICS_SCHEMA = "metrics-v1"

_SYSTEM_COLUMNS = [
    "replica",
    "total_tasks",
    "completed_tasks",
    "failed_tasks",
    "unassigned_tasks",
    "in_progress_tasks",
    "completion_rate",
    "success_rate",
    "avg_processing_time",
    "report_count",
    "verified_count",
    "collusion_rate",
]


@dataclass
class AgentMetrics:
    agent_id: int
    role: str
    total_revenue: int
    task_advantage: float | None = None  # vs the matched baseline mean


@dataclass
class MetricsReport:
    total_tasks: int
    completed_tasks: int
    failed_tasks: int
    unassigned_tasks: int
    in_progress_tasks: int
    completion_rate: float
    success_rate: float
    avg_processing_time: float
    report_count: int
    verified_count: int
    collusion_rate: float
    agents: list[AgentMetrics] = field(default_factory=list)

    def __post_init__(self):
        parts = (
            self.completed_tasks
            + self.failed_tasks
            + self.unassigned_tasks
            + self.in_progress_tasks
        )
        if parts != self.total_tasks:
            raise ValueError("task state counts do not add up to the total")

    def agent(self, agent_id: int) -> AgentMetrics:
        return self.agents[agent_id]

    def revenues(self) -> list[int]:
        return [a.total_revenue for a in self.agents]


def csv_header(n_agents: int) -> str:
    cols = list(_SYSTEM_COLUMNS)
    for i in range(n_agents):
        cols += [f"agent{i}_revenue", f"agent{i}_advantage"]
    return ",".join(cols)


def _row_values(report: MetricsReport, replica: int | str) -> list:
    vals = [
        replica,
        report.total_tasks,
        report.completed_tasks,
        report.failed_tasks,
        report.unassigned_tasks,
        report.in_progress_tasks,
        round(report.completion_rate, 6),
        round(report.success_rate, 6),
        round(report.avg_processing_time, 6),
        report.report_count,
        report.verified_count,
        round(report.collusion_rate, 6),
    ]
    for a in report.agents:
        vals.append(a.total_revenue)
        vals.append("" if a.task_advantage is None else round(a.task_advantage, 6))
    return vals


def reports_to_csv(reports: list[MetricsReport]) -> str:
    """One row per replica plus mean and stdev aggregate rows."""
    if not reports:
        raise ValueError("no reports to serialize")
    n_agents = len(reports[0].agents)
    out = io.StringIO()
    out.write(f"# schema={METRICS_SCHEMA}\n")
    out.write(csv_header(n_agents) + "\n")
    rows = [_row_values(r, i) for i, r in enumerate(reports)]
    for row in rows:
        out.write(",".join(str(v) for v in row) + "\n")
    for label, fold in (("mean", statistics.fmean), ("stdev", _stdev)):
        agg = [label]
        for col in range(1, len(rows[0])):
            values = [row[col] for row in rows if row[col] != ""]
            agg.append(round(fold(values), 6) if values else "")
        out.write(",".join(str(v) for v in agg) + "\n")
    return out.getvalue()


def _stdev(values) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def mean_metric(reports: list[MetricsReport], attr: str) -> float:
    return statistics.fmean(getattr(r, attr) for r in reports)
