"""Multi-agent task-economy simulation: scenarios, policies, metrics."""

from .config import ConfigError, Scenario, SimConfig, apply_overrides, config_to_text, parse_config_text
from .engine import Episode, EpisodeResult, run_episode
from .metrics import AgentMetrics, MetricsReport, reports_to_csv
from .policy import Decision, agent_decide, decision_utilities
from .runner import ReplicaRunner

__all__ = [
    "AgentMetrics",
    "ConfigError",
    "Decision",
    "Episode",
    "EpisodeResult",
    "MetricsReport",
    "ReplicaRunner",
    "Scenario",
    "SimConfig",
    "agent_decide",
    "apply_overrides",
    "config_to_text",
    "decision_utilities",
    "parse_config_text",
    "reports_to_csv",
    "run_episode",
]
