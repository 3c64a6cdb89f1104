"""Replica orchestration: baseline twins, parallel execution, stable merges.

Replica i of any scenario shares its world seed streams with replica i of the
matched baseline, so task-advantage comparisons subtract like from like. The
baseline revenue vectors are computed once and reused across scenario runs.
Parallel execution partitions replicas across processes and merges results in
replica order, so the output is byte-identical at any parallelism degree.
"""

from __future__ import annotations

from multiprocessing import get_context

from .config import Scenario, SimConfig
from .engine import EpisodeResult, run_episode
from .metrics import MetricsReport


def _baseline_revenues(args: tuple[SimConfig, int]) -> list[int]:
    config, replica = args
    return run_episode(config, replica).metrics.revenues()


def _scenario_episode(args: tuple[SimConfig, int, list[int] | None]) -> EpisodeResult:
    config, replica, baseline = args
    return run_episode(config, replica, baseline_revenues=baseline)


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with get_context("fork").Pool(processes=jobs) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (jobs * 4)))


class ReplicaRunner:
    """Runs replica batches, caching baseline twins per replica index."""

    def __init__(self, jobs: int = 1):
        self.jobs = jobs
        self._baseline_cache: dict[tuple, list[list[int]]] = {}

    def baseline_revenues(self, config: SimConfig, replicas: int) -> list[list[int]]:
        twin = config.baseline_twin()
        key = (twin, replicas)
        if key not in self._baseline_cache:
            work = [(twin, i) for i in range(replicas)]
            self._baseline_cache[key] = _map(_baseline_revenues, work, self.jobs)
        return self._baseline_cache[key]

    def run(self, config: SimConfig) -> list[EpisodeResult]:
        replicas = config.replicas
        if config.scenario is Scenario.BASELINE:
            baselines: list[list[int] | None] = [None] * replicas
        else:
            baselines = list(self.baseline_revenues(config, replicas))
        work = [(config, i, baselines[i]) for i in range(replicas)]
        return _map(_scenario_episode, work, self.jobs)

    def run_metrics(self, config: SimConfig) -> list[MetricsReport]:
        return [r.metrics for r in self.run(config)]
