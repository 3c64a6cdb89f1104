"""Episode configuration and the flat key=value scenario file format."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from enum import Enum

from ..economy import EconomyParams
from ..protocol import CollusionBehavior


class ConfigError(ValueError):
    pass


class Scenario(Enum):
    BASELINE = "baseline"   # no collusion, no reporting
    CNR = "cnr"             # collusion, nobody reports
    CVR = "cvr"             # collusion with one valid whistleblower
    CMR = "cmr"             # collusion + valid report + defamation reports


@dataclass(frozen=True)
class SimConfig:
    n_agents: int = 10
    n_ticks: int = 1000
    n_task_types: int = 5
    task_reward: int = 100
    task_cost: int = 0
    honesty_deposit: int = 1000
    reporting_deposit: int = 1000
    group_min: int = 2
    group_max: int = 5
    group_size: int = 0           # 0 = draw uniformly from [group_min, group_max]
    scenario: Scenario = Scenario.BASELINE
    behavior: CollusionBehavior = CollusionBehavior.RESOURCE_MONOPOLY
    temperature: float = 0.0
    ablate_anonymity: bool = False
    ablate_incentive: bool = False
    ablate_deposit: bool = False
    seed: int = 0
    replicas: int = 1000
    # world mechanics
    task_durations: tuple[int, ...] = (10, 12, 14, 16, 18)
    collusion_start_tick: int = 1
    verify_window: int = 50
    monopoly_threshold: float = 0.8
    blocking_threshold: int = 3
    # the offer a prospective colluder evaluates: expected extra tasks and
    # shirked tasks per member under the group's plan
    plan_extra_share: int = 30
    plan_shirked: int = 0
    softmax_scale: float = 1000.0
    n_defamers: int = 2
    mass_withdrawal: bool = False  # colluders abort mid-window to void the report
    manager_float: int = 0         # 0 = sized automatically
    initial_balance: int = 0       # 0 = sized automatically

    def __post_init__(self):
        if self.n_agents < 2:
            raise ConfigError("n_agents must be at least 2")
        if self.n_ticks < 1:
            raise ConfigError("n_ticks must be positive")
        if self.n_task_types != len(self.task_durations):
            raise ConfigError("task_durations must list one duration per task type")
        if any(d < 1 for d in self.task_durations):
            raise ConfigError("task durations must be positive")
        if not self.task_reward > self.task_cost >= 0:
            raise ConfigError("require task_reward > task_cost >= 0")
        if self.honesty_deposit < 0 or self.reporting_deposit < 0:
            raise ConfigError("deposits must be non-negative")
        if not 2 <= self.group_min <= self.group_max <= self.n_agents:
            raise ConfigError("need 2 <= group_min <= group_max <= n_agents")
        if self.group_size and not self.group_min <= self.group_size <= self.group_max:
            raise ConfigError("group_size outside [group_min, group_max]")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if self.replicas < 1:
            raise ConfigError("replicas must be positive")

    def economy(self) -> EconomyParams:
        return EconomyParams(
            n_agents=self.n_agents,
            n_tasks=self.n_ticks,  # one arrival per tick
            task_reward=self.task_reward,
            task_cost=self.task_cost,
            honesty_deposit=0 if self.ablate_deposit else self.honesty_deposit,
            reporting_deposit=0 if self.ablate_deposit else self.reporting_deposit,
        )

    def sized_manager_float(self) -> int:
        if self.manager_float:
            return self.manager_float
        pools = (self.n_defamers + 1) * self.group_max * self.honesty_deposit
        return self.n_ticks * self.task_reward + pools + 10_000

    def sized_initial_balance(self) -> int:
        if self.initial_balance:
            return self.initial_balance
        return 2 * max(self.honesty_deposit, self.reporting_deposit) + 1_000

    def baseline_twin(self) -> "SimConfig":
        """Same world, no collusion: the reference for task advantage.

        Fields that only matter once a collusion group exists are reset to
        defaults so one twin run serves every scenario variant at a seed.
        """
        return replace(
            self,
            scenario=Scenario.BASELINE,
            behavior=CollusionBehavior.RESOURCE_MONOPOLY,
            group_size=0,
            temperature=0.0,
            ablate_anonymity=False,
            ablate_incentive=False,
            ablate_deposit=False,
            mass_withdrawal=False,
            plan_extra_share=30,
            plan_shirked=0,
            n_defamers=2,
        )


_FIELDS = {f.name: f for f in fields(SimConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    raw = raw.strip()
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("float", float):
        return float(raw)
    if f.type in ("bool", bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if name == "scenario":
        return Scenario(raw.lower())
    if name == "behavior":
        return CollusionBehavior(raw.lower())
    if name == "task_durations":
        return tuple(int(x) for x in raw.split(","))
    raise ConfigError(f"{name}: unsupported config field type")


def apply_overrides(config: SimConfig, overrides: dict[str, str]) -> SimConfig:
    updates = {}
    for key, raw in overrides.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key: {key}")
        try:
            updates[key] = _coerce(key, raw)
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return replace(config, **updates) if updates else config


def parse_config_text(text: str) -> SimConfig:
    """Flat key = value lines; '#' starts a comment; unknown keys are errors."""
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key: {key}")
        overrides[key] = value
    return apply_overrides(SimConfig(), overrides)


def config_to_text(config: SimConfig) -> str:
    lines = []
    for f in fields(SimConfig):
        value = getattr(config, f.name)
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
