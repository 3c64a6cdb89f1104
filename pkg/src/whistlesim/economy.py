"""Closed-form utilities, deposit bounds, and the collude/defect game.

Everything is computed in exact rational arithmetic (fractions.Fraction):
deposit-bound comparisons are boundary-exact claims, and float drift at the
boundary would turn strict inequalities into coin flips. Currency amounts are
integer-grained; bound functions return exact fractions and callers ceil to
the grain (grain_ceil).

The per-task economics: an honest agent nets task_reward - task_cost per task
and expects n_tasks / n_agents tasks. A colluding agent inflates its share by
extra_share tasks and shirks shirked_tasks of the work while still collecting
reward for them. A whistleblower collects the honesty deposits of the other
group_size - 1 members.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

Utility = Fraction  # exact signed currency


class Choice(Enum):
    COLLUDE = "collude"
    DEFECT = "defect"


StrategyProfile = tuple[Choice, ...]


@dataclass(frozen=True)
class EconomyParams:
    n_agents: int
    n_tasks: int
    task_reward: int
    task_cost: int
    honesty_deposit: int
    reporting_deposit: int

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need at least 2 agents")
        if self.n_tasks < 1:
            raise ValueError("need at least 1 task")
        if not self.task_reward > self.task_cost >= 0:
            raise ValueError("require task_reward > task_cost >= 0")
        if self.honesty_deposit < 0 or self.reporting_deposit < 0:
            raise ValueError("deposits must be non-negative")

    @property
    def tasks_per_agent(self) -> Fraction:
        return Fraction(self.n_tasks, self.n_agents)


@dataclass(frozen=True)
class CollusionPlan:
    group_size: int
    extra_share: Fraction | int = 0   # extra tasks per colluder
    shirked_tasks: Fraction | int = 0  # paid-but-unexecuted tasks per colluder
    collateral: int = 0                # stake demanded by an anti-report cartel

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("a collusion group needs at least 2 members")
        if self.extra_share < 0 or self.shirked_tasks < 0 or self.collateral < 0:
            raise ValueError("plan quantities must be non-negative")

    def validate_against(self, p: EconomyParams) -> None:
        if self.group_size > p.n_agents:
            raise ValueError("group larger than the agent population")
        if self.shirked_tasks > p.tasks_per_agent + Fraction(self.extra_share):
            raise ValueError("cannot shirk more tasks than are allocated")


def grain_ceil(x: Fraction) -> int:
    """Round a bound up to the currency grain (1 unit)."""
    return math.ceil(x)


def honest_task_profit(p: EconomyParams) -> Utility:
    """Net profit from one honestly executed task."""
    return Fraction(p.task_reward - p.task_cost)


def honest_total_utility(p: EconomyParams) -> Utility:
    """Expected utility of an honest agent over the full task pool."""
    return p.tasks_per_agent * honest_task_profit(p)


def collusion_total_utility(p: EconomyParams, plan: CollusionPlan) -> Utility:
    """Per-member utility of executing the plan (inflated share, shirked work)."""
    plan.validate_against(p)
    share = p.tasks_per_agent + Fraction(plan.extra_share)
    executed = share - Fraction(plan.shirked_tasks)
    if executed < 0:
        raise ValueError("plan executes a negative number of tasks")
    return share * p.task_reward - executed * p.task_cost


def collusion_gain(p: EconomyParams, plan: CollusionPlan) -> Utility:
    """Advantage of the plan over honest execution (identity-checked in tests
    against collusion_total_utility - honest_total_utility)."""
    plan.validate_against(p)
    return Fraction(plan.extra_share) * honest_task_profit(p) + Fraction(
        plan.shirked_tasks
    ) * p.task_cost


def worst_case_extra_share(p: EconomyParams, group_size: int) -> Fraction:
    """Extra tasks per colluder when the group monopolizes the whole pool."""
    if not 2 <= group_size <= p.n_agents:
        raise ValueError("group size out of range")
    return Fraction(p.n_tasks, group_size) - p.tasks_per_agent


def worst_case_plan(p: EconomyParams, group_size: int, shirked: int = 0) -> CollusionPlan:
    return CollusionPlan(
        group_size=group_size,
        extra_share=worst_case_extra_share(p, group_size),
        shirked_tasks=shirked,
    )


def reporting_reward(group_size: int, honesty_deposit: int) -> Utility:
    """The whistleblower collects the deposits of the other members."""
    if group_size < 2:
        raise ValueError("reporting requires at least one co-conspirator")
    return Fraction((group_size - 1) * honesty_deposit)


def min_honesty_deposit_full(p: EconomyParams, group_size: int, shirked: int = 0) -> Fraction:
    """Deposit making the report reward cover the worst-case collusion payoff.

    Exact rational; callers round up with grain_ceil before using as currency.
    """
    u = collusion_total_utility(p, worst_case_plan(p, group_size, shirked))
    return u / (group_size - 1)


def min_honesty_deposit_conservative(p: EconomyParams) -> Fraction:
    """The group-size-independent bound (binding at a 2-member group, no shirking)."""
    return Fraction(p.n_tasks, 2) * honest_task_profit(p)


def min_collusion_collateral(honesty_deposit: int, group_size: int) -> Utility:
    """Stake an anti-report cartel must demand to offset the report reward."""
    if group_size < 2:
        raise ValueError("group size must be at least 2")
    return Fraction(honesty_deposit * (group_size - 1))


def defection_dominates(p: EconomyParams, plan: CollusionPlan) -> tuple[bool, Utility]:
    """Whether reporting strictly beats colluding, plus the signed margin.

    Exact equality at the bound counts as non-dominant (strict >).
    """
    margin = reporting_reward(plan.group_size, p.honesty_deposit) - collusion_total_utility(p, plan)
    return margin > 0, margin


def defamation_expected_utility(p_acc, reward, honesty_deposit) -> Utility:
    """Expected payoff of accusing honest agents: win reward with probability
    p_acc, forfeit the reporting deposit otherwise."""
    p_acc = Fraction(p_acc)
    if not 0 <= p_acc <= 1:
        raise ValueError("p_acc must be a probability")
    return p_acc * Fraction(reward) - (1 - p_acc) * Fraction(honesty_deposit)


# --- collude/defect game -----------------------------------------------------
#
# Payoffs depend only on the member's own choice and the number of defectors d:
#   collude, d == 0:  the plan's utility
#   collude, d >= 1:  -D_h (deposit slashed when the group is reported)
#   defect,  d >= 1:  uniform lottery over defectors under first-valid-report:
#                     the winner nets (group-1)*D_h; losers are slashed accused
#                     with their reporting deposit refunded, netting -D_h.
# This symmetry lets the exhaustive equilibrium check run per defector count
# instead of per profile; tests cross-check against a naive 2^n enumeration.

MAX_ENUMERATION_GROUP = 12


def _payoff_table(p: EconomyParams, plan: CollusionPlan) -> tuple[list[Utility], list[Utility]]:
    n = plan.group_size
    u_coll = collusion_total_utility(p, plan)
    r_rep = reporting_reward(n, p.honesty_deposit)
    d_h = Fraction(p.honesty_deposit)
    collude = [u_coll] + [-d_h] * n                       # index: defector count
    defect = [Fraction(0)] * (n + 1)
    for d in range(1, n + 1):
        defect[d] = r_rep / d + Fraction(d - 1, d) * (-d_h)
    return collude, defect


def enumerate_equilibria(p: EconomyParams, plan: CollusionPlan) -> set[StrategyProfile]:
    """All pure-strategy Nash equilibria of the collude/defect game.

    A profile is an equilibrium when no member strictly gains by a unilateral
    switch; exact ties keep both sides, so degenerate boundary cases return
    multiple profiles.
    """
    n = plan.group_size
    if n > MAX_ENUMERATION_GROUP:
        raise ValueError(f"group too large for exhaustive enumeration (> {MAX_ENUMERATION_GROUP})")
    collude, defect = _payoff_table(p, plan)

    equilibria: set[StrategyProfile] = set()
    for d in range(n + 1):
        colluder_stays = d == n or collude[d] >= defect[d + 1]
        defector_stays = d == 0 or defect[d] >= collude[d - 1]
        if colluder_stays and defector_stays:
            for defectors in itertools.combinations(range(n), d):
                profile = [Choice.COLLUDE] * n
                for i in defectors:
                    profile[i] = Choice.DEFECT
                equilibria.add(tuple(profile))
    return equilibria


def all_defect_profile(group_size: int) -> StrategyProfile:
    return tuple([Choice.DEFECT] * group_size)


def all_collude_profile(group_size: int) -> StrategyProfile:
    return tuple([Choice.COLLUDE] * group_size)
