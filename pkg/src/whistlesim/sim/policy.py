"""Rational join/refuse/defect decisions with softmax exploration.

Utilities come straight from the economy module, on the episode scale:

* refuse  -- the honest expected total;
* join    -- the plan's utility minus the honesty deposit at stake;
* defect  -- honest income plus the whistleblower reward, which already nets
  out the slashed bond and the refunded reporting deposit.

The ablations reshape the defect branch: without the reward pool a defector
still loses its slashed bond; without anonymity the cartel's collateral
(sized to the reward) claws the reward back.
"""

from __future__ import annotations

import math
from enum import Enum

from ..economy import (
    CollusionPlan,
    EconomyParams,
    collusion_total_utility,
    honest_total_utility,
    min_collusion_collateral,
    reporting_reward,
)


class Decision(Enum):
    JOIN = "join"
    REFUSE = "refuse"
    DEFECT = "defect"


def decision_utilities(
    p: EconomyParams,
    offer: CollusionPlan,
    *,
    ablate_anonymity: bool = False,
    ablate_incentive: bool = False,
) -> dict[Decision, float]:
    u_honest = float(honest_total_utility(p))
    u_join = float(collusion_total_utility(p, offer)) - p.honesty_deposit
    if ablate_incentive:
        # no reward pool: a valid report still slashes the defector's own bond
        u_defect = u_honest - p.honesty_deposit
    else:
        u_defect = u_honest + float(reporting_reward(offer.group_size, p.honesty_deposit))
    if ablate_anonymity:
        # identifiable defectors forfeit the cartel's collateral
        u_defect -= float(min_collusion_collateral(p.honesty_deposit, offer.group_size))
    return {Decision.JOIN: u_join, Decision.REFUSE: u_honest, Decision.DEFECT: u_defect}


# argmax tiebreak: prefer defection, then refusal
_TIEBREAK = [Decision.DEFECT, Decision.REFUSE, Decision.JOIN]


def agent_decide(
    p: EconomyParams,
    offer: CollusionPlan,
    temperature: float,
    rng,
    *,
    scale: float = 1000.0,
    ablate_anonymity: bool = False,
    ablate_incentive: bool = False,
    ablate_deposit: bool = False,
) -> Decision:
    """Sample a decision for an invited agent.

    With the deposit pillar removed there is no stake and no reward pool, so
    joining strictly dominates for any utility maximizer: the choice is
    deterministic, not sampled.
    """
    if ablate_deposit:
        return Decision.JOIN
    utils = decision_utilities(
        p, offer, ablate_anonymity=ablate_anonymity, ablate_incentive=ablate_incentive
    )
    if temperature == 0:
        best = max(utils.values())
        for choice in _TIEBREAK:
            if utils[choice] == best:
                return choice
    denom = scale * temperature
    peak = max(utils.values())
    weights = {c: math.exp((u - peak) / denom) for c, u in utils.items()}
    total = sum(weights.values())
    draw = rng.random() * total
    acc = 0.0
    for choice in _TIEBREAK:
        acc += weights[choice]
        if draw <= acc:
            return choice
    return _TIEBREAK[-1]
