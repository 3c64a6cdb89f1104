"""Discrete-time task economy with collusion behaviors and protocol wiring.

Each tick: one task arrives at the station serving its type, idle agents claim
in per-tick random order (tasks with no queue first, then shortest queue,
ties by lowest id), work advances, and completed tasks pay out. The arrival
rate outpaces aggregate service capacity, so a backlog forms and completion
is capacity-bound -- which is exactly what lets the two collusion behaviors
move the numbers:

* resource monopoly -- colluders claim in a sub-round before everyone else,
  always taking the fastest-paying (shortest) tasks and never queuing behind
  a groupmate. Their revenue rises, honest agents inherit the slow tasks, and
  system completion drifts up slightly with group size.
* spatial blocking -- a designated member squats the fastest-paying station
  without working. Non-members cannot claim there; the other colluders harvest
  the blocked backlog exclusively. System completion drops hard for small
  groups and recovers as the group grows.

Scenario scripts (who reports, who defames) ride on top; the protocol module
handles verification and settlement against the world's public event log.
"""

from __future__ import annotations

import random
import statistics
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .. import crypto
from ..audit import build_transcript
from ..economy import CollusionPlan
from ..ledger import BondingContract, Ledger
from ..protocol import (
    BehaviorEvent,
    CollusionBehavior,
    Evidence,
    Manager,
    ReportCase,
    VerificationPolicy,
    build_evidence_submission,
    build_report,
)
from .config import Scenario, SimConfig
from .metrics import AgentMetrics, MetricsReport
from .policy import Decision, agent_decide


class AgentRole(Enum):
    HONEST = "honest"
    COLLUDER = "colluder"
    WHISTLEBLOWER = "whistleblower"
    MALICIOUS_REPORTER = "malicious_reporter"


@dataclass
class Task:
    id: int
    ttype: int
    duration: int
    station: int
    arrival_tick: int
    claim_tick: int | None = None
    complete_tick: int | None = None
    claimed_by: int | None = None
    completed: bool = False
    queue: list[int] = field(default_factory=list)  # agents waiting behind the claimer


@dataclass
class Agent:
    id: int
    addr: str
    role: AgentRole = AgentRole.HONEST
    current_task: Task | None = None
    queued_on: Task | None = None
    station: int | None = None
    completions: int = 0
    active_completions: int = 0  # while the collusion group was active

    @property
    def idle(self) -> bool:
        return self.current_task is None and self.queued_on is None


@dataclass
class World:
    config: SimConfig
    tick: int = 0
    tasks: list[Task] = field(default_factory=list)
    pools: list[deque] = field(default_factory=list)   # unclaimed tasks per station
    agents: list[Agent] = field(default_factory=list)
    group: list[int] = field(default_factory=list)
    plan: CollusionPlan | None = None
    group_active: bool = False
    blocker: int | None = None
    blocked_station: int | None = None
    events: list[BehaviorEvent] = field(default_factory=list)
    occupy_by_agent: dict[int, int] = field(default_factory=dict)
    decisions: dict[int, Decision] = field(default_factory=dict)
    completed_count: int = 0


@dataclass
class EpisodeResult:
    metrics: MetricsReport
    transcript_jsonl: str
    txlog_csv: str


MANAGER_ADDR = "manager"


def _agent_addr(i: int) -> str:
    return f"agent-{i}"


class Episode:
    """One seeded episode: world, ledger, and (for CVR/CMR) the live protocol."""

    def __init__(self, config: SimConfig, replica: int = 0):
        self.config = config
        self.replica = replica
        base = f"{config.seed}:{replica}"
        self.rng_tasks = random.Random(base + ":tasks")
        self.rng_order = random.Random(base + ":order")
        self.rng_roles = random.Random(base + ":roles")
        self.rng_policy = random.Random(base + ":policy")
        self.rng_crypto = random.Random(base + ":crypto")

        self.ledger = Ledger(delta_ticks=1)
        self.world = World(config=config)
        self.world.pools = [deque() for _ in range(config.n_task_types)]
        self.manager: Manager | None = None
        self.agent_keys: list[crypto.KeyPair] = []
        self.bonds: dict[int, BondingContract] = {}
        self.anon_owner: dict[str, int] = {}   # anon ledger address -> agent id
        self.start_worth: dict[int, int] = {}
        self._completions_due: dict[int, list[Task]] = {}
        self._withdrawal_tick: int | None = None
        self._setup()

    # -- setup ----------------------------------------------------------------

    def _setup(self) -> None:
        cfg = self.config
        self.ledger.open_account(MANAGER_ADDR)
        self.ledger.mint(MANAGER_ADDR, cfg.sized_manager_float())

        # reporting needs stakes on both sides: no deposits, no mechanism
        needs_protocol = (
            cfg.scenario in (Scenario.CVR, Scenario.CMR)
            and cfg.honesty_deposit > 0
            and not cfg.ablate_deposit
        )
        if needs_protocol:
            manager_kp = crypto.keygen(self.rng_crypto.randbytes(32))
            self.manager = Manager(
                manager_kp,
                self.ledger,
                honesty_deposit=cfg.honesty_deposit,
                address=MANAGER_ADDR,
                policy=VerificationPolicy(
                    window=cfg.verify_window,
                    monopoly_threshold=cfg.monopoly_threshold,
                    blocking_threshold=cfg.blocking_threshold,
                ),
            )

        bond_amount = 0 if cfg.ablate_deposit else cfg.honesty_deposit
        for i in range(cfg.n_agents):
            addr = _agent_addr(i)
            self.ledger.open_account(addr)
            self.ledger.mint(addr, cfg.sized_initial_balance())
            agent = Agent(id=i, addr=addr)
            self.world.agents.append(agent)
            bond = None
            if bond_amount > 0:
                bond = self.ledger.lock_bond(addr, bond_amount)
                self.bonds[i] = bond
            if needs_protocol:
                kp = crypto.keygen(self.rng_crypto.randbytes(32))
                self.agent_keys.append(kp)
                self.manager.register_agent(i, kp.public, bond)

        self._assign_roles()
        for agent in self.world.agents:
            self.start_worth[agent.id] = self._net_worth(agent.id)
        if self.manager is not None:
            self._file_reports()

    def _assign_roles(self) -> None:
        cfg = self.config
        if cfg.scenario is Scenario.BASELINE:
            return
        k = cfg.group_size or self.rng_roles.randint(cfg.group_min, cfg.group_max)
        self.world.group = sorted(self.rng_roles.sample(range(cfg.n_agents), k))
        self.world.plan = CollusionPlan(
            group_size=k,
            extra_share=cfg.plan_extra_share,
            shirked_tasks=cfg.plan_shirked,
        )
        for i in self.world.group:
            self.world.agents[i].role = AgentRole.COLLUDER
        if cfg.scenario in (Scenario.CVR, Scenario.CMR):
            self.world.agents[self.world.group[0]].role = AgentRole.WHISTLEBLOWER
        if cfg.behavior is CollusionBehavior.SPATIAL_BLOCKING:
            self.world.blocker = self.world.group[-1]
        if cfg.scenario is Scenario.CMR:
            outsiders = sorted(set(range(cfg.n_agents)) - set(self.world.group))
            for i in self.rng_roles.sample(outsiders, cfg.n_defamers):
                self.world.agents[i].role = AgentRole.MALICIOUS_REPORTER

        # the join/refuse/defect decisions of the invited agents feed the
        # collusion-rate metric; the scenario scripts the behavior regardless
        econ = cfg.economy()
        for i in self.world.group:
            self.world.decisions[i] = agent_decide(
                econ,
                self.world.plan,
                cfg.temperature,
                self.rng_policy,
                scale=cfg.softmax_scale,
                ablate_anonymity=cfg.ablate_anonymity,
                ablate_incentive=cfg.ablate_incentive,
                ablate_deposit=cfg.ablate_deposit,
            )

    def _file_reports(self) -> None:
        """Step 1 for every reporter in this scenario, at tick 0."""
        cfg = self.config
        reporters: list[tuple[int, tuple[int, ...]]] = []
        wb = self.world.group[0]
        reporters.append((wb, tuple(self.world.group)))
        if cfg.scenario is Scenario.CMR:
            honest_pool = sorted(
                a.id for a in self.world.agents
                if a.id not in self.world.group
            )
            for agent in self.world.agents:
                if agent.role is AgentRole.MALICIOUS_REPORTER:
                    others = [i for i in honest_pool if i != agent.id]
                    accused = sorted(
                        [agent.id]
                        + self.rng_roles.sample(others, len(self.world.group) - 1)
                    )
                    reporters.append((agent.id, tuple(accused)))
        reporters.sort()

        self._cases: list[tuple[ReportCase, int, tuple[int, ...]]] = []
        ring = self.manager.agent_ring()
        for reporter_id, accused in reporters:
            secret, anon_pub = crypto.anon_address(self.rng_crypto.randbytes(32))
            anon_addr = anon_pub.data.hex()
            self.ledger.open_account(anon_addr)
            self.anon_owner[anon_addr] = reporter_id
            submission = build_report(
                self.agent_keys[reporter_id],
                group_size=len(accused),
                t_now=0,
                all_public_keys=ring,
                manager_pk=self.manager.keypair.public,
                anon_address=anon_pub,
                rng=self.rng_crypto,
            )
            case, err = self.manager.receive_report(submission, tick=0)
            if err is not None:
                raise RuntimeError(f"scripted report rejected: {err}")
            self._cases.append((case, reporter_id, accused))
        if cfg.mass_withdrawal:
            self._withdrawal_tick = 2

    def _submit_deposits_and_evidence(self, tick: int) -> None:
        """Step 3 for every filed report (the tick after funding confirms)."""
        ring = self.manager.agent_ring()
        for case, reporter_id, accused in self._cases:
            anon_addr = case.payload.anon_address.data.hex()
            self.ledger.transfer(
                _agent_addr(reporter_id), anon_addr, case.contract.deposit_required
            )
            self.manager.receive_deposit(case, tick)
            evidence = Evidence(
                behavior=self.config.behavior,
                accused=accused,
                report_time=case.payload.report_time,
            )
            submission = build_evidence_submission(
                self.agent_keys[reporter_id],
                evidence,
                ring,
                self.manager.keypair.public,
                rng=self.rng_crypto,
            )
            _, err = self.manager.receive_evidence(submission, tick)
            if err is not None:
                raise RuntimeError(f"scripted evidence rejected: {err}")

    # -- net worth / metrics ----------------------------------------------------

    def _net_worth(self, agent_id: int) -> int:
        worth = self.ledger.balance(_agent_addr(agent_id))
        bond = self.bonds.get(agent_id)
        if bond is not None and bond.status.value == "locked":
            worth += bond.amount
        for anon_addr, owner in self.anon_owner.items():
            if owner == agent_id:
                worth += self.ledger.balance(anon_addr)
        return worth

    # -- per-tick phases ----------------------------------------------------

    def _arrive(self, tick: int) -> None:
        ttype = self.rng_tasks.randrange(self.config.n_task_types)
        task = Task(
            id=len(self.world.tasks),
            ttype=ttype,
            duration=self.config.task_durations[ttype],
            station=ttype,
            arrival_tick=tick,
        )
        self.world.tasks.append(task)
        self.world.pools[ttype].append(task)

    def _move_blocker(self, tick: int) -> None:
        # the key position is the fastest-paying station: squatting it denies
        # outsiders the best tasks, and groupmates harvest its backlog alone
        w = self.world
        blocker = w.agents[w.blocker]
        if w.blocked_station is None:
            durations = self.config.task_durations
            w.blocked_station = min(range(len(durations)), key=lambda s: durations[s])
        blocker.station = w.blocked_station
        w.events.append(BehaviorEvent(tick, blocker.id, "occupy", True))
        w.occupy_by_agent[blocker.id] = w.occupy_by_agent.get(blocker.id, 0) + 1

    def _claim_order(self) -> list[Agent]:
        w = self.world
        idle = [a for a in w.agents if a.idle]
        if w.group_active:
            group = set(w.group)
            if w.blocker is not None:
                group.discard(w.blocker)
            members = [a for a in idle if a.id in group]
            others = [a for a in idle if a.id not in group and a.id != w.blocker]
            self.rng_order.shuffle(members)
            self.rng_order.shuffle(others)
            return members + others
        self.rng_order.shuffle(idle)
        return idle

    def _claim_phase(self, tick: int) -> None:
        w = self.world
        cfg = self.config
        group = set(w.group) if w.group_active else set()
        colluder_claimed = False
        for agent in self._claim_order():
            is_colluder = agent.id in group
            blocked = w.blocked_station if w.group_active else None

            open_stations = [
                s for s in range(cfg.n_task_types)
                if w.pools[s] and (s != blocked or is_colluder)
            ]
            if not open_stations:
                if not is_colluder:
                    self._join_queue(agent)
                continue  # colluders never wait in line

            min_duration = min(cfg.task_durations[s] for s in open_stations)
            if is_colluder:
                if blocked is not None and w.pools[blocked]:
                    station = blocked  # exclusive harvest of the squatted backlog
                else:
                    station = min(open_stations, key=lambda s: cfg.task_durations[s])
            else:
                station = min(open_stations, key=lambda s: w.pools[s][0].id)

            task = w.pools[station].popleft()
            task.claimed_by = agent.id
            task.claim_tick = tick
            task.complete_tick = tick + task.duration - 1
            agent.current_task = task
            agent.station = station
            self._completions_due.setdefault(task.complete_tick, []).append(task)

            pattern = station == blocked or task.duration <= min_duration
            w.events.append(BehaviorEvent(tick, agent.id, "claim", pattern))
            if is_colluder:
                if colluder_claimed:
                    w.events.append(BehaviorEvent(tick, agent.id, "defer", True))
                colluder_claimed = True

    def _join_queue(self, agent: Agent) -> None:
        # in-progress tasks are exactly the busy agents' current tasks
        in_progress = [
            a.current_task for a in self.world.agents if a.current_task is not None
        ]
        if not in_progress:
            return
        target = min(in_progress, key=lambda t: (len(t.queue), t.id))
        target.queue.append(agent.id)
        agent.queued_on = target

    def _work_phase(self, tick: int) -> None:
        w = self.world
        for task in self._completions_due.pop(tick, ()):
            task.completed = True
            w.completed_count += 1
            worker = w.agents[task.claimed_by]
            worker.current_task = None
            worker.station = None
            worker.completions += 1
            if w.group_active and worker.id in w.group:
                worker.active_completions += 1
            for waiting in task.queue:
                w.agents[waiting].queued_on = None

    def _protocol_phase(self, tick: int) -> None:
        if self.manager is None:
            return
        if self._withdrawal_tick is not None and tick == self._withdrawal_tick:
            self._deactivate_group()
        for case, _, _ in self._cases:
            if case.settled or case.evidence is None:
                continue
            window_done = tick >= case.receipt_tick + self.config.verify_window
            accused_occupies = sum(
                self.world.occupy_by_agent.get(a, 0) for a in case.evidence.accused
            )
            early_blocking = (
                case.evidence.behavior is CollusionBehavior.SPATIAL_BLOCKING
                and accused_occupies >= self.config.blocking_threshold
            )
            if not (window_done or early_blocking):
                continue
            outcome = self.manager.verify_evidence(case, self.world.events, tick)
            self.manager.enforce(case, tick)
            if outcome.verdict.value == "valid":
                self._deactivate_group()

    def _deactivate_group(self) -> None:
        w = self.world
        if not w.group_active:
            return
        w.group_active = False
        w.blocked_station = None
        if w.blocker is not None:
            w.agents[w.blocker].station = None

    # -- episode ------------------------------------------------------------

    def run(self) -> EpisodeResult:
        cfg = self.config
        w = self.world
        for tick in range(1, cfg.n_ticks + 1):
            w.tick = tick
            self.ledger.advance_tick()
            if tick == cfg.collusion_start_tick and w.group:
                w.group_active = True
            if self.manager is not None and tick == 1:
                self._submit_deposits_and_evidence(tick)
            if w.group_active and w.blocker is not None:
                self._move_blocker(tick)
            self._arrive(tick)
            self._claim_phase(tick)
            self._work_phase(tick)
            self._protocol_phase(tick)

        self._settle_task_payments()
        self._settle_side_payments()
        self.ledger.advance_tick()
        fingerprint = f"{cfg.scenario.value}:{cfg.behavior.value}:{cfg.seed}:{self.replica}"
        return EpisodeResult(
            metrics=self.compute_metrics(),
            transcript_jsonl=build_transcript(self.manager, self.ledger, fingerprint),
            txlog_csv=self.ledger.export_txlog_csv(),
        )

    def _settle_task_payments(self) -> None:
        """Task invoices settle in one batch per agent at episode end."""
        cfg = self.config
        for agent in self.world.agents:
            if agent.completions:
                self.ledger.transfer(
                    MANAGER_ADDR, agent.addr, agent.completions * cfg.task_reward
                )
                if cfg.task_cost:
                    self.ledger.transfer(
                        agent.addr, MANAGER_ADDR, agent.completions * cfg.task_cost
                    )

    def _settle_side_payments(self) -> None:
        """Blocking cartels pool the revenue earned while active and split it
        equally, which is what makes the non-working blocker whole."""
        w = self.world
        cfg = self.config
        if not w.group or cfg.behavior is not CollusionBehavior.SPATIAL_BLOCKING:
            return
        per_task = cfg.task_reward - cfg.task_cost
        incomes = {i: w.agents[i].active_completions * per_task for i in w.group}
        total = sum(incomes.values())
        share = total // len(w.group)
        pot: list[tuple[int, int]] = []  # (agent, surplus) transfers into the pot
        for i in w.group:
            surplus = incomes[i] - share
            if surplus > 0:
                pot.append((i, surplus))
        for i in w.group:
            deficit = share - incomes[i]
            while deficit > 0 and pot:
                donor, available = pot[-1]
                moved = min(deficit, available)
                self.ledger.transfer(_agent_addr(donor), _agent_addr(i), moved)
                deficit -= moved
                if moved == available:
                    pot.pop()
                else:
                    pot[-1] = (donor, available - moved)

    def compute_metrics(self, baseline_revenues: list[int] | None = None) -> MetricsReport:
        w = self.world
        total = len(w.tasks)
        completed = w.completed_count
        unassigned = sum(len(p) for p in w.pools)
        in_progress = total - completed - unassigned
        durations = [t.duration for t in w.tasks if t.completed]
        report_count = len(self.manager.cases) if self.manager else 0
        verified = (
            sum(1 for c in self.manager.cases.values()
                if c.contract.state.value == "resolved_valid")
            if self.manager
            else 0
        )
        joins = sum(1 for d in w.decisions.values() if d is Decision.JOIN)
        rate = joins / len(w.decisions) if w.decisions else 0.0

        baseline_mean = (
            statistics.fmean(baseline_revenues) if baseline_revenues else None
        )
        agents = []
        for agent in w.agents:
            revenue = self._net_worth(agent.id) - self.start_worth[agent.id]
            agents.append(
                AgentMetrics(
                    agent_id=agent.id,
                    role=agent.role.value,
                    total_revenue=revenue,
                    task_advantage=(
                        revenue - baseline_mean if baseline_mean is not None else None
                    ),
                )
            )
        return MetricsReport(
            total_tasks=total,
            completed_tasks=completed,
            failed_tasks=0,
            unassigned_tasks=unassigned,
            in_progress_tasks=in_progress,
            completion_rate=completed / total if total else 0.0,
            success_rate=1.0,
            avg_processing_time=statistics.fmean(durations) if durations else 0.0,
            report_count=report_count,
            verified_count=verified,
            collusion_rate=rate,
            agents=agents,
        )


def run_episode(
    config: SimConfig, replica: int = 0, baseline_revenues: list[int] | None = None
) -> EpisodeResult:
    """Run one seeded episode; identical inputs give identical outputs."""
    episode = Episode(config, replica)
    result = episode.run()
    if baseline_revenues is not None:
        result = EpisodeResult(
            metrics=episode.compute_metrics(baseline_revenues),
            transcript_jsonl=result.transcript_jsonl,
            txlog_csv=result.txlog_csv,
        )
    return result
