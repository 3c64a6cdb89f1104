"""The anonymous reporting flow between whistleblowers and the manager.

Five steps: (1) an encrypted, ring-signed report names a group size and a
one-time payout address; (2) the manager verifies, deduplicates by key image,
and deploys a funded escrow; (3) the reporter pays the reporting deposit from
the one-time address and submits encrypted evidence naming the accused;
(4) the manager watches the accused agents' behavior for the monitoring
window and scores it against the claimed pattern; (5) the escrow settles --
slashing the accused and paying the reporter on a timely valid report,
forfeiting the reporting deposit otherwise.

The manager is a single logical actor: submissions are processed in arrival
order, which is also what "earliest" means for the first-valid-report rule.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from . import crypto
from .crypto import Envelope, KeyPair, Point, Ring, RingSignature
from .ledger import BondingContract, Ledger, WhistleblowerContract


class ProtocolError(Exception):
    pass


class CollusionBehavior(Enum):
    RESOURCE_MONOPOLY = "resource_monopoly"
    SPATIAL_BLOCKING = "spatial_blocking"


class Verdict(Enum):
    VALID = "valid"
    INVALID = "invalid"


class BehaviorEvent(NamedTuple):
    """One observable action from the task economy's public log.

    kind is "claim", "defer", or "occupy"; pattern marks actions consistent
    with a collusion pattern (a duration-minimal claim, a yield to a
    groupmate, or squatting a station without working).
    """

    tick: int
    agent: int
    kind: str
    pattern: bool


@dataclass(frozen=True)
class ReportPayload:
    reported_group_size: int
    report_time: int            # claimed collusion start
    ring: Ring
    key_image: Point
    anon_address: Point         # delivered in-payload so it stays confidential

    def encode(self) -> bytes:
        doc = {
            "group_size": self.reported_group_size,
            "report_time": self.report_time,
            "ring": self.ring.encode().hex(),
            "key_image": self.key_image.data.hex(),
            "anon_address": self.anon_address.data.hex(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def decode(cls, data: bytes) -> "ReportPayload":
        doc = json.loads(data)
        return cls(
            reported_group_size=int(doc["group_size"]),
            report_time=int(doc["report_time"]),
            ring=Ring.decode(bytes.fromhex(doc["ring"])),
            key_image=Point(bytes.fromhex(doc["key_image"])),
            anon_address=Point(bytes.fromhex(doc["anon_address"])),
        )


@dataclass(frozen=True)
class Evidence:
    behavior: CollusionBehavior
    accused: tuple[int, ...]    # includes the whistleblower's own id
    report_time: int

    def encode(self) -> bytes:
        doc = {
            "behavior": self.behavior.value,
            "accused": list(self.accused),
            "report_time": self.report_time,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def decode(cls, data: bytes) -> "Evidence":
        doc = json.loads(data)
        return cls(
            behavior=CollusionBehavior(doc["behavior"]),
            accused=tuple(int(a) for a in doc["accused"]),
            report_time=int(doc["report_time"]),
        )


@dataclass(frozen=True)
class ReportSubmission:
    envelope: Envelope
    signature: RingSignature


@dataclass(frozen=True)
class VerificationOutcome:
    verdict: Verdict
    window: tuple[int, int]
    scores: dict[int, float]
    damage_onset: int | None    # first collusion-flagged action by an accused


def _envelope_digest(env: Envelope) -> bytes:
    return hashlib.sha256(b"whistlesim/v1/envelope" + env.encode()).digest()


def build_report(
    whistleblower: KeyPair,
    group_size: int,
    t_now: int,
    all_public_keys: list[Point],
    manager_pk: Point,
    anon_address: Point,
    rng=None,
) -> ReportSubmission:
    """Step 1: encrypt the report to the manager and ring-sign its digest."""
    ring = Ring(tuple(all_public_keys))
    ring.index_of(whistleblower.public)  # raises NotInRingError if absent
    payload = ReportPayload(
        reported_group_size=group_size,
        report_time=t_now,
        ring=ring,
        key_image=crypto.key_image(whistleblower),
        anon_address=anon_address,
    )
    env = crypto.encrypt(manager_pk, payload.encode(), rng)
    sig = crypto.ring_sign(_envelope_digest(env), ring, whistleblower, rng)
    return ReportSubmission(envelope=env, signature=sig)


def build_evidence_submission(
    whistleblower: KeyPair,
    evidence: Evidence,
    all_public_keys: list[Point],
    manager_pk: Point,
    rng=None,
) -> ReportSubmission:
    """Step 3: evidence travels under the same encryption + ring signature."""
    if len(evidence.accused) != len(set(evidence.accused)):
        raise ProtocolError("accused ids must be distinct")
    ring = Ring(tuple(all_public_keys))
    ring.index_of(whistleblower.public)
    env = crypto.encrypt(manager_pk, evidence.encode(), rng)
    sig = crypto.ring_sign(_envelope_digest(env), ring, whistleblower, rng)
    return ReportSubmission(envelope=env, signature=sig)


class KeyImageRegistry:
    """Insert-once set of key images backing the duplicate-report rule."""

    def __init__(self):
        self._seen: set[bytes] = set()

    def register(self, image: Point) -> bool:
        """True if fresh; False if this image was seen before."""
        if image.data in self._seen:
            return False
        self._seen.add(image.data)
        return True

    def __contains__(self, image: Point) -> bool:
        return image.data in self._seen


@dataclass
class ReportCase:
    """Manager-side state for one report, keyed by the escrow address."""

    contract: WhistleblowerContract
    payload: ReportPayload
    receipt_tick: int
    receipt_seq: int
    evidence: Evidence | None = None
    outcome: VerificationOutcome | None = None
    settled: bool = False


@dataclass
class VerificationPolicy:
    window: int = 50                 # monitoring horizon after the report
    monopoly_threshold: float = 0.8  # pattern share of an accused agent's claims
    monopoly_min_actions: int = 2    # observations needed before scoring
    blocking_threshold: int = 3      # occupy-without-work ticks across the group


class Manager:
    """The system manager: receives reports, escrows funds, verifies, enforces."""

    def __init__(
        self,
        keypair: KeyPair,
        ledger: Ledger,
        honesty_deposit: int,
        address: str = "manager",
        policy: VerificationPolicy | None = None,
    ):
        self.keypair = keypair
        self.ledger = ledger
        self.honesty_deposit = honesty_deposit
        self.address = address
        self.policy = policy or VerificationPolicy()
        self.registry = KeyImageRegistry()
        self.agents: dict[int, Point] = {}
        self.bonds: dict[int, BondingContract] = {}
        self.cases: dict[str, ReportCase] = {}
        self.transcript: list[dict] = []
        self._rewarded_accused: set[int] = set()
        self._receipt_seq = 0

    # -- registration (the bonding stage) ----------------------------------

    def register_agent(self, agent_id: int, public_key: Point, bond: BondingContract) -> None:
        self.agents[agent_id] = public_key
        self.bonds[agent_id] = bond

    def agent_ring(self) -> list[Point]:
        return [self.agents[i] for i in sorted(self.agents)]

    def _record(self, tick: int, step: str, **extra) -> None:
        self.transcript.append({"tick": tick, "step": step, **extra})

    # -- step 2: receive a report, deploy the escrow ------------------------

    def receive_report(self, submission: ReportSubmission, tick: int):
        """Returns (case, None) on acceptance or (None, reason) on rejection."""
        digest = _envelope_digest(submission.envelope)
        ring = Ring(tuple(self.agent_ring()))
        if not crypto.ring_verify(digest, ring, submission.signature):
            self._record(tick, "report_rejected", reason="bad_signature")
            return None, "bad_signature"
        try:
            payload = ReportPayload.decode(crypto.decrypt(self.keypair.secret, submission.envelope))
        except (crypto.IntegrityError, crypto.DecodingError, ValueError, KeyError):
            self._record(tick, "report_rejected", reason="undecryptable")
            return None, "undecryptable"
        if payload.key_image.data != submission.signature.image.data:
            self._record(tick, "report_rejected", reason="image_mismatch")
            return None, "image_mismatch"
        if not 2 <= payload.reported_group_size <= len(self.agents):
            self._record(tick, "report_rejected", reason="group_size_out_of_range")
            return None, "group_size_out_of_range"
        if not self.registry.register(payload.key_image):
            self._record(tick, "report_rejected", reason="duplicate_key_image")
            return None, "duplicate_key_image"

        contract = self.ledger.deploy_wb_contract(
            reporter_anon_addr=payload.anon_address.data.hex(),
            reported_group_size=payload.reported_group_size,
            honesty_deposit=self.honesty_deposit,
            manager=self.address,
        )
        case = ReportCase(
            contract=contract,
            payload=payload,
            receipt_tick=tick,
            receipt_seq=self._receipt_seq,
        )
        self._receipt_seq += 1
        self.cases[contract.address] = case
        self._record(tick, "report_received", contract=contract.address,
                     group_size=payload.reported_group_size)
        self._record(tick, "contract_deployed", contract=contract.address,
                     pool=contract.reward_pool, t_rep=contract.funded_tick)
        return case, None

    # -- step 3: deposit and evidence ---------------------------------------

    def receive_deposit(self, case: ReportCase, tick: int) -> None:
        anon = case.payload.anon_address.data.hex()
        self.ledger.submit_reporting_deposit(case.contract, anon, case.contract.deposit_required)
        self._record(tick, "deposit_received", contract=case.contract.address,
                     amount=case.contract.deposit_required)

    def receive_evidence(self, submission: ReportSubmission, tick: int):
        """Pairs evidence to its report by key-image linkage."""
        digest = _envelope_digest(submission.envelope)
        ring = Ring(tuple(self.agent_ring()))
        if not crypto.ring_verify(digest, ring, submission.signature):
            return None, "bad_signature"
        case = next(
            (c for c in self.cases.values()
             if c.payload.key_image.data == submission.signature.image.data),
            None,
        )
        if case is None:
            return None, "no_matching_report"
        if not case.contract.deposit_held:
            return None, "deposit_missing"
        try:
            evidence = Evidence.decode(crypto.decrypt(self.keypair.secret, submission.envelope))
        except (crypto.IntegrityError, crypto.DecodingError, ValueError, KeyError):
            return None, "undecryptable"
        if len(evidence.accused) != case.payload.reported_group_size:
            return None, "accused_size_mismatch"
        if evidence.report_time != case.payload.report_time:
            return None, "timestamp_mismatch"
        if any(a not in self.agents for a in evidence.accused):
            return None, "unknown_accused"
        case.evidence = evidence
        self.ledger.mark_evidence_received(case.contract)
        self._record(tick, "evidence_received", contract=case.contract.address,
                     accused=sorted(evidence.accused))
        return case, None

    # -- step 4: behavior-based verification --------------------------------

    def verify_evidence(
        self, case: ReportCase, behavior_log: list[BehaviorEvent], log_end_tick: int
    ) -> VerificationOutcome:
        """Score the accused agents' observed behavior over the window.

        Monopoly evidence holds when every accused agent's claim stream is
        dominated by pattern actions; blocking evidence when the group
        accumulates enough occupy-without-work ticks. Either way a report
        received after the first flagged action is untimely.
        """
        if case.evidence is None:
            raise ProtocolError("no evidence to verify")
        evidence = case.evidence
        start = case.receipt_tick
        end = start + self.policy.window

        accused = set(evidence.accused)
        damage_onset = next(
            (e.tick for e in behavior_log if e.agent in accused and e.pattern), None
        )

        scores: dict[int, float] = {}
        if evidence.behavior is CollusionBehavior.SPATIAL_BLOCKING:
            occupied = sum(
                1 for e in behavior_log
                if e.agent in accused and e.kind == "occupy" and start <= e.tick <= end
            )
            # group-level pattern: the designated blocker squats for everyone.
            # A crossed threshold settles the verdict before the window ends,
            # keeping the damage exposure short.
            matched = occupied >= self.policy.blocking_threshold
            if log_end_tick < end:
                if not matched:
                    raise ProtocolError("behavior log does not cover the monitoring window")
                end = log_end_tick
            scores = {a: float(occupied) for a in accused}
        else:
            if log_end_tick < end:
                raise ProtocolError("behavior log does not cover the monitoring window")
            matched = True
            for a in accused:
                actions = [
                    e for e in behavior_log
                    if e.agent == a and e.kind in ("claim", "defer") and start <= e.tick <= end
                ]
                if len(actions) < self.policy.monopoly_min_actions:
                    scores[a] = 0.0
                    matched = False
                    continue
                share = sum(1 for e in actions if e.pattern) / len(actions)
                scores[a] = share
                if share < self.policy.monopoly_threshold:
                    matched = False

        timely = damage_onset is None or case.receipt_tick <= damage_onset
        verdict = Verdict.VALID if (matched and timely) else Verdict.INVALID
        outcome = VerificationOutcome(
            verdict=verdict, window=(start, end), scores=scores, damage_onset=damage_onset
        )
        case.outcome = outcome
        self._record(end, "verified", contract=case.contract.address,
                     verdict=verdict.value, damage_onset=damage_onset)
        return outcome

    # -- step 5: settlement ---------------------------------------------------

    def enforce(self, case: ReportCase, tick: int) -> dict[str, int]:
        """Settle the escrow under the first-valid-report rule.

        A substantively valid report whose accused overlap an already-rewarded
        set is superseded: the deposit comes back but no reward is paid.
        """
        if case.settled:
            raise ProtocolError("case already enforced")
        if case.outcome is None:
            raise ProtocolError("verify before enforcing")
        evidence = case.evidence
        assert evidence is not None

        superseded = bool(self._rewarded_accused & set(evidence.accused))
        valid = case.outcome.verdict is Verdict.VALID and not superseded
        bonds = [self.bonds[a] for a in evidence.accused]

        payouts = self.ledger.resolve(
            case.contract,
            valid=valid,
            accused_bonds=bonds,
            manager=self.address,
            report_receipt_tick=case.receipt_tick,
            damage_onset_tick=case.outcome.damage_onset,
            refund_reporting_deposit=superseded and case.outcome.verdict is Verdict.VALID,
        )
        if valid:
            self._rewarded_accused |= set(evidence.accused)
        case.settled = True
        self._record(tick, "enforced", contract=case.contract.address,
                     valid=valid, superseded=superseded, payouts=payouts)
        return payouts

    def export_transcript_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.transcript)
