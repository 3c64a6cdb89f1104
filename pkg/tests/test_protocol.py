"""Five-step reporting flow: anonymity, dedup, verification, settlement."""

import json
import random

import pytest

from whistlesim import crypto
from whistlesim.ledger import BondStatus, EscrowState, Ledger
from whistlesim.protocol import (
    BehaviorEvent,
    CollusionBehavior,
    Evidence,
    KeyImageRegistry,
    Manager,
    ProtocolError,
    ReportPayload,
    Verdict,
    VerificationPolicy,
    build_evidence_submission,
    build_report,
)

D_H = 1000
N = 10


@pytest.fixture
def world():
    """Ledger + manager + ten bonded agents with key pairs."""
    rng = random.Random(101)
    led = Ledger()
    led.open_account("manager")
    led.mint("manager", 200_000)
    kp_m = crypto.keygen(rng.randbytes(32))
    mgr = Manager(kp_m, led, honesty_deposit=D_H)
    keys = []
    for i in range(N):
        addr = f"agent-{i}"
        led.open_account(addr)
        led.mint(addr, 5 * D_H)
        kp = crypto.keygen(rng.randbytes(32))
        bond = led.lock_bond(addr, D_H)
        mgr.register_agent(i, kp.public, bond)
        keys.append(kp)
    return led, mgr, keys, rng


def file_report(led, mgr, keys, rng, reporter=0, group_size=3, tick=0):
    secret, anon_pub = crypto.anon_address(rng.randbytes(32))
    led.open_account(anon_pub.data.hex())
    sub = build_report(
        keys[reporter], group_size, tick, mgr.agent_ring(),
        mgr.keypair.public, anon_pub, rng,
    )
    case, err = mgr.receive_report(sub, tick)
    return case, err, anon_pub


def complete_step3(led, mgr, keys, rng, case, reporter, accused, tick=1):
    anon = case.payload.anon_address.data.hex()
    led.transfer(f"agent-{reporter}", anon, D_H)
    mgr.receive_deposit(case, tick)
    ev = Evidence(CollusionBehavior.RESOURCE_MONOPOLY, tuple(accused), case.payload.report_time)
    sub = build_evidence_submission(keys[reporter], ev, mgr.agent_ring(), mgr.keypair.public, rng)
    return mgr.receive_evidence(sub, tick)


def pattern_log(agents, ticks, kind="claim", pattern=True):
    return [BehaviorEvent(t, a, kind, pattern) for t in ticks for a in agents]


class TestReportSubmission:
    def test_round_trip(self, world):
        led, mgr, keys, rng = world
        case, err, anon = file_report(led, mgr, keys, rng, reporter=4)
        assert err is None
        assert case.payload.reported_group_size == 3
        assert case.payload.anon_address.data == anon.data
        assert case.payload.key_image.data == crypto.key_image(keys[4]).data
        assert case.contract.state is EscrowState.FUNDED
        assert case.contract.reward_pool == 3 * D_H

    def test_duplicate_key_image_rejected(self, world):
        led, mgr, keys, rng = world
        _, err, _ = file_report(led, mgr, keys, rng, reporter=2)
        assert err is None
        _, err2, _ = file_report(led, mgr, keys, rng, reporter=2)
        assert err2 == "duplicate_key_image"

    def test_ring_must_contain_reporter(self, world):
        led, mgr, keys, rng = world
        outsider = crypto.keygen(b"z" * 32)
        _, anon = crypto.anon_address(rng.randbytes(32))
        with pytest.raises(crypto.NotInRingError):
            build_report(outsider, 3, 0, mgr.agent_ring(), mgr.keypair.public, anon, rng)

    def test_tampered_envelope_rejected_no_contract(self, world):
        led, mgr, keys, rng = world
        _, anon = crypto.anon_address(rng.randbytes(32))
        sub = build_report(keys[1], 3, 0, mgr.agent_ring(), mgr.keypair.public, anon, rng)
        raw = bytearray(sub.envelope.encode())
        for pos in range(40, len(raw), 7):  # sweep mutations across the envelope
            bad = raw.copy()
            bad[pos] ^= 1
            try:
                env = crypto.Envelope.decode(bytes(bad))
            except crypto.DecodingError:
                continue
            mutated = type(sub)(envelope=env, signature=sub.signature)
            case, err = mgr.receive_report(mutated, 0)
            assert case is None and err is not None
        assert len(mgr.cases) == 0

    def test_group_size_out_of_range(self, world):
        led, mgr, keys, rng = world
        _, err, _ = file_report(led, mgr, keys, rng, group_size=N + 1)
        assert err == "group_size_out_of_range"

    def test_payload_encoding_round_trip(self, world):
        led, mgr, keys, rng = world
        ring = crypto.Ring(tuple(mgr.agent_ring()))
        _, anon = crypto.anon_address(rng.randbytes(32))
        payload = ReportPayload(3, 7, ring, crypto.key_image(keys[0]), anon)
        assert ReportPayload.decode(payload.encode()) == payload


class TestEvidenceStep:
    def test_ordering_deposit_before_evidence(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        ev = Evidence(CollusionBehavior.RESOURCE_MONOPOLY, (0, 1, 2), 0)
        sub = build_evidence_submission(keys[0], ev, mgr.agent_ring(), mgr.keypair.public, rng)
        got, err = mgr.receive_evidence(sub, 1)
        assert err == "deposit_missing"

    def test_wrong_accused_size(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0, group_size=3)
        anon = case.payload.anon_address.data.hex()
        led.transfer("agent-0", anon, D_H)
        mgr.receive_deposit(case, 1)
        ev = Evidence(CollusionBehavior.RESOURCE_MONOPOLY, (0, 1), 0)
        sub = build_evidence_submission(keys[0], ev, mgr.agent_ring(), mgr.keypair.public, rng)
        _, err = mgr.receive_evidence(sub, 1)
        assert err == "accused_size_mismatch"

    def test_evidence_links_to_report_by_key_image(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=5)
        got, err = complete_step3(led, mgr, keys, rng, case, 5, (4, 5, 6))
        assert err is None
        assert got is case
        assert case.contract.state is EscrowState.EVIDENCE_RECEIVED


class TestVerification:
    def test_true_pattern_validates(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        complete_step3(led, mgr, keys, rng, case, 0, (0, 1, 2))
        log = pattern_log([0, 1, 2], range(1, 60))
        out = mgr.verify_evidence(case, log, log_end_tick=60)
        assert out.verdict is Verdict.VALID
        assert out.damage_onset == 1

    def test_honest_accused_fail_threshold(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        complete_step3(led, mgr, keys, rng, case, 0, (0, 1, 2))
        log = [BehaviorEvent(t, a, "claim", (t + a) % 5 == 0)
               for t in range(1, 60) for a in (0, 1, 2)]
        out = mgr.verify_evidence(case, log, log_end_tick=60)
        assert out.verdict is Verdict.INVALID

    def test_late_report_invalid_even_if_true(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0, tick=0)
        complete_step3(led, mgr, keys, rng, case, 0, (0, 1, 2))
        # pattern began before the report was received -> not timely
        log = [BehaviorEvent(-3, 1, "claim", True)] + pattern_log([0, 1, 2], range(1, 60))
        out = mgr.verify_evidence(case, log, log_end_tick=60)
        assert out.verdict is Verdict.INVALID
        assert out.damage_onset == -3

    def test_insufficient_coverage(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        complete_step3(led, mgr, keys, rng, case, 0, (0, 1, 2))
        with pytest.raises(ProtocolError):
            mgr.verify_evidence(case, [], log_end_tick=10)

    def test_blocking_early_resolution(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        anon = case.payload.anon_address.data.hex()
        led.transfer("agent-0", anon, D_H)
        mgr.receive_deposit(case, 1)
        ev = Evidence(CollusionBehavior.SPATIAL_BLOCKING, (0, 1, 2), 0)
        sub = build_evidence_submission(keys[0], ev, mgr.agent_ring(), mgr.keypair.public, rng)
        mgr.receive_evidence(sub, 1)
        log = pattern_log([1], [1, 2, 3], kind="occupy")
        out = mgr.verify_evidence(case, log, log_end_tick=3)
        assert out.verdict is Verdict.VALID

    def test_min_actions_guard(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        complete_step3(led, mgr, keys, rng, case, 0, (0, 1, 2))
        log = pattern_log([0, 1], range(1, 60)) + [BehaviorEvent(5, 2, "claim", True)]
        out = mgr.verify_evidence(case, log, log_end_tick=60)
        assert out.verdict is Verdict.INVALID  # agent 2: one observation only


class TestEnforcement:
    def run_valid_episode(self, world, reporter=0, accused=(0, 1, 2)):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=reporter,
                                 group_size=len(accused))
        complete_step3(led, mgr, keys, rng, case, reporter, accused)
        log = pattern_log(list(accused), range(1, 60))
        mgr.verify_evidence(case, log, log_end_tick=60)
        return led, mgr, keys, rng, case

    def test_whistleblower_nets_reward(self, world):
        led, mgr, keys, rng, case = self.run_valid_episode(world)
        anon = case.payload.anon_address.data.hex()
        wb_before = led.balance("agent-0") + led.balance(anon)
        mgr.enforce(case, 51)
        wb_after = led.balance("agent-0") + led.balance(anon)
        # bond already out of the balance; payout covers bond + deposit + reward
        assert wb_after - wb_before == 3 * D_H + D_H
        assert mgr.bonds[0].status is BondStatus.CONFISCATED

    def test_invalid_report_forfeits_deposit(self, world):
        led, mgr, keys, rng = world
        case, _, _ = file_report(led, mgr, keys, rng, reporter=3)
        complete_step3(led, mgr, keys, rng, case, 3, (3, 4, 5))
        log = []  # nobody behaves as reported
        with pytest.raises(ProtocolError):
            mgr.verify_evidence(case, log, log_end_tick=10)
        out = mgr.verify_evidence(case, log, log_end_tick=60)
        assert out.verdict is Verdict.INVALID
        manager_before = led.balance("manager")
        mgr.enforce(case, 51)
        assert led.balance("manager") == manager_before + D_H + 3 * D_H
        assert all(mgr.bonds[i].status is BondStatus.LOCKED for i in (3, 4, 5))

    def test_first_valid_report_wins(self, world):
        led, mgr, keys, rng = world
        case1, _, _ = file_report(led, mgr, keys, rng, reporter=0)
        case2, _, _ = file_report(led, mgr, keys, rng, reporter=1)
        complete_step3(led, mgr, keys, rng, case1, 0, (0, 1, 2))
        complete_step3(led, mgr, keys, rng, case2, 1, (0, 1, 2))
        log = pattern_log([0, 1, 2], range(1, 60))
        mgr.verify_evidence(case1, log, 60)
        mgr.verify_evidence(case2, log, 60)
        mgr.enforce(case1, 51)
        anon2 = case2.payload.anon_address.data.hex()
        before = led.balance(anon2)
        payouts = mgr.enforce(case2, 51)
        # duplicate valid report: deposit back, no reward
        assert led.balance(anon2) == before + D_H
        assert case2.contract.state is EscrowState.RESOLVED_INVALID

    def test_double_enforcement_rejected(self, world):
        led, mgr, keys, rng, case = self.run_valid_episode(world)
        mgr.enforce(case, 51)
        with pytest.raises(ProtocolError):
            mgr.enforce(case, 52)

    def test_defection_beats_counterfactual_collusion(self, world):
        """End to end: timely truthful reporting out-earns colluding."""
        from whistlesim.economy import (
            EconomyParams, collusion_total_utility, worst_case_plan,
        )
        led, mgr, keys, rng, case = self.run_valid_episode(world)
        anon = case.payload.anon_address.data.hex()
        before = led.balance("agent-0") + led.balance(anon)
        mgr.enforce(case, 51)
        whistle_gain = led.balance("agent-0") + led.balance(anon) - before - D_H  # minus lost bond
        p = EconomyParams(10, 100, 100, 60, D_H, D_H)
        counterfactual = collusion_total_utility(p, worst_case_plan(p, 3))
        assert whistle_gain > counterfactual


class TestKeyImageRegistry:
    def test_insert_once(self, world):
        _, _, keys, _ = world
        reg = KeyImageRegistry()
        image = crypto.key_image(keys[0])
        assert reg.register(image)
        assert not reg.register(image)
        assert image in reg


class TestAnonymityAtProtocolBoundary:
    def test_transcript_shape_independent_of_signer(self, world):
        """Swap which ring member reports; diff the non-secret transcript."""
        led, mgr, keys, rng = world

        def episode_transcript(reporter):
            lrng = random.Random(55)
            lled = Ledger()
            lled.open_account("manager")
            lled.mint("manager", 200_000)
            m = Manager(crypto.keygen(b"m" * 32), lled, honesty_deposit=D_H)
            ks = []
            for i in range(N):
                addr = f"agent-{i}"
                lled.open_account(addr)
                lled.mint(addr, 5 * D_H)
                kp = crypto.keygen(bytes([i]) * 32)
                bond = lled.lock_bond(addr, D_H)
                m.register_agent(i, kp.public, bond)
                ks.append(kp)
            secret, anon = crypto.anon_address(lrng.randbytes(32))
            lled.open_account(anon.data.hex())
            sub = build_report(ks[reporter], 3, 0, m.agent_ring(), m.keypair.public, anon, lrng)
            case, err = m.receive_report(sub, 0)
            assert err is None
            return m.transcript

        def scrub(events):
            # drop fields derived from key material; keep structure and amounts
            out = []
            for e in events:
                out.append({k: v for k, v in e.items() if k not in ("anon",)})
            return json.dumps(out, sort_keys=True)

        t_a = episode_transcript(reporter=2)
        t_b = episode_transcript(reporter=7)
        assert scrub(t_a) == scrub(t_b)
