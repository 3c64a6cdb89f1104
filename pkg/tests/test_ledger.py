"""Ledger state machine: accounts, bonds, escrow, conservation."""

import random

import pytest

from whistlesim.ledger import (
    BondStatus,
    EscrowState,
    InsufficientFunds,
    Ledger,
    LedgerError,
    StateError,
    TXLOG_SCHEMA,
)


@pytest.fixture
def ledger():
    led = Ledger(delta_ticks=1)
    led.open_account("manager")
    led.mint("manager", 100_000)
    led.open_account("alice")
    led.mint("alice", 5_000)
    led.open_account("anon")
    led.mint("anon", 1_000)
    return led


class TestAccounts:
    def test_open_then_zero_balance(self):
        led = Ledger()
        led.open_account("x")
        assert led.balance("x") == 0

    def test_mint(self, ledger):
        assert ledger.balance("alice") == 5_000

    def test_double_open_rejected(self, ledger):
        with pytest.raises(LedgerError):
            ledger.open_account("alice")

    def test_zero_mint_rejected(self, ledger):
        with pytest.raises(LedgerError):
            ledger.mint("alice", 0)

    def test_transfer_moves_value(self, ledger):
        ledger.transfer("alice", "manager", 2_000)
        assert ledger.balance("alice") == 3_000
        assert ledger.conserved()

    def test_overdraft_rejected(self, ledger):
        with pytest.raises(InsufficientFunds):
            ledger.transfer("alice", "manager", 5_001)


class TestBonds:
    def test_lock_moves_to_escrow(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        assert ledger.balance("alice") == 4_000
        assert ledger.escrow_total() == 1_000
        assert bond.status is BondStatus.LOCKED
        assert ledger.conserved()

    def test_insufficient_funds(self, ledger):
        with pytest.raises(InsufficientFunds):
            ledger.lock_bond("alice", 50_000)

    def test_confiscate(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        before = ledger.balance("manager")
        ledger.confiscate_bond(bond, "manager")
        assert ledger.balance("manager") == before + 1_000
        assert bond.status is BondStatus.CONFISCATED
        assert ledger.escrow_total() == 0

    def test_refund(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        ledger.refund_bond(bond)
        assert ledger.balance("alice") == 5_000
        assert bond.status is BondStatus.REFUNDED

    def test_double_settlement_rejected(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        ledger.refund_bond(bond)
        balances = dict(ledger.accounts)
        with pytest.raises(StateError):
            ledger.confiscate_bond(bond, "manager")
        assert ledger.accounts == balances


class TestEscrowContract:
    def test_deploy_funds_pool(self, ledger):
        c = ledger.deploy_wb_contract("anon", 3, 1_000, "manager")
        assert c.reward_pool == 3_000
        assert c.state is EscrowState.FUNDED
        assert ledger.conserved()

    def test_funding_confirm_tick_is_recorded(self, ledger):
        ledger.advance_tick()
        ledger.advance_tick()
        c = ledger.deploy_wb_contract("anon", 2, 1_000, "manager")
        assert c.funded_tick == ledger.tick + ledger.delta_ticks
        ledger.advance_tick()
        funding = [tx for tx in ledger.log if tx.kind.value == "fund_reward"][0]
        assert funding.confirm_tick == c.funded_tick

    def test_insufficient_manager_funds(self, ledger):
        with pytest.raises(InsufficientFunds):
            ledger.deploy_wb_contract("anon", 300, 1_000, "manager")

    def test_anon_address_is_one_time(self, ledger):
        ledger.deploy_wb_contract("anon", 2, 1_000, "manager")
        with pytest.raises(LedgerError):
            ledger.deploy_wb_contract("anon", 2, 1_000, "manager")

    def test_deposit_rules(self, ledger):
        c = ledger.deploy_wb_contract("anon", 2, 1_000, "manager")
        with pytest.raises(LedgerError):
            ledger.submit_reporting_deposit(c, "anon", 999)
        with pytest.raises(LedgerError):
            ledger.submit_reporting_deposit(c, "alice", 1_000)
        ledger.submit_reporting_deposit(c, "anon", 1_000)
        assert c.deposit_held == 1_000
        with pytest.raises(StateError):
            ledger.submit_reporting_deposit(c, "anon", 1_000)

    def test_evidence_requires_deposit(self, ledger):
        c = ledger.deploy_wb_contract("anon", 2, 1_000, "manager")
        with pytest.raises(StateError):
            ledger.mark_evidence_received(c)

    def test_resolve_valid_pays_and_slashes(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        c = ledger.deploy_wb_contract("anon", 1, 1_000, "manager")
        ledger.submit_reporting_deposit(c, "anon", 1_000)
        ledger.mark_evidence_received(c)
        payouts = ledger.resolve(c, True, [bond], "manager",
                                 report_receipt_tick=0, damage_onset_tick=5)
        assert c.state is EscrowState.RESOLVED_VALID
        assert payouts == {"anon": 2_000}
        assert bond.status is BondStatus.CONFISCATED
        assert ledger.conserved()

    def test_resolve_invalid_forfeits_deposit(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        c = ledger.deploy_wb_contract("anon", 1, 1_000, "manager")
        ledger.submit_reporting_deposit(c, "anon", 1_000)
        ledger.mark_evidence_received(c)
        manager_before = ledger.balance("manager")
        ledger.resolve(c, False, [bond], "manager", report_receipt_tick=0)
        assert c.state is EscrowState.RESOLVED_INVALID
        assert bond.status is BondStatus.LOCKED
        # deposit forfeited + pool returned
        assert ledger.balance("manager") == manager_before + 1_000 + 1_000

    def test_late_report_settles_invalid(self, ledger):
        bond = ledger.lock_bond("alice", 1_000)
        c = ledger.deploy_wb_contract("anon", 1, 1_000, "manager")
        ledger.submit_reporting_deposit(c, "anon", 1_000)
        ledger.mark_evidence_received(c)
        ledger.resolve(c, True, [bond], "manager",
                       report_receipt_tick=10, damage_onset_tick=4)
        assert c.state is EscrowState.RESOLVED_INVALID
        assert bond.status is BondStatus.LOCKED

    def test_superseded_refund_path(self, ledger):
        c = ledger.deploy_wb_contract("anon", 1, 1_000, "manager")
        ledger.submit_reporting_deposit(c, "anon", 1_000)
        ledger.mark_evidence_received(c)
        anon_before = ledger.balance("anon")
        ledger.resolve(c, False, [], "manager",
                       report_receipt_tick=0, refund_reporting_deposit=True)
        assert ledger.balance("anon") == anon_before + 1_000

    def test_double_resolution_rejected(self, ledger):
        c = ledger.deploy_wb_contract("anon", 1, 1_000, "manager")
        ledger.submit_reporting_deposit(c, "anon", 1_000)
        ledger.mark_evidence_received(c)
        ledger.resolve(c, False, [], "manager", report_receipt_tick=0)
        with pytest.raises(StateError):
            ledger.resolve(c, False, [], "manager", report_receipt_tick=0)

    def test_resolve_requires_evidence(self, ledger):
        c = ledger.deploy_wb_contract("anon", 1, 1_000, "manager")
        with pytest.raises(StateError):
            ledger.resolve(c, True, [], "manager", report_receipt_tick=0)


class TestSettlementBound:
    def test_all_confirmations_within_delta(self, ledger):
        for _ in range(5):
            ledger.transfer("alice", "manager", 10)
            ledger.advance_tick()
        assert all(
            tx.confirm_tick - tx.submit_tick <= ledger.delta_ticks for tx in ledger.log
        )

    def test_zero_delta_confirms_immediately(self):
        led = Ledger(delta_ticks=0)
        led.open_account("a")
        tx = led.mint("a", 5)
        assert tx.confirm_tick == tx.submit_tick


class TestExport:
    def test_csv_schema_and_order(self, ledger):
        ledger.transfer("alice", "anon", 10)
        ledger.advance_tick()
        csv = ledger.export_txlog_csv()
        lines = csv.splitlines()
        assert lines[0] == f"# schema={TXLOG_SCHEMA}"
        assert lines[1] == "tick_submit,tick_confirm,kind,from,to,amount"
        submits = [int(line.split(",")[0]) for line in lines[2:]]
        assert submits == sorted(submits)


class TestConservationFuzzSmoke:
    """A small random-walk version of the acceptance fuzz (criterion 9)."""

    def test_random_sequences(self):
        rng = random.Random(99)
        for _ in range(300):
            led = Ledger(delta_ticks=rng.randint(0, 3))
            led.open_account("m")
            led.mint("m", 50_000)
            accounts = ["m"]
            bonds, contracts = [], []
            for _ in range(rng.randint(3, 25)):
                op = rng.randrange(6)
                try:
                    if op == 0:
                        name = f"a{len(accounts)}"
                        led.open_account(name)
                        led.mint(name, rng.randint(1, 5_000))
                        accounts.append(name)
                    elif op == 1 and len(accounts) >= 2:
                        led.transfer(rng.choice(accounts), rng.choice(accounts),
                                     rng.randint(1, 2_000))
                    elif op == 2:
                        bonds.append(led.lock_bond(rng.choice(accounts), rng.randint(1, 500)))
                    elif op == 3 and bonds:
                        bond = rng.choice(bonds)
                        if rng.random() < 0.5:
                            led.confiscate_bond(bond, "m")
                        else:
                            led.refund_bond(bond)
                    elif op == 4:
                        c = led.deploy_wb_contract(f"anon{len(contracts)}:{id(led)}",
                                                   rng.randint(1, 4), 100, "m")
                        led.open_account(c.reporter)
                        contracts.append(c)
                    else:
                        led.advance_tick()
                except LedgerError:
                    pass
                assert led.conserved()
                assert all(b >= 0 for b in led.accounts.values())
