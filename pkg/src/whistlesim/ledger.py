"""Deterministic in-process ledger standing in for the chain layer.

Account balances, honesty-deposit bonds, and whistleblower escrow contracts
live in one state machine with three enforced properties:

* conservation -- sum(balances) + sum(escrows) changes only on mint;
* bounded settlement -- every transaction confirms within delta_ticks of
  submission (submission applies effects atomically; confirmation is the
  bookkeeping step driven by advance_tick);
* single settlement -- bonds and escrow contracts each resolve exactly once.

Addresses are plain strings; contract addresses are sequence-numbered so a
run's transcript is reproducible byte for byte.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum


class LedgerError(Exception):
    pass


class InsufficientFunds(LedgerError):
    pass


class StateError(LedgerError):
    """Operation not allowed in the target's current state."""


TXLOG_SCHEMA = "ledger-txlog-v1"


class TxKind(Enum):
    MINT = "mint"
    TRANSFER = "transfer"
    LOCK = "lock"
    CONFISCATE = "confiscate"
    REFUND = "refund"
    FUND_REWARD = "fund_reward"
    PAYOUT = "payout"
    POOL_RETURN = "pool_return"  # unspent reward pool going back to the manager


@dataclass
class TxRecord:
    seq: int
    kind: TxKind
    src: str
    dst: str
    amount: int
    submit_tick: int
    confirm_tick: int | None = None


class BondStatus(Enum):
    LOCKED = "locked"
    REFUNDED = "refunded"
    CONFISCATED = "confiscated"


@dataclass
class BondingContract:
    address: str
    agent: str
    amount: int
    status: BondStatus = BondStatus.LOCKED


class EscrowState(Enum):
    DEPLOYED = "deployed"
    FUNDED = "funded"
    EVIDENCE_RECEIVED = "evidence_received"
    RESOLVED_VALID = "resolved_valid"
    RESOLVED_INVALID = "resolved_invalid"


_ESCROW_ORDER = [
    EscrowState.DEPLOYED,
    EscrowState.FUNDED,
    EscrowState.EVIDENCE_RECEIVED,
]


@dataclass
class WhistleblowerContract:
    address: str
    reporter: str               # the one-time anonymous address
    reported_group_size: int
    deposit_required: int
    reward_pool: int = 0
    deposit_held: int = 0
    deploy_tick: int = 0
    funded_tick: int | None = None  # confirm tick of the funding transfer
    state: EscrowState = EscrowState.DEPLOYED


@dataclass
class Ledger:
    delta_ticks: int = 1  # settlement bound

    tick: int = 0
    accounts: dict[str, int] = field(default_factory=dict)
    log: list[TxRecord] = field(default_factory=list)
    pending: list[TxRecord] = field(default_factory=list)
    bonds: list[BondingContract] = field(default_factory=list)
    contracts: list[WhistleblowerContract] = field(default_factory=list)
    _escrow_total: int = 0
    _minted_total: int = 0
    _used_anon: set[str] = field(default_factory=set)
    _seq: int = 0

    # -- invariant helpers ----------------------------------------------------

    def total_balance(self) -> int:
        return sum(self.accounts.values())

    def escrow_total(self) -> int:
        return self._escrow_total

    def conserved(self) -> bool:
        return self.total_balance() + self._escrow_total == self._minted_total

    # -- clock ----------------------------------------------------------------

    def advance_tick(self) -> None:
        """Move to the next tick, confirming everything submitted so far."""
        self.tick += 1
        for tx in self.pending:
            tx.confirm_tick = min(self.tick, tx.submit_tick + self.delta_ticks)
            if tx.confirm_tick - tx.submit_tick > self.delta_ticks:
                raise LedgerError("settlement bound violated")
            self.log.append(tx)
        self.pending.clear()

    def _submit(self, kind: TxKind, src: str, dst: str, amount: int) -> TxRecord:
        if amount <= 0:
            raise LedgerError("transaction amount must be positive")
        tx = TxRecord(self._seq, kind, src, dst, amount, submit_tick=self.tick)
        self._seq += 1
        if self.delta_ticks == 0:
            tx.confirm_tick = self.tick
            self.log.append(tx)
        else:
            self.pending.append(tx)
        return tx

    # -- accounts ---------------------------------------------------------------

    def open_account(self, addr: str) -> None:
        if addr in self.accounts:
            raise LedgerError(f"address already open: {addr}")
        self.accounts[addr] = 0

    def mint(self, addr: str, amount: int) -> TxRecord:
        """Create funds. The only operation allowed to break conservation."""
        if addr not in self.accounts:
            raise LedgerError(f"unknown address: {addr}")
        if amount <= 0:
            raise LedgerError("mint amount must be positive")
        self.accounts[addr] += amount
        self._minted_total += amount
        return self._submit(TxKind.MINT, "-", addr, amount)

    def balance(self, addr: str) -> int:
        return self.accounts[addr]

    def _debit(self, addr: str, amount: int) -> None:
        if self.accounts.get(addr, 0) < amount:
            raise InsufficientFunds(f"{addr} holds less than {amount}")
        self.accounts[addr] -= amount

    def _credit(self, addr: str, amount: int) -> None:
        if addr not in self.accounts:
            raise LedgerError(f"unknown address: {addr}")
        self.accounts[addr] += amount

    def transfer(self, src: str, dst: str, amount: int) -> TxRecord:
        self._debit(src, amount)
        self._credit(dst, amount)
        return self._submit(TxKind.TRANSFER, src, dst, amount)

    # -- honesty bonds ----------------------------------------------------------

    def lock_bond(self, agent: str, amount: int) -> BondingContract:
        self._debit(agent, amount)
        self._escrow_total += amount
        bond = BondingContract(address=f"bond:{len(self.bonds)}", agent=agent, amount=amount)
        self.bonds.append(bond)
        self._submit(TxKind.LOCK, agent, bond.address, amount)
        return bond

    def confiscate_bond(self, bond: BondingContract, manager: str) -> None:
        if bond.status is not BondStatus.LOCKED:
            raise StateError(f"bond {bond.address} already settled ({bond.status.value})")
        bond.status = BondStatus.CONFISCATED
        self._escrow_total -= bond.amount
        self._credit(manager, bond.amount)
        self._submit(TxKind.CONFISCATE, bond.address, manager, bond.amount)

    def refund_bond(self, bond: BondingContract) -> None:
        if bond.status is not BondStatus.LOCKED:
            raise StateError(f"bond {bond.address} already settled ({bond.status.value})")
        bond.status = BondStatus.REFUNDED
        self._escrow_total -= bond.amount
        self._credit(bond.agent, bond.amount)
        self._submit(TxKind.REFUND, bond.address, bond.agent, bond.amount)

    # -- whistleblower escrow -----------------------------------------------------

    def deploy_wb_contract(
        self, reporter_anon_addr: str, reported_group_size: int, honesty_deposit: int, manager: str
    ) -> WhistleblowerContract:
        """Deploy and fund the escrow with group_size * deposit from the manager."""
        if reporter_anon_addr in self._used_anon:
            raise LedgerError("anonymous address already bound to a contract (one-time use)")
        pool = reported_group_size * honesty_deposit
        self._debit(manager, pool)
        self._escrow_total += pool
        contract = WhistleblowerContract(
            address=f"wbc:{len(self.contracts)}",
            reporter=reporter_anon_addr,
            reported_group_size=reported_group_size,
            deposit_required=honesty_deposit,
            reward_pool=pool,
            deploy_tick=self.tick,
        )
        tx = self._submit(TxKind.FUND_REWARD, manager, contract.address, pool)
        # funding confirms within the settlement bound, by construction
        contract.funded_tick = tx.submit_tick + self.delta_ticks
        contract.state = EscrowState.FUNDED
        self.contracts.append(contract)
        self._used_anon.add(reporter_anon_addr)
        return contract

    def submit_reporting_deposit(
        self, contract: WhistleblowerContract, src: str, amount: int
    ) -> None:
        if contract.state is not EscrowState.FUNDED:
            raise StateError(f"contract {contract.address} not accepting deposits")
        if contract.deposit_held:
            raise StateError("reporting deposit already paid")
        if src != contract.reporter:
            raise LedgerError("deposit must come from the contract's anonymous address")
        if amount != contract.deposit_required:
            raise LedgerError(f"deposit must be exactly {contract.deposit_required}")
        self._debit(src, amount)
        self._escrow_total += amount
        contract.deposit_held = amount
        self._submit(TxKind.LOCK, src, contract.address, amount)

    def mark_evidence_received(self, contract: WhistleblowerContract) -> None:
        if contract.state is not EscrowState.FUNDED or not contract.deposit_held:
            raise StateError("evidence requires a funded contract with the deposit paid")
        contract.state = EscrowState.EVIDENCE_RECEIVED

    def resolve(
        self,
        contract: WhistleblowerContract,
        valid: bool,
        accused_bonds: list[BondingContract],
        manager: str,
        report_receipt_tick: int,
        damage_onset_tick: int | None = None,
        refund_reporting_deposit: bool | None = None,
    ) -> dict[str, int]:
        """Settle the escrow. Returns the payout map (address -> amount).

        A report received after damage onset settles on the invalid path even
        if substantively true. refund_reporting_deposit overrides the default
        deposit handling for superseded-but-truthful duplicates.
        """
        if contract.state in (EscrowState.RESOLVED_VALID, EscrowState.RESOLVED_INVALID):
            raise StateError(f"contract {contract.address} already resolved")
        if contract.state is not EscrowState.EVIDENCE_RECEIVED:
            raise StateError("cannot resolve before evidence is received")
        if contract.reporter not in self.accounts:
            raise LedgerError("reporter address unknown to the ledger")

        timely = damage_onset_tick is None or report_receipt_tick <= damage_onset_tick
        payouts: dict[str, int] = {}

        if valid and timely:
            for bond in accused_bonds:
                if bond.status is not BondStatus.LOCKED:
                    raise StateError(f"accused bond {bond.address} not locked")
            for bond in accused_bonds:
                self.confiscate_bond(bond, manager)
            amount = contract.reward_pool + contract.deposit_held
            self._escrow_total -= amount
            self._credit(contract.reporter, amount)
            self._submit(TxKind.PAYOUT, contract.address, contract.reporter, amount)
            payouts[contract.reporter] = amount
            contract.state = EscrowState.RESOLVED_VALID
        else:
            refund = refund_reporting_deposit if refund_reporting_deposit is not None else False
            if contract.deposit_held:
                dst = contract.reporter if refund else manager
                kind = TxKind.REFUND if refund else TxKind.CONFISCATE
                self._escrow_total -= contract.deposit_held
                self._credit(dst, contract.deposit_held)
                self._submit(kind, contract.address, dst, contract.deposit_held)
                payouts[dst] = payouts.get(dst, 0) + contract.deposit_held
            self._escrow_total -= contract.reward_pool
            self._credit(manager, contract.reward_pool)
            self._submit(TxKind.POOL_RETURN, contract.address, manager, contract.reward_pool)
            payouts[manager] = payouts.get(manager, 0) + contract.reward_pool
            contract.state = EscrowState.RESOLVED_INVALID

        contract.reward_pool = 0
        contract.deposit_held = 0
        return payouts

    # -- export ---------------------------------------------------------------

    def export_txlog_csv(self) -> str:
        """Confirmed transaction log, ordered by (submit tick, sequence)."""
        out = io.StringIO()
        out.write(f"# schema={TXLOG_SCHEMA}\n")
        out.write("tick_submit,tick_confirm,kind,from,to,amount\n")
        for tx in sorted(self.log, key=lambda t: (t.submit_tick, t.seq)):
            out.write(
                f"{tx.submit_tick},{tx.confirm_tick},{tx.kind.value},{tx.src},{tx.dst},{tx.amount}\n"
            )
        return out.getvalue()
