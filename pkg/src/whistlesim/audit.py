"""Episode transcripts and their offline verification.

A transcript is JSON lines: a meta header, the protocol step events, the
confirmed transaction log, and a closing balance snapshot. The audit replays
the transactions from zero, so a corrupted amount, a negative balance, an
over-deadline confirmation, or an out-of-order protocol step is caught
without access to the original process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

TRANSCRIPT_SCHEMA = "transcript-v1"

_STEP_ORDER = [
    "report_received",
    "contract_deployed",
    "deposit_received",
    "evidence_received",
    "verified",
    "enforced",
]


def build_transcript(manager, ledger, config_fingerprint: str = "") -> str:
    """Merge protocol events, the tx log, and a balance snapshot into JSONL."""
    lines = [
        json.dumps(
            {
                "kind": "meta",
                "schema": TRANSCRIPT_SCHEMA,
                "delta_ticks": ledger.delta_ticks,
                "config": config_fingerprint,
            },
            sort_keys=True,
        )
    ]
    if manager is not None:
        for event in manager.transcript:
            lines.append(json.dumps({"kind": "protocol", **event}, sort_keys=True))
    for tx in sorted(ledger.log, key=lambda t: (t.submit_tick, t.seq)):
        lines.append(
            json.dumps(
                {
                    "kind": "tx",
                    "seq": tx.seq,
                    "op": tx.kind.value,
                    "from": tx.src,
                    "to": tx.dst,
                    "amount": tx.amount,
                    "submit": tx.submit_tick,
                    "confirm": tx.confirm_tick,
                },
                sort_keys=True,
            )
        )
    snapshot = {
        "kind": "balances",
        "accounts": dict(sorted(ledger.accounts.items())),
        "escrow_total": ledger.escrow_total(),
    }
    lines.append(json.dumps(snapshot, sort_keys=True))
    return "\n".join(lines) + "\n"


@dataclass
class AuditReport:
    ok: bool
    issues: list[str] = field(default_factory=list)
    timeline: list[str] = field(default_factory=list)

    def render(self) -> str:
        out = list(self.timeline)
        if self.issues:
            out.append("")
            out.extend(f"VIOLATION: {i}" for i in self.issues)
        out.append("")
        out.append("audit: OK" if self.ok else f"audit: {len(self.issues)} violation(s)")
        return "\n".join(out) + "\n"


def audit_transcript(text: str) -> AuditReport:
    issues: list[str] = []
    timeline: list[str] = []
    meta = None
    balances: dict[str, int] = {}
    escrow = 0
    minted = 0
    snapshot = None
    steps_by_contract: dict[str, list[str]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: not valid JSON: {exc}") from exc
        kind = rec.get("kind")
        if kind == "meta":
            meta = rec
        elif kind == "protocol":
            step = rec.get("step", "?")
            contract = rec.get("contract", "-")
            timeline.append(f"tick {rec.get('tick', '?'):>5}  {step:<18} {contract}")
            if contract != "-":
                steps_by_contract.setdefault(contract, []).append(step)
        elif kind == "tx":
            amount = rec["amount"]
            src, dst = rec["from"], rec["to"]
            if amount <= 0:
                issues.append(f"line {lineno}: non-positive amount {amount}")
                continue
            if rec["confirm"] is None:
                issues.append(f"line {lineno}: unconfirmed transaction")
            elif meta and rec["confirm"] - rec["submit"] > meta["delta_ticks"]:
                issues.append(
                    f"line {lineno}: confirmation exceeded the settlement bound "
                    f"({rec['confirm']} - {rec['submit']} > {meta['delta_ticks']})"
                )
            op = rec["op"]
            if op == "mint":
                balances[dst] = balances.get(dst, 0) + amount
                minted += amount
            elif op in ("lock", "fund_reward"):
                balances[src] = balances.get(src, 0) - amount
                escrow += amount
            elif op in ("confiscate", "refund", "payout", "pool_return"):
                escrow -= amount
                balances[dst] = balances.get(dst, 0) + amount
            else:  # transfer
                balances[src] = balances.get(src, 0) - amount
                balances[dst] = balances.get(dst, 0) + amount
            negative = [a for a, b in balances.items() if b < 0]
            if negative:
                issues.append(f"line {lineno}: negative balance for {negative[0]}")
                balances = {a: max(b, 0) for a, b in balances.items()}
            if escrow < 0:
                issues.append(f"line {lineno}: escrow balance went negative")
                escrow = 0
            if sum(balances.values()) + escrow != minted:
                issues.append(f"line {lineno}: conservation broken")
        elif kind == "balances":
            snapshot = rec

    if meta is None:
        issues.append("transcript has no meta header")
    for contract, steps in sorted(steps_by_contract.items()):
        expected = [s for s in _STEP_ORDER if s in steps]
        if steps != expected or len(steps) != len(set(steps)):
            issues.append(f"{contract}: protocol steps out of order: {steps}")
    if snapshot is not None:
        replayed = {a: b for a, b in balances.items() if b or a in snapshot["accounts"]}
        declared = {a: b for a, b in snapshot["accounts"].items()}
        for addr in sorted(set(replayed) | set(declared)):
            if replayed.get(addr, 0) != declared.get(addr, 0):
                issues.append(
                    f"balance mismatch for {addr}: replay says "
                    f"{replayed.get(addr, 0)}, transcript says {declared.get(addr, 0)}"
                )
        if snapshot["escrow_total"] != escrow:
            issues.append(
                f"escrow mismatch: replay says {escrow}, "
                f"transcript says {snapshot['escrow_total']}"
            )
    return AuditReport(ok=not issues, issues=issues, timeline=timeline)
