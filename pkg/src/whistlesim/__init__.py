"""Economic anti-collusion mechanism: game math, anonymous reporting, escrow
ledger, and a multi-agent task-economy simulator."""

__version__ = "0.1.0"
