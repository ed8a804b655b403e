"""Per-cycle profit metrics.

Free transfers are assumed to move the token between related wallets, so a
transferee inherits the price its donor paid, and a sale that follows a
chain of free transfers is credited to the wallet that started the chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .detector import WashCycle
from .ledger import TokenHistory, Transaction, usd

ZERO = Decimal("0.00")


@dataclass(frozen=True)
class ProfitBreakdown:
    token_id: str
    cycle: WashCycle
    pm_profit: Decimal | None
    sale_profit: Decimal | None
    repurchase_profit: Decimal | None

    @property
    def suspect(self) -> str:
        return self.cycle.suspect


def resolve_cost_basis(history: TokenHistory, at: Transaction | None) -> Decimal:
    """Price paid for the token by whoever acquired it through ``at``.

    Walks backward from ``at`` (inclusive) across transfers to the nearest
    sale.  A token never sold up to that point (a mint) has basis zero, as
    does ``at=None``.
    """
    if at is None:
        return ZERO
    for k in range(history.index_of(at), -1, -1):
        tx = history.txs[k]
        if tx.is_sale:
            return tx.usd_value
    return ZERO


def _price(tx: Transaction) -> Decimal:
    return tx.usd_value if tx.is_sale else ZERO


def pm_profit(cycle: WashCycle, history: TokenHistory) -> Decimal | None:
    """Exit sale price minus the price the suspect paid before the cycle."""
    if cycle.post_context is None:
        return None
    return usd(cycle.post_context.usd_value - resolve_cost_basis(history, cycle.pre_context))


def sale_profit(cycle: WashCycle, history: TokenHistory) -> Decimal | None:
    if not cycle.entry.is_sale:
        return None
    return usd(cycle.entry.usd_value - resolve_cost_basis(history, cycle.pre_context))


def repurchase_profit(cycle: WashCycle, history: TokenHistory) -> Decimal | None:
    if cycle.post_context is None:
        return None
    # a repurchase by transfer (transfer matching mode) cost nothing
    return usd(cycle.post_context.usd_value - _price(cycle.repurchase))


def profit_breakdown(cycle: WashCycle, history: TokenHistory) -> ProfitBreakdown:
    return ProfitBreakdown(
        token_id=cycle.token_id,
        cycle=cycle,
        pm_profit=pm_profit(cycle, history),
        sale_profit=sale_profit(cycle, history),
        repurchase_profit=repurchase_profit(cycle, history),
    )
