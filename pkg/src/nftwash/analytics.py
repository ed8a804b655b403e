"""Collection statistics, profit tables, wallet rankings and monthly series."""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Sequence

from .detector import WashCycle
from .ledger import Ledger, TokenHistory, usd
from .profits import ProfitBreakdown

MILLI = Decimal("0.001")
ZERO = Decimal("0.00")


class Metric(str, enum.Enum):
    PM = "pm"
    SALE = "sale"
    REPURCHASE = "repurchase"


_METRIC_FIELD = {
    Metric.PM: "pm_profit",
    Metric.SALE: "sale_profit",
    Metric.REPURCHASE: "repurchase_profit",
}


def percent(count, denominator) -> Decimal:
    if not denominator:
        return Decimal("0.000")
    return (Decimal(100) * Decimal(count) / Decimal(denominator)).quantize(MILLI, rounding=ROUND_HALF_EVEN)


def _mean3(values: Sequence) -> Decimal:
    return (sum(Decimal(v) for v in values) / len(values)).quantize(MILLI, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class CollectionStats:
    collection: str
    wash_sale_count: int
    wash_sale_pct: Decimal | None
    wash_token_count: int
    wash_token_pct: Decimal | None
    wash_wallet_count: int
    wash_wallet_pct: Decimal | None
    # denominators; None when a row is transcribed without them
    total_sales: int | None = None
    total_tokens: int | None = None
    total_wallets: int | None = None


@dataclass(frozen=True)
class CollectionAverages:
    """The 'Average' row of a count table: plain means, 3 decimals."""

    collection: str
    wash_sale_count: Decimal
    wash_sale_pct: Decimal
    wash_token_count: Decimal
    wash_token_pct: Decimal
    wash_wallet_count: Decimal
    wash_wallet_pct: Decimal


@dataclass(frozen=True)
class CollectionRollup:
    average: CollectionAverages
    total: CollectionStats


@dataclass(frozen=True)
class ProfitStats:
    collection: str
    metric: Metric
    max: Decimal
    avg: Decimal
    total: Decimal
    unit_count: int


@dataclass(frozen=True)
class WalletProfit:
    wallet: str
    sales_profit: Decimal
    is_wash_trader: bool


@dataclass(frozen=True)
class TimeSeries:
    bin: str  # YYYY-MM, UTC
    total_tx: int
    wash_tx: int
    avg_sale_usd: Decimal | None


@dataclass(frozen=True)
class PricePoint:
    timestamp: datetime
    usd_value: Decimal
    is_wash_sale: bool


def _wash_sale_keys(cycles: Iterable[WashCycle]) -> set[tuple[str, str, int]]:
    keys = set()
    for c in cycles:
        for tx in (c.entry, c.repurchase):
            if tx.is_sale:
                keys.add((c.token_id, *tx.key))
    return keys


def collection_stats(ledger: Ledger, cycles: Iterable[WashCycle]) -> CollectionStats:
    cycles = list(cycles)
    sales = [tx for tx in ledger.transactions() if tx.is_sale]
    tokens = {tx.token_id for tx in sales}
    wallets = {addr for tx in sales for addr in (tx.sender, tx.receiver)}

    wash_sales = len(_wash_sale_keys(cycles))
    wash_tokens = len({c.token_id for c in cycles})
    wash_wallets = len({c.suspect for c in cycles})
    return CollectionStats(
        collection=ledger.collection,
        wash_sale_count=wash_sales,
        wash_sale_pct=percent(wash_sales, len(sales)),
        wash_token_count=wash_tokens,
        wash_token_pct=percent(wash_tokens, len(tokens)),
        wash_wallet_count=wash_wallets,
        wash_wallet_pct=percent(wash_wallets, len(wallets)),
        total_sales=len(sales),
        total_tokens=len(tokens),
        total_wallets=len(wallets),
    )


def profit_stats(breakdowns: Sequence[ProfitBreakdown], metric: Metric | str, collection: str = "") -> ProfitStats:
    """Aggregate one metric per wash token, then take max / mean / sum across tokens."""
    metric = Metric(metric)
    attr = _METRIC_FIELD[metric]
    per_token: dict[str, Decimal] = {}
    for b in breakdowns:
        value = getattr(b, attr)
        if value is not None:
            per_token[b.token_id] = per_token.get(b.token_id, ZERO) + value
    if not per_token:
        return ProfitStats(collection, metric, ZERO, ZERO, ZERO, 0)
    values = list(per_token.values())
    total = usd(sum(values))
    return ProfitStats(
        collection=collection,
        metric=metric,
        max=usd(max(values)),
        avg=usd(total / len(values)),
        total=total,
        unit_count=len(values),
    )


def overall_rollup(rows: Sequence):
    """Combine per-collection rows into the summary row(s) of a table.

    ProfitStats rows give one 'Overall' ProfitStats.  CollectionStats rows
    give a CollectionRollup holding the 'Average' and 'Total' rows.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("overall_rollup needs at least one row")
    if all(isinstance(r, ProfitStats) for r in rows):
        return _rollup_profits(rows)
    if all(isinstance(r, CollectionStats) for r in rows):
        return _rollup_counts(rows)
    raise TypeError("rows must all be ProfitStats or all CollectionStats")


def _rollup_profits(rows: list[ProfitStats]) -> ProfitStats:
    metrics = {r.metric for r in rows}
    if len(metrics) != 1:
        raise ValueError(f"rows mix metrics: {sorted(m.value for m in metrics)}")
    if len(rows) == 1:
        return dataclasses.replace(rows[0], collection="Overall")
    total = usd(sum(r.total for r in rows))
    units = sum(r.unit_count for r in rows)
    populated = [r for r in rows if r.unit_count] or rows
    return ProfitStats(
        collection="Overall",
        metric=rows[0].metric,
        max=max(r.max for r in populated),
        avg=usd(total / units) if units else ZERO,
        total=total,
        unit_count=units,
    )


def _sum_or_none(values):
    values = list(values)
    return None if any(v is None for v in values) else sum(values)


def _rollup_counts(rows: list[CollectionStats]) -> CollectionRollup:
    def pcts(name):
        return [getattr(r, name) or 0 for r in rows]

    average = CollectionAverages(
        collection="Average",
        wash_sale_count=_mean3([r.wash_sale_count for r in rows]),
        wash_sale_pct=_mean3(pcts("wash_sale_pct")),
        wash_token_count=_mean3([r.wash_token_count for r in rows]),
        wash_token_pct=_mean3(pcts("wash_token_pct")),
        wash_wallet_count=_mean3([r.wash_wallet_count for r in rows]),
        wash_wallet_pct=_mean3(pcts("wash_wallet_pct")),
    )

    sales = sum(r.wash_sale_count for r in rows)
    tokens = sum(r.wash_token_count for r in rows)
    wallets = sum(r.wash_wallet_count for r in rows)
    d_sales = _sum_or_none(r.total_sales for r in rows)
    d_tokens = _sum_or_none(r.total_tokens for r in rows)
    # a wallet active in several collections is counted once per collection
    d_wallets = _sum_or_none(r.total_wallets for r in rows)
    total = CollectionStats(
        collection="Total",
        wash_sale_count=sales,
        wash_sale_pct=None if d_sales is None else percent(sales, d_sales),
        wash_token_count=tokens,
        wash_token_pct=None if d_tokens is None else percent(tokens, d_tokens),
        wash_wallet_count=wallets,
        wash_wallet_pct=None if d_wallets is None else percent(wallets, d_wallets),
        total_sales=d_sales,
        total_tokens=d_tokens,
        total_wallets=d_wallets,
    )
    return CollectionRollup(average, total)


def wallet_profits(ledger: Ledger, cycles: Iterable[WashCycle]) -> list[WalletProfit]:
    """Sales inflows minus purchase outflows per wallet, highest first.

    Transfers count as zero in both directions.
    """
    suspects = {c.suspect for c in cycles}
    balance: dict[str, Decimal] = defaultdict(lambda: ZERO)
    for tx in ledger.transactions():
        balance[tx.sender] += ZERO
        balance[tx.receiver] += ZERO
        if tx.is_sale:
            balance[tx.sender] += tx.usd_value
            balance[tx.receiver] -= tx.usd_value
    ranked = sorted(balance.items(), key=lambda kv: (-kv[1], kv[0]))
    return [WalletProfit(w, usd(v), w in suspects) for w, v in ranked]


def _month(ts: datetime) -> tuple[int, int]:
    return (ts.year, ts.month)


def wash_time_series(ledger: Ledger, cycles: Iterable[WashCycle]) -> list[TimeSeries]:
    txs = ledger.transactions()
    if not txs:
        return []
    flagged = _wash_sale_keys(cycles)
    first = min(_month(tx.timestamp) for tx in txs)
    last = max(_month(tx.timestamp) for tx in txs)

    totals: dict[tuple[int, int], int] = defaultdict(int)
    washes: dict[tuple[int, int], int] = defaultdict(int)
    amounts: dict[tuple[int, int], Decimal] = defaultdict(lambda: ZERO)
    for tx in txs:
        if not tx.is_sale:
            continue
        m = _month(tx.timestamp)
        totals[m] += 1
        amounts[m] += tx.usd_value
        if (tx.token_id, *tx.key) in flagged:
            washes[m] += 1

    series = []
    year, month = first
    while (year, month) <= last:
        m = (year, month)
        n = totals[m]
        series.append(
            TimeSeries(
                bin=f"{year:04d}-{month:02d}",
                total_tx=n,
                wash_tx=washes[m],
                avg_sale_usd=usd(amounts[m] / n) if n else None,
            )
        )
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
    return series


def token_price_points(history: TokenHistory, cycles: Iterable[WashCycle]) -> list[PricePoint]:
    """Sale prices of one token over time, wash-sale legs marked."""
    flagged = _wash_sale_keys(cycles)
    return [
        PricePoint(tx.timestamp, tx.usd_value, (tx.token_id, *tx.key) in flagged)
        for tx in history.txs
        if tx.is_sale
    ]


# -- report tables ---------------------------------------------------------


def _plain(value):
    if value is None:
        return None
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (Decimal, datetime)):
        return str(value)
    return value


def row_dict(row) -> dict:
    return {f.name: _plain(getattr(row, f.name)) for f in dataclasses.fields(row)}


def rows_to_csv(rows: Sequence, columns: Sequence[str] | None = None) -> str:
    """CSV with one column per dataclass field; absent values as empty cells."""
    if columns is None:
        if not rows:
            raise ValueError("columns required for an empty table")
        columns = [f.name for f in dataclasses.fields(rows[0])]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        d = row_dict(row)
        writer.writerow({k: "" if d.get(k) is None else d[k] for k in columns})
    return buf.getvalue()
