"""Wash-trade cycle detection and profit analytics for NFT transaction histories."""

from .analytics import (
    CollectionStats,
    Metric,
    ProfitStats,
    TimeSeries,
    WalletProfit,
    collection_stats,
    overall_rollup,
    profit_stats,
    wallet_profits,
    wash_time_series,
)
from .detector import DetectorConfig, WashCycle, detect_ledger, detect_wash_sales, find_intermediaries, label_all
from .graphkit import EdgeLabel, Label, TokenGraph, build_graph, to_dot
from .ledger import Format, Ledger, TokenHistory, Transaction, TxKind, build_ledger, parse_transactions
from .profits import ProfitBreakdown, pm_profit, profit_breakdown, repurchase_profit, resolve_cost_basis, sale_profit

__version__ = "0.1.0"

__all__ = [
    "CollectionStats",
    "DetectorConfig",
    "EdgeLabel",
    "Format",
    "Label",
    "Ledger",
    "Metric",
    "ProfitBreakdown",
    "ProfitStats",
    "TimeSeries",
    "TokenGraph",
    "TokenHistory",
    "Transaction",
    "TxKind",
    "WalletProfit",
    "WashCycle",
    "build_graph",
    "build_ledger",
    "collection_stats",
    "detect_ledger",
    "detect_wash_sales",
    "find_intermediaries",
    "label_all",
    "overall_rollup",
    "parse_transactions",
    "pm_profit",
    "profit_breakdown",
    "profit_stats",
    "repurchase_profit",
    "resolve_cost_basis",
    "sale_profit",
    "to_dot",
    "wallet_profits",
    "wash_time_series",
]
