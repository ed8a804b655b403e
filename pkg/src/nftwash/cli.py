"""Command-line entry point.

    nftwash detect --input txs.csv --out results/
    nftwash report --input a.csv --input b.jsonl --format json --out results/
    nftwash graph --input txs.csv --token 1332 --out graphs/
    nftwash timeseries --input txs.csv --out results/
    nftwash synth --seed 7 --tx-count 20 --cycles 1 > fixture.csv

Exit status is 0 whenever the run completed, including runs with no
findings, and 1 on unreadable input or bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import re
import sys
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import __version__
from .analytics import (
    CollectionStats,
    Metric,
    ProfitStats,
    TimeSeries,
    WalletProfit,
    collection_stats,
    overall_rollup,
    profit_stats,
    row_dict,
    rows_to_csv,
    wallet_profits,
    wash_time_series,
)
from .detector import DetectorConfig, WashCycle, detect_ledger, label_all
from .errors import UnknownToken, WashError
from .graphkit import build_graph, to_dot, to_json
from .ledger import Format, Ledger, Transaction, build_ledger, format_timestamp, parse_transactions, write_csv
from .profits import ProfitBreakdown, profit_breakdown
from .synthlab import PlantedCycle, ScenarioSpec, generate

FIXED_CLOCK = "1970-01-01T00:00:00Z"


class _Run:
    """Collects output files for one command and writes the manifest last."""

    def __init__(self, args: argparse.Namespace, command: str):
        self.args = args
        self.command = command
        self.out = Path(args.out)
        self.outputs: list[str] = []
        self.inputs: list[dict] = []

    def load(self, path: str, input_format: str | None = None) -> Ledger:
        data = Path(path).read_bytes()
        self.inputs.append({"path": path, "sha256": hashlib.sha256(data).hexdigest()})
        fmt = Format(input_format) if input_format else _guess_format(path)
        return build_ledger(parse_transactions(data, fmt))

    def write(self, name: str, text: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text, encoding="utf-8", newline="")
        self.outputs.append(name)

    def finish(self) -> None:
        clock = self.args.fixed_clock or datetime.now(timezone.utc).isoformat(timespec="seconds")
        manifest = {
            "tool": "nftwash",
            "version": __version__,
            "command": self.command,
            "inputs": self.inputs,
            "config": _config_echo(self.args),
            "outputs": self.outputs,
            "generated_at": clock,
        }
        self.write("manifest.json", _dump(manifest))


def _guess_format(path: str) -> Format:
    return Format.JSONL if path.lower().endswith((".jsonl", ".json", ".ndjson")) else Format.CSV


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _config(args: argparse.Namespace) -> DetectorConfig:
    return DetectorConfig(
        window=timedelta(days=args.window_days),
        include_transfers_in_matching=args.include_transfers,
        windowless=args.windowless,
    )


def _config_echo(args: argparse.Namespace) -> dict:
    return {
        "window_days": args.window_days,
        "windowless": args.windowless,
        "include_transfers": args.include_transfers,
    }


def _money(value: Decimal | None) -> str | None:
    return None if value is None else str(value)


def tx_json(tx: Transaction | None) -> dict | None:
    if tx is None:
        return None
    return {
        "tx_hash": tx.tx_hash,
        "seq": tx.seq,
        "timestamp": format_timestamp(tx.timestamp),
        "sender": tx.sender,
        "receiver": tx.receiver,
        "kind": tx.kind.value,
        "usd_value": _money(tx.usd_value),
    }


def cycle_json(cycle: WashCycle, breakdown: ProfitBreakdown) -> dict:
    return {
        "token_id": cycle.token_id,
        "suspect": cycle.suspect,
        "entry": tx_json(cycle.entry),
        "repurchase": tx_json(cycle.repurchase),
        "intermediaries": [tx_json(tx) for tx in cycle.intermediaries],
        "wallets_of_interest": list(cycle.wallets_of_interest),
        "pre_context": tx_json(cycle.pre_context),
        "post_context": tx_json(cycle.post_context),
        "duration_seconds": int(cycle.duration.total_seconds()),
        "profits": {
            "pm_profit": _money(breakdown.pm_profit),
            "sale_profit": _money(breakdown.sale_profit),
            "repurchase_profit": _money(breakdown.repurchase_profit),
        },
        "warnings": list(cycle.warnings),
    }


def _analyse(ledger: Ledger, config: DetectorConfig):
    found = detect_ledger(ledger, config)
    cycles = [c for token in sorted(found) for c in found[token]]
    breakdowns = [profit_breakdown(c, ledger.histories[c.token_id]) for c in cycles]
    return found, cycles, breakdowns


# -- commands --------------------------------------------------------------


def cmd_detect(args: argparse.Namespace) -> int:
    run = _Run(args, "detect")
    ledger = run.load(args.input, args.input_format)
    config = _config(args)
    _, cycles, breakdowns = _analyse(ledger, config)
    doc = {
        "collection": ledger.collection,
        "config": _config_echo(args),
        "transaction_count": len(ledger),
        "cycle_count": len(cycles),
        "cycles": [cycle_json(c, b) for c, b in zip(cycles, breakdowns)],
        "warnings": [{"token_id": t, "description": d} for t, d in ledger.warnings],
    }
    run.write("cycles.json", _dump(doc))
    run.finish()
    print(f"{len(cycles)} wash cycle(s) across {len({c.token_id for c in cycles})} token(s)", file=sys.stderr)
    return 0


_COUNT_COLUMNS = [f for f in CollectionStats.__dataclass_fields__]
_PROFIT_COLUMNS = [f for f in ProfitStats.__dataclass_fields__]
_WALLET_COLUMNS = ["collection", *WalletProfit.__dataclass_fields__]


def _read_replay(path: str) -> tuple[list[CollectionStats], list[ProfitStats]]:
    text = Path(path).read_text(encoding="utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    counts, profits = [], []

    def dec(value):
        return Decimal(value) if value not in (None, "") else None

    def num(value):
        return int(value) if value not in (None, "") else None

    try:
        for row in reader:
            if "metric" in row:
                profits.append(
                    ProfitStats(
                        collection=row["collection"],
                        metric=Metric(row["metric"].lower()),
                        max=Decimal(row["max"]),
                        avg=Decimal(row["avg"]),
                        total=Decimal(row["total"]),
                        unit_count=int(row["unit_count"]),
                    )
                )
            else:
                counts.append(
                    CollectionStats(
                        collection=row["collection"],
                        wash_sale_count=int(row["wash_sale_count"]),
                        wash_sale_pct=dec(row.get("wash_sale_pct")),
                        wash_token_count=int(row["wash_token_count"]),
                        wash_token_pct=dec(row.get("wash_token_pct")),
                        wash_wallet_count=int(row["wash_wallet_count"]),
                        wash_wallet_pct=dec(row.get("wash_wallet_pct")),
                        total_sales=num(row.get("total_sales")),
                        total_tokens=num(row.get("total_tokens")),
                        total_wallets=num(row.get("total_wallets")),
                    )
                )
    except (KeyError, ValueError, InvalidOperation) as exc:
        raise ValueError(f"{path}: bad replay row: {exc}") from None
    return counts, profits


def cmd_report(args: argparse.Namespace) -> int:
    if not args.input and not args.replay:
        raise ValueError("report needs at least one --input or --replay")
    run = _Run(args, "report")
    config = _config(args)
    count_rows: list[CollectionStats] = []
    profit_rows: list[ProfitStats] = []
    wallets: dict[str, list[WalletProfit]] = {}

    for path in args.input or []:
        ledger = run.load(path, args.input_format)
        _, cycles, breakdowns = _analyse(ledger, config)
        count_rows.append(collection_stats(ledger, cycles))
        for metric in Metric:
            profit_rows.append(profit_stats(breakdowns, metric, ledger.collection))
        wallets[ledger.collection] = wallet_profits(ledger, cycles)
    for path in args.replay or []:
        data = Path(path).read_bytes()
        run.inputs.append({"path": path, "sha256": hashlib.sha256(data).hexdigest()})
        counts, profits = _read_replay(path)
        count_rows.extend(counts)
        profit_rows.extend(profits)

    rollup = overall_rollup(count_rows) if count_rows else None
    by_metric = {}
    for metric in Metric:
        rows = [r for r in profit_rows if r.metric is metric]
        if rows:
            by_metric[metric] = (rows, overall_rollup(rows))

    if args.format == "json":
        doc = {
            "collections": [row_dict(r) for r in count_rows],
            "average": row_dict(rollup.average) if rollup else None,
            "total": row_dict(rollup.total) if rollup else None,
            "profits": {
                m.value: {"rows": [row_dict(r) for r in rows], "overall": row_dict(overall)}
                for m, (rows, overall) in by_metric.items()
            },
            "wallets": {c: [row_dict(w) for w in ws] for c, ws in wallets.items()},
        }
        run.write("stats.json", _dump(doc))
    else:
        table = count_rows + ([rollup.average, rollup.total] if rollup else [])
        run.write("stats.csv", rows_to_csv(table, _COUNT_COLUMNS))
        profit_table = [r for rows, overall in by_metric.values() for r in [*rows, overall]]
        run.write("profit_stats.csv", rows_to_csv(profit_table, _PROFIT_COLUMNS))
        if wallets:
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=_WALLET_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for collection, ws in wallets.items():
                for w in ws:
                    writer.writerow({"collection": collection, **row_dict(w)})
            run.write("wallets.csv", buf.getvalue())
    run.finish()
    return 0


def _safe_name(token_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", token_id)


def cmd_graph(args: argparse.Namespace) -> int:
    run = _Run(args, "graph")
    ledger = run.load(args.input, args.input_format)
    found = detect_ledger(ledger, _config(args))
    if args.token:
        unknown = [t for t in args.token if t not in ledger.histories]
        if unknown:
            raise UnknownToken(f"unknown token id(s): {', '.join(unknown)}")
        tokens = list(dict.fromkeys(args.token))
    else:
        tokens = sorted(found)
    for token_id in sorted(tokens):
        history = ledger.histories[token_id]
        graph = build_graph(history)
        labels = label_all(history, found.get(token_id, []))
        name = f"token_{_safe_name(token_id)}"
        run.write(f"{name}.dot", to_dot(graph, labels))
        run.write(f"{name}.json", _dump(to_json(graph, labels)))
    run.finish()
    return 0


def cmd_timeseries(args: argparse.Namespace) -> int:
    run = _Run(args, "timeseries")
    ledger = run.load(args.input, args.input_format)
    _, cycles, _ = _analyse(ledger, _config(args))
    series = wash_time_series(ledger, cycles)
    run.write("timeseries.csv", rows_to_csv(series, list(TimeSeries.__dataclass_fields__)))
    run.finish()
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    planted = tuple(
        PlantedCycle(suspect=k, hops=args.hops, gap=timedelta(days=args.gap_days)) for k in range(args.cycles)
    )
    spec = ScenarioSpec(
        wallet_count=args.wallets,
        tx_count=args.tx_count,
        planted_cycles=planted,
        transfer_ratio=args.transfer_ratio,
        filler=args.filler,
        seed=args.seed,
        token_id=args.token_id,
    )
    history = generate(spec)
    if args.output == "-":
        write_csv(history.txs, sys.stdout)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(history.txs, fh)
    return 0


# -- argument parsing ------------------------------------------------------


def _positive_days(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("window must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nftwash", description="Detect wash-trade cycles in NFT transaction histories.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--window-days", type=_positive_days, default=30.0)
    common.add_argument("--windowless", action="store_true", help="ignore the repurchase window")
    common.add_argument(
        "--include-transfers", action="store_true", help="let free transfers open and close cycles"
    )
    common.add_argument("--input-format", choices=[f.value for f in Format])
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument(
        "--fixed-clock",
        nargs="?",
        const=FIXED_CLOCK,
        default=None,
        help="stamp the manifest with a fixed time (for reproducible output)",
    )

    p = sub.add_parser("detect", parents=[common], help="find wash cycles and their profits")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", parents=[common], help="collection and profit statistics")
    p.add_argument("--input", action="append", help="transaction file, one per collection")
    p.add_argument("--replay", action="append", help="CSV of precomputed stats rows to roll up")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("graph", parents=[common], help="DOT and JSON graphs per token")
    p.add_argument("--input", required=True)
    p.add_argument("--token", action="append", help="token id to render (repeatable)")
    p.add_argument("--all", action="store_true", help="render every token with a wash cycle (default)")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("timeseries", parents=[common], help="monthly wash vs total sales")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_timeseries)

    p = sub.add_parser("synth", help="generate a synthetic token history as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wallets", type=int, default=50)
    p.add_argument("--tx-count", type=int, default=20)
    p.add_argument("--cycles", type=int, default=1, help="planted cycles, one suspect each")
    p.add_argument("--hops", type=int, default=1)
    p.add_argument("--gap-days", type=float, default=5.0)
    p.add_argument("--transfer-ratio", type=float, default=0.0)
    p.add_argument("--filler", choices=["fresh", "random"], default="fresh")
    p.add_argument("--token-id", default="1")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (WashError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
