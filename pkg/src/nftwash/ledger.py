"""Transaction ingestion: parsing, validation and per-token indexing.

Input arrives as CSV (header row, exact column names) or JSONL (one object
per line, same keys).  Every record moves one token from ``sender`` to
``receiver``; a record carrying a positive ``usd_value`` is a sale, anything
else is a transfer.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from typing import BinaryIO, Iterable, Sequence, TextIO

from .errors import DuplicateKey, MalformedRow, MissingField, MixedCollections, NegativeValue

CENT = Decimal("0.01")

COLUMNS = (
    "tx_hash",
    "seq",
    "timestamp",
    "sender",
    "receiver",
    "collection",
    "token_id",
    "pay_amount",
    "pay_currency",
    "usd_value",
)
REQUIRED = ("tx_hash", "timestamp", "sender", "receiver", "collection", "token_id")

_TS_FORMAT = "%Y-%m-%d %H:%M:%S"


class Format(str, enum.Enum):
    CSV = "csv"
    JSONL = "jsonl"


class TxKind(str, enum.Enum):
    SALE = "sale"
    TRANSFER = "transfer"


def usd(value) -> Decimal:
    """Quantize a monetary amount to cents, banker's rounding."""
    return Decimal(value).quantize(CENT, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class Transaction:
    tx_hash: str
    seq: int
    timestamp: datetime
    sender: str
    receiver: str
    collection: str
    token_id: str
    pay_amount: Decimal | None = None
    pay_currency: str | None = None
    usd_value: Decimal | None = None

    @property
    def kind(self) -> TxKind:
        if self.usd_value is not None and self.usd_value > 0:
            return TxKind.SALE
        return TxKind.TRANSFER

    @property
    def is_sale(self) -> bool:
        return self.kind is TxKind.SALE

    @property
    def key(self) -> tuple[str, int]:
        return (self.tx_hash, self.seq)

    @property
    def order_key(self) -> tuple[datetime, int, str]:
        return (self.timestamp, self.seq, self.tx_hash)


@dataclass(frozen=True)
class TokenHistory:
    collection: str
    token_id: str
    txs: tuple[Transaction, ...]

    def __len__(self) -> int:
        return len(self.txs)

    def __iter__(self):
        return iter(self.txs)

    def index_of(self, tx: Transaction) -> int:
        for i, t in enumerate(self.txs):
            if t.key == tx.key:
                return i
        raise ValueError(f"transaction {tx.key} not in history of token {self.token_id}")

    @property
    def sales(self) -> tuple[Transaction, ...]:
        return tuple(t for t in self.txs if t.is_sale)


@dataclass(frozen=True)
class Ledger:
    """All token histories of one collection.  Treat as read-only."""

    collection: str
    histories: dict[str, TokenHistory]
    warnings: tuple[tuple[str, str], ...] = field(default=())

    def __len__(self) -> int:
        return sum(len(h) for h in self.histories.values())

    def transactions(self) -> list[Transaction]:
        return [tx for h in self.histories.values() for tx in h.txs]


# -- parsing ---------------------------------------------------------------


def parse_timestamp(text: str) -> datetime:
    """Parse ``YYYY-MM-DD H:MM:SS`` or ISO-8601; naive values are UTC."""
    text = text.strip()
    try:
        ts = datetime.strptime(text, _TS_FORMAT)
    except ValueError:
        iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
        ts = datetime.fromisoformat(iso)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(_TS_FORMAT)


def _decimal(raw, name: str, line: int) -> Decimal | None:
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw == "":
            return None
    if isinstance(raw, bool):
        raise MalformedRow(line, f"{name} is not a number: {raw!r}")
    try:
        value = Decimal(raw) if not isinstance(raw, float) else Decimal(repr(raw))
    except (InvalidOperation, ValueError, TypeError):
        raise MalformedRow(line, f"{name} is not a number: {raw!r}") from None
    if not value.is_finite():
        raise MalformedRow(line, f"{name} is not finite: {raw!r}")
    if value < 0:
        raise NegativeValue(line, f"{name} is negative: {raw}")
    return value


def _text(raw) -> str | None:
    if raw is None:
        return None
    if not isinstance(raw, str):
        raw = str(raw)
    raw = raw.strip()
    return raw or None


def _record(row: dict, line: int, position: int) -> Transaction:
    for name in REQUIRED:
        if _text(row.get(name)) is None:
            raise MalformedRow(line, f"empty {name}")

    raw_seq = row.get("seq")
    if _text(raw_seq) is None:
        seq = position
    else:
        try:
            seq = int(str(raw_seq).strip())
        except ValueError:
            raise MalformedRow(line, f"seq is not an integer: {raw_seq!r}") from None
        if seq < 0:
            raise MalformedRow(line, f"seq is negative: {seq}")

    ts_raw = row["timestamp"]
    if not isinstance(ts_raw, str):
        raise MalformedRow(line, f"timestamp must be a string: {ts_raw!r}")
    try:
        timestamp = parse_timestamp(ts_raw)
    except ValueError:
        raise MalformedRow(line, f"unparseable timestamp {ts_raw!r}") from None

    usd_value = _decimal(row.get("usd_value"), "usd_value", line)
    return Transaction(
        tx_hash=_text(row["tx_hash"]).lower(),
        seq=seq,
        timestamp=timestamp,
        sender=_text(row["sender"]).lower(),
        receiver=_text(row["receiver"]).lower(),
        collection=_text(row["collection"]),
        token_id=_text(row["token_id"]),
        pay_amount=_decimal(row.get("pay_amount"), "pay_amount", line),
        pay_currency=_text(row.get("pay_currency")),
        usd_value=None if usd_value is None else usd(usd_value),
    )


def _parse_csv(stream: TextIO) -> list[Transaction]:
    reader = csv.DictReader(stream)
    header = reader.fieldnames
    if not header:
        raise MissingField(REQUIRED[0], line=1)
    header = [h.strip() for h in header]
    reader.fieldnames = header
    for name in REQUIRED:
        if name not in header:
            raise MissingField(name, line=1)

    txs = []
    for position, row in enumerate(reader):
        line = reader.line_num
        if None in row or any(v is None for v in row.values()):
            raise MalformedRow(line, f"expected {len(header)} fields")
        txs.append(_record(row, line, position))
    return txs


def _parse_jsonl(stream: TextIO) -> list[Transaction]:
    txs = []
    position = 0
    for line, text in enumerate(stream, start=1):
        if not text.strip():
            continue
        try:
            row = json.loads(text, parse_float=Decimal)
        except json.JSONDecodeError as exc:
            raise MalformedRow(line, f"invalid JSON: {exc.msg}") from None
        if not isinstance(row, dict):
            raise MalformedRow(line, "expected a JSON object")
        for name in REQUIRED:
            if name not in row or row[name] is None:
                raise MissingField(name, line=line)
        txs.append(_record(row, line, position))
        position += 1
    return txs


def parse_transactions(source: BinaryIO | bytes, format: Format | str = Format.CSV) -> list[Transaction]:
    """Parse a UTF-8 byte stream into transactions, preserving input order.

    ``seq`` defaults to the record's 0-based position when the column is
    absent or empty.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")
    try:
        if Format(format) is Format.CSV:
            return _parse_csv(text)
        return _parse_jsonl(text)
    except UnicodeDecodeError as exc:
        raise MalformedRow(0, f"input is not UTF-8: {exc.reason}") from None
    finally:
        text.detach()


# -- indexing --------------------------------------------------------------


def build_ledger(txs: Iterable[Transaction]) -> Ledger:
    """Group transactions by token and sort each history by (timestamp, seq)."""
    txs = list(txs)
    collections = sorted({tx.collection for tx in txs})
    if len(collections) > 1:
        raise MixedCollections(f"expected one collection, got {collections}")

    seen: set[tuple[str, int]] = set()
    by_token: dict[str, list[Transaction]] = defaultdict(list)
    for tx in txs:
        if tx.key in seen:
            raise DuplicateKey(f"repeated (tx_hash, seq) {tx.key}")
        seen.add(tx.key)
        by_token[tx.token_id].append(tx)

    collection = collections[0] if collections else ""
    warnings: list[tuple[str, str]] = []
    histories = {}
    for token_id in sorted(by_token):
        ordered = sorted(by_token[token_id], key=lambda t: t.order_key)
        warnings.extend((token_id, w) for w in _check_history(ordered))
        histories[token_id] = TokenHistory(collection, token_id, tuple(ordered))
    return Ledger(collection, histories, tuple(warnings))


def _check_history(txs: Sequence[Transaction]) -> list[str]:
    warnings = []
    for prev, cur in zip(txs, txs[1:]):
        if (prev.timestamp, prev.seq) == (cur.timestamp, cur.seq):
            warnings.append(f"ambiguous order: {prev.tx_hash} and {cur.tx_hash} share timestamp and seq {cur.seq}")
        if prev.receiver != cur.sender:
            warnings.append(
                f"broken ownership chain before {cur.tx_hash}: {prev.receiver} received, {cur.sender} sent"
            )
    for tx in txs:
        if tx.usd_value is not None and tx.usd_value == 0:
            warnings.append(f"zero-value sale {tx.tx_hash} treated as transfer")
    return warnings


# -- serialization ---------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, datetime):
        return format_timestamp(value)
    return str(value)


def write_csv(txs: Iterable[Transaction], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for tx in txs:
        writer.writerow([_cell(getattr(tx, name)) for name in COLUMNS])


def ledger_to_csv(ledger: Ledger) -> str:
    buf = io.StringIO()
    write_csv(ledger.transactions(), buf)
    return buf.getvalue()
