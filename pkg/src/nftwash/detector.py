"""Wash-sale cycle detection.

A wallet that sells a token and buys the same token back within the window
closes a wash cycle.  Sales are scanned chronologically; each sale is paired
with the earliest later sale back into its seller that has not already been
used as a repurchase.  The transactions carrying the token between the two
legs are then recovered by a breadth-first search over the token graph.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass
from datetime import timedelta
from typing import Sequence

from .errors import NoPath
from .graphkit import Edge, EdgeLabel, Label, TokenGraph, build_graph
from .ledger import Ledger, TokenHistory, Transaction

DEFAULT_WINDOW = timedelta(days=30)


@dataclass(frozen=True)
class DetectorConfig:
    window: timedelta = DEFAULT_WINDOW
    include_transfers_in_matching: bool = False
    windowless: bool = False

    def __post_init__(self):
        if not self.windowless and self.window <= timedelta(0):
            raise ValueError(f"window must be positive, got {self.window}")

    def within(self, delta: timedelta) -> bool:
        return self.windowless or delta <= self.window


@dataclass(frozen=True)
class WashCycle:
    token_id: str
    suspect: str
    entry: Transaction
    repurchase: Transaction
    intermediaries: tuple[Transaction, ...] = ()
    pre_context: Transaction | None = None
    post_context: Transaction | None = None
    warnings: tuple[str, ...] = ()

    @property
    def duration(self) -> timedelta:
        return self.repurchase.timestamp - self.entry.timestamp

    @property
    def wallets_of_interest(self) -> tuple[str, ...]:
        """Wallets other than the suspect that touched the token inside the cycle."""
        seen = []
        for tx in self.intermediaries:
            for addr in (tx.sender, tx.receiver):
                if addr != self.suspect and addr not in seen:
                    seen.append(addr)
        return tuple(seen)


def match_repurchases(history: TokenHistory, config: DetectorConfig) -> list[tuple[int, int]]:
    """Greedy earliest-repurchase matching; returns (entry, repurchase) history indices.

    A self-sale (sender == receiver) is its own repurchase.
    """
    txs = history.txs
    events = [i for i, tx in enumerate(txs) if tx.is_sale or config.include_transfers_in_matching]
    consumed: set[int] = set()
    pairs = []
    for pos, i in enumerate(events):
        seller = txs[i].sender
        for j in events[pos:]:
            if not config.within(txs[j].timestamp - txs[i].timestamp):
                break
            if j not in consumed and txs[j].receiver == seller:
                consumed.add(j)
                pairs.append((i, j))
                break
    return pairs


def find_intermediaries(graph: TokenGraph, entry: Edge, repurchase: Edge) -> list[Edge]:
    """Edges carrying the token from the entry buyer back to the repurchase seller.

    Breadth-first search over edge states restricted to (entry, repurchase].
    A holder passes the token on through its first departure after it
    received it, so later departures from the same wallet are not reachable
    from that arrival.  Raises NoPath when the chain is broken.
    """
    if repurchase.index < entry.index:
        raise ValueError("repurchase precedes entry")
    if repurchase.index == entry.index:
        return []

    parent: dict[int, int | None] = {entry.index: None}
    queue = deque([entry.index])
    while queue:
        current = queue.popleft()
        holder = graph.edges[current].target
        for nxt in _next_departures(graph, holder, current, repurchase.index):
            if nxt in parent:
                continue
            parent[nxt] = current
            if nxt == repurchase.index:
                path = []
                step = parent[nxt]
                while step is not None and step != entry.index:
                    path.append(graph.edges[step])
                    step = parent[step]
                return path[::-1]
            queue.append(nxt)
    raise NoPath(
        f"token {graph.token_id}: no ownership path from edge {entry.index} to edge {repurchase.index}"
    )


def _next_departures(graph: TokenGraph, node: int, after: int, limit: int) -> list[int]:
    outgoing = graph.out[node]
    k = bisect.bisect_right(outgoing, after)
    if k < len(outgoing) and outgoing[k] <= limit:
        return [outgoing[k]]
    return []


def detect_wash_sales(
    history: TokenHistory, config: DetectorConfig = DetectorConfig()
) -> list[WashCycle]:
    if not history.txs:
        return []
    txs = history.txs
    graph = build_graph(history)
    cycles = []
    for i, j in match_repurchases(history, config):
        suspect = txs[i].sender
        warnings: tuple[str, ...] = ()
        try:
            middle = [e.tx for e in find_intermediaries(graph, graph.edges[i], graph.edges[j])]
        except NoPath as exc:
            middle = []
            warnings = (str(exc),)
        pre = next((txs[k] for k in range(i - 1, -1, -1) if txs[k].receiver == suspect), None)
        post = next((txs[k] for k in range(j + 1, len(txs)) if txs[k].is_sale), None)
        cycles.append(
            WashCycle(
                token_id=history.token_id,
                suspect=suspect,
                entry=txs[i],
                repurchase=txs[j],
                intermediaries=tuple(middle),
                pre_context=pre,
                post_context=post,
                warnings=warnings,
            )
        )
    return cycles


def detect_ledger(ledger: Ledger, config: DetectorConfig = DetectorConfig()) -> dict[str, list[WashCycle]]:
    """Run detection on every token; tokens without cycles are omitted."""
    found = {}
    for token_id, history in ledger.histories.items():
        cycles = detect_wash_sales(history, config)
        if cycles:
            found[token_id] = cycles
    return found


_RANK = {Label.WASH_SALE: 3, Label.CYCLE_MEMBER: 2, Label.REGULAR_SALE: 1, Label.REGULAR_TRANSFER: 1}


def label_all(history: TokenHistory, cycles: Sequence[WashCycle]) -> list[EdgeLabel]:
    """One label per transaction, most severe role wins.

    Entry and repurchase legs that are transfers (possible only when
    transfers take part in matching) are marked as cycle members, since a
    wash-sale label is reserved for sales.
    """
    position = {tx.key: i for i, tx in enumerate(history.txs)}
    labels = [Label.REGULAR_SALE if tx.is_sale else Label.REGULAR_TRANSFER for tx in history.txs]

    def mark(tx: Transaction, label: Label) -> None:
        i = position[tx.key]
        if label is Label.WASH_SALE and not tx.is_sale:
            label = Label.CYCLE_MEMBER
        if _RANK[label] > _RANK[labels[i]]:
            labels[i] = label

    for cycle in cycles:
        mark(cycle.entry, Label.WASH_SALE)
        mark(cycle.repurchase, Label.WASH_SALE)
        for tx in cycle.intermediaries:
            mark(tx, Label.CYCLE_MEMBER)
    return [EdgeLabel(i, lab) for i, lab in enumerate(labels)]
