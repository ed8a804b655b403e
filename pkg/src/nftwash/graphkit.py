"""Per-token directed multigraphs and their DOT / JSON renderings.

A single graph holds every transaction of a token as an edge tagged with its
kind; the sale-only view is a projection of the same edge list so both views
share node numbering.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyHistory, LabelMismatch
from .ledger import TokenHistory, Transaction, TxKind


class Label(str, enum.Enum):
    WASH_SALE = "wash_sale"
    CYCLE_MEMBER = "cycle_member"
    REGULAR_SALE = "regular_sale"
    REGULAR_TRANSFER = "regular_transfer"


COLORS = {
    Label.WASH_SALE: "red",
    Label.CYCLE_MEMBER: "yellow",
    Label.REGULAR_TRANSFER: "green",
    Label.REGULAR_SALE: "black",
}

# inches of node width per incident edge
NODE_SCALE = 0.25


@dataclass(frozen=True)
class Edge:
    index: int  # position of the transaction in the token history
    source: int
    target: int
    tx: Transaction

    @property
    def kind(self) -> TxKind:
        return self.tx.kind


@dataclass(frozen=True)
class EdgeLabel:
    edge: int
    label: Label


@dataclass(frozen=True)
class TokenGraph:
    token_id: str
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    degree: tuple[int, ...]
    # per node, indices of outgoing edges in chronological order
    out: tuple[tuple[int, ...], ...]

    def node_index(self, address: str) -> int:
        return self.nodes.index(address)

    def sale_view(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.kind is TxKind.SALE)

    def departures(self, node: int) -> list[Edge]:
        """Edges leaving ``node``, in chronological order."""
        return [self.edges[i] for i in self.out[node]]


def build_graph(history: TokenHistory) -> TokenGraph:
    if not history.txs:
        raise EmptyHistory(f"token {history.token_id} has no transactions")
    index: dict[str, int] = {}
    edges = []
    for i, tx in enumerate(history.txs):
        for addr in (tx.sender, tx.receiver):
            index.setdefault(addr, len(index))
        edges.append(Edge(i, index[tx.sender], index[tx.receiver], tx))

    degree = [0] * len(index)
    out: list[list[int]] = [[] for _ in index]
    for e in edges:
        degree[e.source] += 1
        degree[e.target] += 1
        out[e.source].append(e.index)
    return TokenGraph(
        history.token_id, tuple(index), tuple(edges), tuple(degree), tuple(tuple(o) for o in out)
    )


def _label_map(graph: TokenGraph, labels: Sequence[EdgeLabel]) -> dict[int, Label]:
    by_edge = {}
    for lab in labels:
        if lab.label is None or not isinstance(lab.label, Label):
            raise LabelMismatch(f"edge {lab.edge} has no valid label")
        by_edge[lab.edge] = lab.label
    missing = [e.index for e in graph.edges if e.index not in by_edge]
    if missing:
        raise LabelMismatch(f"edges without a label: {missing}")
    for e in graph.edges:
        if by_edge[e.index] is Label.WASH_SALE and e.kind is not TxKind.SALE:
            raise LabelMismatch(f"edge {e.index} is a transfer labelled as a wash sale")
    return by_edge


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: TokenGraph, labels: Sequence[EdgeLabel]) -> str:
    """Render the graph as a DOT digraph with edges coloured by label.

    Node width is proportional to degree.  Output is byte-stable for a given
    input.
    """
    by_edge = _label_map(graph, labels)
    lines = [
        f"digraph {_quote('token_' + graph.token_id)} {{",
        "  node [shape=circle, fixedsize=true];",
    ]
    for i, addr in enumerate(graph.nodes):
        size = f"{NODE_SCALE * graph.degree[i]:.2f}"
        lines.append(f"  n{i} [label={_quote(str(i))}, tooltip={_quote(addr)}, width={size}, height={size}];")
    for e in graph.edges:
        label = by_edge[e.index]
        attrs = [f"color={COLORS[label]}", f"tooltip={_quote(e.tx.tx_hash)}"]
        if e.kind is TxKind.SALE:
            attrs.append(f"label={_quote(str(e.tx.usd_value))}")
        else:
            attrs.append("style=dashed")
        lines.append(f"  n{e.source} -> n{e.target} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: TokenGraph, labels: Sequence[EdgeLabel]) -> dict:
    by_edge = _label_map(graph, labels)
    return {
        "token_id": graph.token_id,
        "nodes": [
            {"index": i, "address": addr, "degree": graph.degree[i]} for i, addr in enumerate(graph.nodes)
        ],
        "edges": [
            {
                "index": e.index,
                "source": e.source,
                "target": e.target,
                "tx_hash": e.tx.tx_hash,
                "seq": e.tx.seq,
                "kind": e.kind.value,
                "usd_value": None if e.tx.usd_value is None else str(e.tx.usd_value),
                "label": by_edge[e.index].value,
            }
            for e in graph.edges
        ],
    }
