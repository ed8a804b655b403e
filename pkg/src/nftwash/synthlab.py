"""Synthetic token histories and a brute-force detection oracle.

Generation is driven by ``random.Random`` (Mersenne Twister) seeded from the
spec, which reproduces identically across platforms and Python versions.

The oracle deliberately shares no code with :mod:`nftwash.detector`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal

from .errors import InfeasibleSpec, TooLarge
from .ledger import TokenHistory, Transaction, usd

ORACLE_LIMIT = 10_000
EPOCH = datetime(2021, 6, 1, tzinfo=timezone.utc)
COLLECTION = "synthetic"


@dataclass(frozen=True)
class PlantedCycle:
    suspect: int  # index into the wallet pool
    hops: int = 1  # intermediary transactions between entry and repurchase
    gap: timedelta = timedelta(days=5)
    entry_usd: Decimal = Decimal("1000.00")  # what the suspect pays before the cycle
    exit_usd: Decimal = Decimal("2000.00")  # first sale after the repurchase


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe for one token history.

    ``filler="fresh"`` hands every filler trade to a wallet that never held
    the token, so the planted cycles are the only ones present.
    ``filler="random"`` draws counterparties from the whole pool and spaces
    trades by exponential gaps (mean ``step``), producing incidental cycles;
    it cannot host planted cycles.
    """

    wallet_count: int
    tx_count: int
    planted_cycles: tuple[PlantedCycle, ...] = ()
    base_usd: Decimal = Decimal("100.00")
    jitter_usd: Decimal = Decimal("0.00")
    drift_usd: Decimal = Decimal("0.00")  # added per transaction
    transfer_ratio: float = 0.0
    step: timedelta = timedelta(days=1)
    filler: str = "fresh"
    seed: int = 0
    token_id: str = "1"
    collection: str = COLLECTION
    start: datetime = field(default=EPOCH)


def wallet_address(seed: int, index: int) -> str:
    digest = hashlib.sha256(f"{seed}:{index}".encode()).hexdigest()
    return "0x" + digest[:40]


class _Builder:
    def __init__(self, spec: ScenarioSpec, rng: random.Random):
        self.spec = spec
        self.rng = rng
        self.txs: list[Transaction] = []
        self.clock = spec.start

    def price(self) -> Decimal:
        spec = self.spec
        p = Decimal(spec.base_usd) + Decimal(spec.drift_usd) * len(self.txs)
        if spec.jitter_usd:
            p += Decimal(str(self.rng.uniform(-float(spec.jitter_usd), float(spec.jitter_usd))))
        return usd(max(p, Decimal("0.01")))

    def add(self, sender: str, receiver: str, at: datetime, value: Decimal | None) -> None:
        n = len(self.txs)
        digest = hashlib.sha256(f"{self.spec.seed}:{self.spec.token_id}:{n}".encode()).hexdigest()
        self.txs.append(
            Transaction(
                tx_hash="0x" + digest,
                seq=n,
                timestamp=at,
                sender=sender,
                receiver=receiver,
                collection=self.spec.collection,
                token_id=self.spec.token_id,
                pay_amount=None,
                pay_currency=None if value is None else "USD",
                usd_value=value,
            )
        )

    def filler_value(self) -> Decimal | None:
        if self.spec.transfer_ratio and self.rng.random() < self.spec.transfer_ratio:
            return None
        return self.price()


def generate(spec: ScenarioSpec) -> TokenHistory:
    """Build a chain-consistent history for ``spec``; pure in (spec, seed)."""
    if spec.wallet_count < 0 or spec.tx_count < 0:
        raise InfeasibleSpec("counts must be non-negative")
    if any(c.gap < timedelta(0) or c.hops < 0 for c in spec.planted_cycles):
        raise InfeasibleSpec("gaps and hop counts must be non-negative")
    rng = random.Random(spec.seed)
    if spec.filler == "random":
        return _generate_random(spec, rng)
    if spec.filler != "fresh":
        raise InfeasibleSpec(f"unknown filler mode {spec.filler!r}")
    return _generate_fresh(spec, rng)


def _generate_random(spec: ScenarioSpec, rng: random.Random) -> TokenHistory:
    if spec.planted_cycles:
        raise InfeasibleSpec("random filler cannot host planted cycles")
    if spec.tx_count and spec.wallet_count < 2:
        raise InfeasibleSpec("random filler needs at least two wallets")
    wallets = [wallet_address(spec.seed, i) for i in range(spec.wallet_count)]
    b = _Builder(spec, rng)
    holder = 0
    mean = spec.step.total_seconds()
    for _ in range(spec.tx_count):
        if b.txs and rng.random() >= 0.1:  # otherwise share the previous timestamp
            b.clock += timedelta(seconds=round(rng.expovariate(1.0) * mean))
        receiver = rng.randrange(spec.wallet_count - 1)
        if receiver >= holder:
            receiver += 1
        b.add(wallets[holder], wallets[receiver], b.clock, b.filler_value())
        holder = receiver
    return TokenHistory(spec.collection, spec.token_id, tuple(b.txs))


def _generate_fresh(spec: ScenarioSpec, rng: random.Random) -> TokenHistory:
    cycles = spec.planted_cycles
    suspects = [c.suspect for c in cycles]
    if len(set(suspects)) != len(suspects):
        raise InfeasibleSpec("each planted cycle needs its own suspect")
    if any(not 0 <= s < spec.wallet_count for s in suspects):
        raise InfeasibleSpec("suspect index outside the wallet pool")
    needed_tx = sum(c.hops + 4 for c in cycles)
    if needed_tx > spec.tx_count:
        raise InfeasibleSpec(f"planted cycles need {needed_tx} transactions, spec allows {spec.tx_count}")
    if spec.tx_count == 0:
        return TokenHistory(spec.collection, spec.token_id, ())
    filler = spec.tx_count - needed_tx
    # one minter, one receiver per filler trade, per cycle: hops + 1 wallets in the loop and an exit buyer
    needed_wallets = 1 + filler + sum(c.hops + 2 for c in cycles) + len(cycles)
    if needed_wallets > spec.wallet_count:
        raise InfeasibleSpec(f"scenario needs {needed_wallets} wallets, pool has {spec.wallet_count}")

    pool = iter([wallet_address(spec.seed, i) for i in range(spec.wallet_count) if i not in set(suspects)])
    b = _Builder(spec, rng)
    holder = next(pool)

    # spread filler trades over the slots before, between and after cycles
    slots = [0] * (len(cycles) + 1)
    for _ in range(filler):
        slots[rng.randrange(len(slots))] += 1

    def fill(count: int) -> None:
        nonlocal holder
        for _ in range(count):
            b.clock += spec.step
            buyer = next(pool)
            b.add(holder, buyer, b.clock, b.filler_value())
            holder = buyer

    for k, cycle in enumerate(cycles):
        fill(slots[k])
        suspect = wallet_address(spec.seed, cycle.suspect)
        b.clock += spec.step
        b.add(holder, suspect, b.clock, usd(cycle.entry_usd))

        b.clock += spec.step
        entry_time = b.clock
        loop = [next(pool) for _ in range(cycle.hops + 1)]
        b.add(suspect, loop[0], entry_time, b.price())
        for h in range(cycle.hops):
            at = entry_time + cycle.gap * (h + 1) / (cycle.hops + 1)
            at = at.replace(microsecond=0)
            b.add(loop[h], loop[h + 1], at, b.filler_value())
        b.clock = (entry_time + cycle.gap).replace(microsecond=0)
        b.add(loop[-1], suspect, b.clock, b.price())

        b.clock += spec.step
        holder = next(pool)
        b.add(suspect, holder, b.clock, usd(cycle.exit_usd))
    fill(slots[-1])
    return TokenHistory(spec.collection, spec.token_id, tuple(b.txs))


def ping_pong(
    sales: int = 17,
    start_usd: Decimal = Decimal("14"),
    end_usd: Decimal = Decimal("197"),
    step: timedelta = timedelta(minutes=20),
    seed: int = 0,
    token_id: str = "55343",
) -> TokenHistory:
    """Two wallets trading one token back and forth at a rising price."""
    drift = (Decimal(end_usd) - Decimal(start_usd)) / max(sales - 1, 1)
    spec = ScenarioSpec(
        wallet_count=2,
        tx_count=sales,
        base_usd=Decimal(start_usd),
        drift_usd=drift,
        filler="random",
        seed=seed,
        token_id=token_id,
    )
    history = _generate_random(spec, random.Random(seed))
    # fixed spacing rather than exponential gaps
    spaced = [dataclasses.replace(tx, timestamp=spec.start + step * i) for i, tx in enumerate(history.txs)]
    return TokenHistory(history.collection, history.token_id, tuple(spaced))


def oracle_detect(history: TokenHistory, config) -> list[tuple[Transaction, Transaction]]:
    """Enumerate every qualifying (entry, repurchase) pair, then keep the
    greedy earliest-match subset.

    Candidate pairs are ordered lexicographically by (entry position,
    repurchase position) and accepted while neither leg is already used in
    its role.
    """
    txs = list(history.txs)
    if len(txs) > ORACLE_LIMIT:
        raise TooLarge(f"{len(txs)} transactions exceeds oracle limit {ORACLE_LIMIT}")

    def eligible(tx: Transaction) -> bool:
        paid = tx.usd_value is not None and tx.usd_value > 0
        return paid or config.include_transfers_in_matching

    candidates = []
    for i, a in enumerate(txs):
        for j in range(i, len(txs)):
            b = txs[j]
            if not (eligible(a) and eligible(b)) or a.sender != b.receiver:
                continue
            delta = b.timestamp - a.timestamp
            if config.windowless or delta.total_seconds() <= config.window.total_seconds():
                candidates.append((i, j))

    used_entry, used_repurchase, pairs = set(), set(), []
    for i, j in sorted(candidates):
        if i in used_entry or j in used_repurchase:
            continue
        used_entry.add(i)
        used_repurchase.add(j)
        pairs.append((txs[i], txs[j]))
    return pairs
