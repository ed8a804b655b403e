import random
from collections import defaultdict
from datetime import datetime, timezone
from decimal import Decimal

import pytest
from builders import history, histories, bayc1332, tx
from hypothesis import given, settings
from published_tables import count_rows, profit_rows

from nftwash.analytics import (
    CollectionStats,
    Metric,
    ProfitStats,
    collection_stats,
    overall_rollup,
    profit_stats,
    rows_to_csv,
    token_price_points,
    wallet_profits,
    wash_time_series,
)
from nftwash.detector import detect_wash_sales
from nftwash.ledger import build_ledger
from nftwash.profits import ProfitBreakdown, profit_breakdown


def ledger_and_cycles(txs):
    ledger = build_ledger(txs)
    cycles = [c for h in ledger.histories.values() for c in detect_wash_sales(h)]
    return ledger, cycles


def ten_sale_fixture():
    rows = [
        ("A", "w1", "w2", 0), ("A", "w2", "w3", 1), ("A", "w3", "w2", 2),
        ("B", "w4", "w5", 0), ("B", "w5", "w6", 1),
        ("C", "w6", "w7", 0),
        ("D", "w7", "w8", 0), ("D", "w8", "w5", 1),
        ("E", "w8", "w1", 0), ("E", "w1", "w4", 1),
    ]
    return [tx(s, r, d, 100, seq=i, token=tok) for i, (tok, s, r, d) in enumerate(rows)]


class TestCollectionStats:
    def test_hand_counted(self):
        ledger, cycles = ledger_and_cycles(ten_sale_fixture())
        assert len(cycles) == 1
        s = collection_stats(ledger, cycles)
        assert (s.total_sales, s.total_tokens, s.total_wallets) == (10, 5, 8)
        assert (s.wash_sale_count, s.wash_token_count, s.wash_wallet_count) == (2, 1, 1)
        assert (s.wash_sale_pct, s.wash_token_pct, s.wash_wallet_pct) == (Decimal("20.0"), Decimal("20.0"), Decimal("12.5"))

    def test_no_cycles(self):
        ledger = build_ledger([tx("a", "b", 0, 5)])
        s = collection_stats(ledger, [])
        assert (s.wash_sale_count, s.wash_token_count, s.wash_wallet_count) == (0, 0, 0)
        assert s.wash_sale_pct == s.wash_token_pct == s.wash_wallet_pct == 0

    def test_two_wash_sales_per_cycle(self):
        ledger, cycles = ledger_and_cycles(bayc1332().txs)
        assert collection_stats(ledger, cycles).wash_sale_count == 2 * len(cycles)

    def test_transfers_excluded_from_denominators(self):
        ledger = build_ledger([tx("a", "b", 0, 5), tx("b", "c", 1, None, seq=1), tx("z", "y", 0, None, seq=2, token="2")])
        s = collection_stats(ledger, [])
        assert (s.total_sales, s.total_tokens, s.total_wallets) == (1, 1, 2)

    def test_permutation_invariant(self):
        txs = ten_sale_fixture()
        base = collection_stats(*ledger_and_cycles(txs))
        for seed in range(5):
            shuffled = txs[:]
            random.Random(seed).shuffle(shuffled)
            assert collection_stats(*ledger_and_cycles(shuffled)) == base


def breakdown(token, pm):
    return ProfitBreakdown(token, None, pm, None, None)


class TestProfitStats:
    def test_single(self):
        s = profit_stats([breakdown("1332", Decimal("70301.01"))], Metric.PM)
        assert s.max == s.avg == s.total == Decimal("70301.01")
        assert s.unit_count == 1

    def test_per_token_sums(self):
        rows = [breakdown("x", Decimal("7")), breakdown("x", Decimal("3")), breakdown("y", Decimal("-4")),
                breakdown("z", None)]
        s = profit_stats(rows, Metric.PM)
        assert (s.max, s.avg, s.total, s.unit_count) == (Decimal("10.00"), Decimal("3.00"), Decimal("6.00"), 2)

    def test_empty(self):
        s = profit_stats([], Metric.SALE)
        assert s.unit_count == 0 and s.total == 0

    def test_metric_selection(self):
        h = bayc1332()
        (c,) = detect_wash_sales(h)
        b = [profit_breakdown(c, h)]
        assert profit_stats(b, Metric.SALE).total == Decimal("3378.94")
        assert profit_stats(b, "repurchase").total == Decimal("58493.16")

    @pytest.mark.parametrize("metric", list(Metric))
    def test_published_rows_satisfy_invariant(self, metric):
        for row in profit_rows(metric):
            assert abs(row.total - row.avg * row.unit_count) <= Decimal("0.01") * row.unit_count


class TestRollup:
    def test_single_row_identity(self):
        row = ProfitStats("X", Metric.PM, Decimal("5"), Decimal("2.50"), Decimal("10"), 4)
        out = overall_rollup([row])
        assert (out.max, out.avg, out.total, out.unit_count) == (row.max, row.avg, row.total, row.unit_count)

    def test_two_collections(self):
        a = ProfitStats("A", Metric.PM, Decimal("10.00"), Decimal("3.00"), Decimal("6.00"), 2)
        b = ProfitStats("B", Metric.PM, Decimal("4.00"), Decimal("-1.00"), Decimal("-3.00"), 3)
        out = overall_rollup([a, b])
        assert (out.max, out.total, out.unit_count) == (Decimal("10.00"), Decimal("3.00"), 5)
        assert out.avg == Decimal("0.60")

    def test_published_pm_max_and_total(self):
        out = overall_rollup(profit_rows(Metric.PM))
        assert out.max == Decimal("413519.49")
        assert out.total == Decimal("930493.96")

    def test_count_tables(self):
        roll = overall_rollup(count_rows())
        assert roll.average.wash_sale_count == Decimal("49.571")
        assert roll.average.wash_token_count == Decimal("23.286")
        assert roll.average.wash_wallet_count == Decimal("21")
        assert (roll.average.wash_sale_pct, roll.average.wash_token_pct, roll.average.wash_wallet_pct) == (
            Decimal("0.136"), Decimal("0.157"), Decimal("0.109"))
        assert (roll.total.wash_sale_count, roll.total.wash_token_count, roll.total.wash_wallet_count) == (347, 163, 147)
        # transcribed rows carry no denominators
        assert roll.total.wash_sale_pct is None

    def test_total_pct_from_summed_denominators(self):
        a = CollectionStats("A", 2, Decimal("20.000"), 1, Decimal("20.000"), 1, Decimal("12.500"), 10, 5, 8)
        b = CollectionStats("B", 0, Decimal("0"), 0, Decimal("0"), 0, Decimal("0"), 30, 15, 12)
        roll = overall_rollup([a, b])
        assert roll.total.wash_sale_pct == Decimal("5.000")
        assert roll.total.wash_token_pct == Decimal("5.000")
        assert roll.total.wash_wallet_pct == Decimal("5.000")
        assert roll.average.wash_sale_pct == Decimal("10.000")

    def test_rejects_mixed_rows(self):
        with pytest.raises(TypeError):
            overall_rollup([profit_rows(Metric.PM)[0], count_rows()[0]])
        with pytest.raises(ValueError):
            overall_rollup([profit_rows(Metric.PM)[0], profit_rows(Metric.SALE)[0]])
        with pytest.raises(ValueError):
            overall_rollup([])


class TestWalletProfits:
    def test_buy_then_sell(self):
        ledger = build_ledger([tx("x", "a", 0, 5), tx("a", "y", 1, 8, seq=1)])
        by_wallet = {w.wallet: w.sales_profit for w in wallet_profits(ledger, [])}
        assert by_wallet["a"] == Decimal("3.00")

    def test_transfer_then_sale(self):
        ledger = build_ledger([tx("x", "a", 0, None), tx("a", "y", 1, 100, seq=1)])
        top = wallet_profits(ledger, [])[0]
        assert (top.wallet, top.sales_profit) == ("a", Decimal("100.00"))

    def test_ranking_and_flags(self):
        ledger, cycles = ledger_and_cycles(bayc1332().txs)
        ranked = wallet_profits(ledger, cycles)
        assert [w.sales_profit for w in ranked] == sorted((w.sales_profit for w in ranked), reverse=True)
        flagged = [w.wallet for w in ranked if w.is_wash_trader]
        assert flagged == ["0x1729ae0e8f58d55de0f209273759cb644405478a"]
        # 8503.60 + 75425.67 - 5124.66 - 16932.51
        assert ranked[0].sales_profit == Decimal("61872.10")

    def test_ties_by_address(self):
        ledger = build_ledger([tx("b", "z", 0, 5), tx("a", "y", 0, 5, seq=1, token="2")])
        assert [w.wallet for w in wallet_profits(ledger, [])][:2] == ["a", "b"]

    def test_three_wallets_against_scan(self):
        txs = [tx("a", "b", 0, 10), tx("b", "c", 1, 25, seq=1), tx("c", "a", 2, None, seq=2), tx("a", "b", 3, 7, seq=3)]
        ledger = build_ledger(txs)
        scan = defaultdict(Decimal)
        for t in txs:
            if t.usd_value:
                scan[t.sender] += t.usd_value
                scan[t.receiver] -= t.usd_value
        assert {w.wallet: w.sales_profit for w in wallet_profits(ledger, [])} == dict(scan)


class TestTimeSeries:
    def test_table1(self):
        ledger, cycles = ledger_and_cycles(bayc1332().txs)
        rows = wash_time_series(ledger, cycles)
        assert [(r.bin, r.total_tx, r.wash_tx) for r in rows] == [("2021-06", 2, 1), ("2021-07", 2, 1), ("2021-08", 1, 0)]
        assert rows[0].avg_sale_usd == Decimal("6814.13")

    def test_empty(self):
        assert wash_time_series(build_ledger([]), []) == []

    def test_gap_and_transfer_only_months(self):
        t0 = datetime(2021, 1, 15, tzinfo=timezone.utc)
        txs = [tx("a", "b", t0, 10), tx("b", "c", t0.replace(month=3), None, seq=1), tx("c", "d", t0.replace(month=4), 30, seq=2)]
        rows = wash_time_series(build_ledger(txs), [])
        assert [r.bin for r in rows] == ["2021-01", "2021-02", "2021-03", "2021-04"]
        assert [(r.total_tx, r.wash_tx, r.avg_sale_usd) for r in rows[1:3]] == [(0, 0, None), (0, 0, None)]

    def test_year_rollover(self):
        txs = [tx("a", "b", datetime(2021, 12, 31, tzinfo=timezone.utc), 1), tx("b", "c", datetime(2022, 1, 1, tzinfo=timezone.utc), 1, seq=1)]
        assert [r.bin for r in wash_time_series(build_ledger(txs), [])] == ["2021-12", "2022-01"]

    def test_price_points(self):
        h = bayc1332()
        points = token_price_points(h, detect_wash_sales(h))
        assert [p.is_wash_sale for p in points] == [False, True, False, True, False]


class TestCsv:
    def test_columns_match_fields(self):
        text = rows_to_csv(profit_rows(Metric.PM)[:1])
        assert text.splitlines()[0] == "collection,metric,max,avg,total,unit_count"
        assert text.splitlines()[1] == "ArtBlocks,pm,413519.49,827.23,56251.60,68"


@given(histories(max_size=20))
@settings(max_examples=150)
def test_aggregate_invariants(h):
    ledger = build_ledger(h.txs)
    cycles = detect_wash_sales(h)
    assert sum(w.sales_profit for w in wallet_profits(ledger, cycles)) == 0
    series = wash_time_series(ledger, cycles)
    assert sum(r.total_tx for r in series) == sum(1 for t in h.txs if t.is_sale)
    assert all(r.wash_tx <= r.total_tx for r in series)
    stats = collection_stats(ledger, cycles)
    for pct in (stats.wash_sale_pct, stats.wash_token_pct, stats.wash_wallet_pct):
        assert 0 <= pct <= 100
    breakdowns = [profit_breakdown(c, h) for c in cycles]
    for metric in Metric:
        s = profit_stats(breakdowns, metric)
        assert abs(s.total - s.avg * s.unit_count) <= Decimal("0.01") * s.unit_count
        if s.unit_count:
            assert s.max >= s.avg
