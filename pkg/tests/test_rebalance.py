"""Intraday rank-to-name rebalancing and cost-ledger tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankarb.market import AtlasConfig, IntradayPanel, generate_atlas_market
from rankarb.rebalance import (
    evolve_name_weights,
    evolve_rank_weights,
    open_book,
    rebalance_step,
    simulate_day,
    write_ledger_csv,
    write_ledger_summary,
)


def session(cap_cols, assets=None, date="2021-01-05"):
    caps = np.asarray(cap_cols, dtype=float).T
    if assets is None:
        assets = [f"A{i}" for i in range(caps.shape[0])]
    return IntradayPanel(date=date, minutes=list(range(1, caps.shape[1] + 1)), assets=assets, caps=caps)


def swap_session(extra_flat=0):
    # caps start at (8, 4) and swap to (6, 10); optional aligned padding
    cols = [(8.0, 4.0), (6.0, 10.0)] + [(6.0, 10.0)] * extra_flat
    return session(cols)


class TestEvolution:
    def test_rank_slot_scales_with_sorted_cap(self):
        sess = session([(8.0, 4.0), (10.0, 4.0)])
        book = open_book(np.array([1.0, 0.0]), sess)
        evolve_rank_weights(book, sess.caps[:, 1])
        assert book.rank_weights[0] == pytest.approx(1.25, rel=1e-15)

    def test_constant_caps_leave_books_unchanged(self):
        sess = session([(8.0, 4.0), (8.0, 4.0)])
        book = open_book(np.array([1.0, 0.6]), sess)
        evolve_rank_weights(book, sess.caps[:, 1])
        evolve_name_weights(book, sess.caps[:, 1])
        np.testing.assert_allclose(book.rank_weights, [1.0, 0.6])
        np.testing.assert_allclose(book.name_weights, [1.0, 0.6])

    def test_zero_weight_stays_zero(self):
        sess = session([(8.0, 4.0), (12.0, 2.0)])
        book = open_book(np.array([0.0, 0.0]), sess)
        evolve_rank_weights(book, sess.caps[:, 1])
        evolve_name_weights(book, sess.caps[:, 1])
        np.testing.assert_array_equal(book.rank_weights, np.zeros(2))
        np.testing.assert_array_equal(book.name_weights, np.zeros(2))

    def test_name_dollars_scale_with_own_cap(self):
        sess = session([(8.0, 4.0), (6.0, 4.0)])
        book = open_book(np.array([1.0, 0.0]), sess)
        evolve_name_weights(book, sess.caps[:, 1])
        assert book.name_weights[0] == pytest.approx(0.75, rel=1e-15)

    def test_no_crossing_books_track(self):
        # without rank switches the two books drift identically, so the
        # total-dollar gap stays zero all day
        rng = np.random.default_rng(0)
        cols = [(100.0, 50.0)]
        for _ in range(20):
            prev = cols[-1]
            cols.append((prev[0] * (1 + 0.01 * rng.standard_normal()), prev[1] * (1 + 0.01 * rng.standard_normal())))
        cols = [c for c in cols if c[0] > c[1]]
        sess = session(cols)
        book = open_book(np.array([0.7, 0.3]), sess)
        for j in range(1, sess.caps.shape[1]):
            evolve_rank_weights(book, sess.caps[:, j])
            evolve_name_weights(book, sess.caps[:, j])
            gap = book.rank_weights.sum() - book.name_weights.sum()
            assert abs(gap) <= 1e-12


class TestRebalanceStep:
    def test_aligned_no_switch_zero_costs(self):
        sess = session([(8.0, 4.0), (8.8, 4.4)])
        book = open_book(np.array([1.0, 0.6]), sess)
        evolve_rank_weights(book, sess.caps[:, 1])
        evolve_name_weights(book, sess.caps[:, 1])
        book, latency, spread = rebalance_step(book, eta=0.01)
        assert latency == pytest.approx(0.0, abs=1e-15)
        assert spread == pytest.approx(0.0, abs=1e-15)

    def test_hand_oracle_swap(self):
        # hand-evaluated: rank book (1.0, 0.6) over caps 8 -> 6 and 4 -> 10.
        # rank drifts to (1.0*10/8, 0.6*6/4) = (1.25, 0.9), sum 2.15
        # name drifts to (1.0*6/8, 0.6*10/4) = (0.75, 1.5), sum 2.25
        # latency = 2.15 - 2.25 = -0.10
        # trades = |0.9 - 0.75| + |1.25 - 1.5| = 0.40
        eta = 0.0007
        sess = swap_session()
        book = open_book(np.array([1.0, 0.6]), sess)
        evolve_rank_weights(book, sess.caps[:, 1])
        evolve_name_weights(book, sess.caps[:, 1])
        book, latency, spread = rebalance_step(book, eta=eta)
        assert latency == pytest.approx(-0.10, abs=1e-12)
        assert spread == pytest.approx(0.40 * eta, abs=1e-12)
        # post-trade the name book holds the rank dollars under the new map
        np.testing.assert_allclose(book.name_weights, [0.9, 1.25], atol=1e-12)

    def test_eta_zero_spread_zero(self):
        sess = swap_session()
        book = open_book(np.array([1.0, 0.6]), sess)
        evolve_rank_weights(book, sess.caps[:, 1])
        evolve_name_weights(book, sess.caps[:, 1])
        _, latency, spread = rebalance_step(book, eta=0.0)
        assert spread == 0.0
        assert latency == pytest.approx(-0.10, abs=1e-12)


class TestSimulateDay:
    def test_no_crossing_eta_zero_costless(self):
        cols = [(8.0, 4.0), (8.4, 4.1), (8.2, 4.3), (8.6, 4.2)]
        book, ledger = simulate_day(np.array([0.8, 0.2]), session(cols), interval=1, eta=0.0)
        assert ledger.total_cost == pytest.approx(0.0, abs=1e-12)

    def test_case_study_timeline(self):
        # flat - flat - swap - flat - flat: the pre-swap point books no
        # cost, the first post-swap point books the full latency, and the
        # divergence collapses to zero once the books realign
        cols = [(8.0, 4.0), (8.0, 4.0), (8.0, 4.0), (6.0, 10.0), (6.0, 10.0), (6.0, 10.0), (6.0, 10.0)]
        eta = 0.0002
        book, ledger = simulate_day(np.array([1.0, 0.6]), session(cols), interval=2, eta=eta)
        minutes = [p[0] for p in ledger.points]
        latencies = [p[1] for p in ledger.points]
        spreads = [p[2] for p in ledger.points]
        assert minutes == [3, 5, 7]
        assert latencies[0] == pytest.approx(0.0, abs=1e-15)
        assert spreads[0] == pytest.approx(0.0, abs=1e-15)
        assert latencies[1] == pytest.approx(-0.10, abs=1e-12)
        assert spreads[1] == pytest.approx(0.40 * eta, abs=1e-12)
        assert latencies[2] == pytest.approx(0.0, abs=1e-15)
        assert spreads[2] == pytest.approx(0.0, abs=1e-15)
        # divergence trace: zero until the swap, |latency| at the swap
        # tick, zero after the realigning trade
        np.testing.assert_allclose(ledger.divergence[:3], 0.0, atol=1e-15)
        assert ledger.divergence[3] == pytest.approx(0.10, abs=1e-12)
        np.testing.assert_allclose(ledger.divergence[5:], 0.0, atol=1e-12)

    def test_end_rank_book_telescopes(self):
        # end-of-day rank dollars must equal open dollars times the day's
        # per-rank gross return, independent of the rebalance interval
        rng = np.random.default_rng(1)
        caps = np.exp(rng.normal(0, 0.003, size=(3, 40)).cumsum(axis=1)) * np.array([[9.0], [5.0], [2.0]])
        sess = IntradayPanel(date="2021-01-05", minutes=list(range(1, 41)), assets=["A", "B", "C"], caps=caps)
        w_open = np.array([0.5, -0.3, 0.2])
        day_gross = np.sort(caps[:, -1])[::-1] / np.sort(caps[:, 0])[::-1]
        for interval in (1, 7, 100):
            book, ledger = simulate_day(w_open, sess, interval=interval, eta=0.0002)
            np.testing.assert_allclose(book.rank_weights, w_open * day_gross, rtol=1e-12)
            np.testing.assert_allclose(ledger.end_value, book.name_weights.sum(), rtol=1e-12)

    def test_alignment_after_every_point(self):
        rng = np.random.default_rng(2)
        caps = np.exp(rng.normal(0, 0.01, size=(2, 30)).cumsum(axis=1)) * np.array([[1.0], [1.0]])
        sess = IntradayPanel(date="2021-01-05", minutes=list(range(1, 31)), assets=["A", "B"], caps=caps)
        book, ledger = simulate_day(np.array([1.0, -0.4]), sess, interval=5, eta=0.0002)
        order = np.argsort(-caps[:, -1], kind="stable")
        np.testing.assert_allclose(book.name_weights[order], book.rank_weights, atol=1e-12)

    def test_interval_longer_than_day(self):
        cols = [(8.0, 4.0), (8.1, 4.0), (8.0, 4.2), (7.9, 4.1)]
        book, ledger = simulate_day(np.array([0.5, 0.5]), session(cols), interval=999, eta=0.01)
        assert len(ledger.points) == 1
        assert ledger.points[0][0] == 4

    def test_zero_book_zero_costs(self):
        rng = np.random.default_rng(3)
        caps = np.exp(rng.normal(0, 0.02, size=(2, 20)).cumsum(axis=1))
        sess = IntradayPanel(date="2021-01-05", minutes=list(range(1, 21)), assets=["A", "B"], caps=caps)
        book, ledger = simulate_day(np.zeros(2), sess, interval=3, eta=0.01)
        assert ledger.total_cost == 0.0
        assert ledger.end_value == 0.0

    def test_cost_tradeoff_monotone_in_interval(self):
        # crossing-heavy pair: coarser rebalancing trades less (lower
        # spread) but lets the books drift further apart (higher peak
        # divergence)
        cfg = AtlasConfig(
            n_assets=2,
            n_days=1,
            rank_drifts=np.zeros(2),
            rank_vols=np.full(2, 0.02),
            minutes_per_day=390,
            seed=0,
            init_caps=np.array([1.0e9, 0.999e9]),
        )
        _, sessions = generate_atlas_market(cfg)
        spreads, peaks = [], []
        for interval in (5, 30, 195):
            _, ledger = simulate_day(np.array([0.5, -0.5]), sessions[0], interval, eta=0.0002)
            spreads.append(ledger.total_spread)
            peaks.append(float(np.max(ledger.divergence)))
        assert spreads[0] >= spreads[1] >= spreads[2]
        assert peaks[0] <= peaks[1] <= peaks[2]

    @given(st.integers(min_value=0, max_value=60), st.integers(min_value=1, max_value=12))
    @settings(max_examples=25, deadline=None)
    def test_invariants_random_sessions(self, seed, interval):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 25))
        caps = np.exp(rng.normal(0, 0.01, size=(n, m)).cumsum(axis=1))
        sess = IntradayPanel(date="2021-01-05", minutes=list(range(1, m + 1)), assets=[f"A{i}" for i in range(n)], caps=caps)
        w = rng.uniform(-1, 1, size=n)
        book, ledger = simulate_day(w, sess, interval=interval, eta=0.0002)
        # spread costs never negative; final point is the close
        assert all(p[2] >= 0 for p in ledger.points)
        assert ledger.points[-1][0] == m
        # post-close alignment under the closing permutation
        order = np.argsort(-caps[:, -1], kind="stable")
        np.testing.assert_allclose(book.name_weights[order], book.rank_weights, atol=1e-10)
        # rank book telescopes regardless of path
        gross = np.sort(caps[:, -1])[::-1] / np.sort(caps[:, 0])[::-1]
        np.testing.assert_allclose(book.rank_weights, w * gross, atol=1e-10)


class TestLedgerCsv:
    def test_point_and_summary_files(self, tmp_path):
        sess = swap_session()
        book, ledger = simulate_day(np.array([1.0, 0.6]), sess, interval=1, eta=0.0002)
        points_path = tmp_path / "ledger.csv"
        summary_path = tmp_path / "summary.csv"
        write_ledger_csv([ledger], points_path, config_hash="h")
        write_ledger_summary([ledger], summary_path, config_hash="h")
        point_lines = points_path.read_text().strip().splitlines()
        header = next(line for line in point_lines if line.startswith("date,"))
        assert header == "date,minute,latency_cost,spread_cost"
        summary_lines = summary_path.read_text().strip().splitlines()
        header = next(line for line in summary_lines if line.startswith("date,"))
        assert header == "date,total_latency,total_spread,end_value"
