"""Acceptance suite: one test and one printed pass/fail line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
print; without -s pytest still fails loudly on any violated criterion.
"""

from __future__ import annotations

import time

import numpy as np
from scipy import stats

from rankarb.config import Config
from rankarb.diagnostics import eigen_spectrum, xhat_density_diff
from rankarb.factors import build_projector, fit_factors, fit_loadings
from rankarb.market import AtlasConfig, IntradayPanel, generate_atlas_market
from rankarb.ou import OUFit, PositionState, fit_ou, update_positions
from rankarb.pipeline import acquire_market, run_strategy
from rankarb.rebalance import open_book, rebalance_step, simulate_day
from rankarb.residual import NormalizedTrajectory

from conftest import (geometric_sessions, ou_factor_market, rank_order_static,
                      simulate_ar1)


def check(ok: bool, label: str, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    print(line)
    assert ok, line


def test_criterion_1_projector_identity():
    # 200 random PCA windows: the projector annihilates the loadings, and
    # projected books carry no factor exposure
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst_model = 0.0
    worst_book = 0.0
    for i in range(200):
        n = int(rng.integers(5, 101))
        t_len = 60
        k = int(rng.integers(1, min(n, 8)))
        x = rng.normal(0.0, 0.01, (n, t_len))
        if i % 2 == 0:
            # half the windows carry real factor structure
            x += np.outer(rng.normal(1.0, 0.3, n), rng.normal(0.0, 0.02, t_len))
        factors, omega = fit_factors(x, k)
        look_b = int(rng.integers(k + 1, t_len + 1))
        x_short = x[:, -look_b:]
        beta = fit_loadings(x_short, omega @ x_short)
        phi = build_projector(beta, omega)
        worst_model = max(worst_model, float(np.max(np.abs(phi @ beta))))
        w = rng.normal(0.0, 1.0, n)
        worst_book = max(worst_book, float(np.max(np.abs((phi.T @ w) @ beta))))
    elapsed = time.time() - t0
    check(worst_model <= 1e-8 and worst_book <= 1e-8 and elapsed < 10.0,
          "criterion 1 projector identity",
          f"max|phi beta|={worst_model:.2e} max|(phi'w)'beta|={worst_book:.2e} "
          f"in {elapsed:.1f}s (limits 1e-8, 10s)")


def test_criterion_2_ou_estimator_recovery():
    # lag-1 regression recovers kappa, m and sigma of simulated OU paths
    # within 5% median relative error at each speed
    t0 = time.time()
    rng = np.random.default_rng(2)
    medians = {}
    for kappa in (10.0, 26.6, 100.0):
        b = float(np.exp(-kappa / 252.0))
        m, sigma_eq = 1.0, 0.1
        a = m * (1.0 - b)
        noise = sigma_eq * np.sqrt(1.0 - b * b)
        errs = {"kappa": [], "m": [], "sigma": []}
        for _ in range(50):
            fit = fit_ou(simulate_ar1(a, b, noise, 10_000, rng))
            errs["kappa"].append(abs(fit.kappa - kappa) / kappa)
            errs["m"].append(abs(fit.m - m) / abs(m))
            errs["sigma"].append(abs(fit.sigma - sigma_eq) / sigma_eq)
        for name, values in errs.items():
            medians[(kappa, name)] = float(np.median(values))
    worst = max(medians.values())
    elapsed = time.time() - t0
    check(worst < 0.05 and elapsed < 30.0,
          "criterion 2 OU estimator recovery",
          f"worst median relative error {worst:.4f} over "
          f"kappa in (10, 26.6, 100), 50 paths each, in {elapsed:.1f}s "
          f"(limits 0.05, 30s)")


def test_criterion_3_state_machine_conformance():
    # exhaustive truth table: s x previous position x fit speed
    t0 = time.time()
    scores = (-2.0, -1.0, -0.6, -0.4, 0.0, 0.4, 0.6, 1.0, 2.0)
    # expected next position for tau=10 (tradable), keyed by (s, prev)
    fast_expected = {
        (-2.0, -1): 0, (-2.0, 0): 1, (-2.0, 1): 1,
        (-1.0, -1): 0, (-1.0, 0): 0, (-1.0, 1): 1,
        (-0.6, -1): 0, (-0.6, 0): 0, (-0.6, 1): 1,
        (-0.4, -1): 0, (-0.4, 0): 0, (-0.4, 1): 0,
        (0.0, -1): 0, (0.0, 0): 0, (0.0, 1): 0,
        (0.4, -1): 0, (0.4, 0): 0, (0.4, 1): 0,
        (0.6, -1): -1, (0.6, 0): 0, (0.6, 1): 0,
        (1.0, -1): -1, (1.0, 0): 0, (1.0, 1): 0,
        (2.0, -1): -1, (2.0, 0): -1, (2.0, 1): 0,
    }
    failures = []
    for tau in (10.0, 40.0):
        b = float(np.exp(-1.0 / tau))
        fit = OUFit(a=0.0, b=b, kappa=252.0 / tau, tau_days=tau, m=0.0,
                    sigma=1.0, resid_var=1.0, r2=0.5, mean_reverting=True)
        for s in scores:
            for prev in (-1, 0, 1):
                state = PositionState()
                if prev != 0:
                    state.weights["X"] = prev
                    state.opened_at["X"] = "2021-01-04"
                state = update_positions(state, {"X": s}, {"X": fit},
                                         "2021-01-05", open_threshold=1.25,
                                         close_threshold=0.5,
                                         tau_max_days=30.0)
                got = state.weight("X")
                want = fast_expected[(s, prev)] if tau < 30.0 else 0
                if got != want:
                    failures.append((s, prev, tau, got, want))
    elapsed = time.time() - t0
    check(not failures and elapsed < 1.0,
          "criterion 3 state machine conformance",
          f"{2 * len(scores) * 3} cases, {len(failures)} mismatches "
          f"{failures[:3]} in {elapsed:.2f}s (limits 0, 1s)")


def test_criterion_4_rebalance_ledger_oracle():
    # hand-computed swap: (1.0, 0.6) over caps (8,4)->(6,10) books latency
    # -0.10 and trades 0.40; non-switch rebalance points cost nothing
    t0 = time.time()
    eta = 0.0007
    sess = IntradayPanel(date="2021-01-05", minutes=[1, 2], assets=["A", "B"],
                         caps=np.array([[8.0, 6.0], [4.0, 10.0]]))
    book = open_book(np.array([1.0, 0.6]), sess)
    from rankarb.rebalance import evolve_name_weights, evolve_rank_weights
    evolve_rank_weights(book, sess.caps[:, 1])
    evolve_name_weights(book, sess.caps[:, 1])
    book, latency, spread = rebalance_step(book, eta=eta)
    swap_ok = (abs(latency - (-0.10)) <= 1e-12
               and abs(spread - 0.40 * eta) <= 1e-12)

    cols = [(8.0, 4.0)] * 3 + [(6.0, 10.0)] * 4
    timeline = IntradayPanel(date="2021-01-05", minutes=list(range(1, 8)),
                             assets=["A", "B"],
                             caps=np.asarray(cols, dtype=float).T)
    _, ledger = simulate_day(np.array([1.0, 0.6]), timeline, interval=2,
                             eta=eta)
    costs = [(lat, spr) for _, lat, spr in ledger.points]
    timeline_ok = (abs(costs[0][0]) <= 1e-15 and abs(costs[0][1]) <= 1e-15
                   and abs(costs[1][0] - (-0.10)) <= 1e-12
                   and abs(costs[1][1] - 0.40 * eta) <= 1e-12
                   and abs(costs[2][0]) <= 1e-15 and abs(costs[2][1]) <= 1e-15)
    elapsed = time.time() - t0
    check(swap_ok and timeline_ok and elapsed < 1.0,
          "criterion 4 rebalance ledger oracle",
          f"latency={latency:.12f} spread={spread:.3e} "
          f"timeline costs {costs} in {elapsed:.2f}s (tolerance 1e-12)")


def test_criterion_5_cost_tradeoff():
    # crossing-heavy pair: coarser rebalancing spends less on spread but
    # tolerates more divergence
    t0 = time.time()
    cfg = AtlasConfig(n_assets=2, n_days=1, rank_drifts=np.zeros(2),
                      rank_vols=np.full(2, 0.02), minutes_per_day=390,
                      seed=0, init_caps=np.array([1.0e9, 0.999e9]))
    _, sessions = generate_atlas_market(cfg)
    spreads, peaks = [], []
    for interval in (5, 30, 195):
        _, ledger = simulate_day(np.array([0.5, -0.5]), sessions[0],
                                 interval, eta=2e-4)
        spreads.append(ledger.total_spread)
        peaks.append(float(np.max(ledger.divergence)))
    elapsed = time.time() - t0
    ok = (spreads[0] >= spreads[1] >= spreads[2] > 0.0
          and peaks[0] <= peaks[1] <= peaks[2])
    check(ok and elapsed < 30.0,
          "criterion 5 cost trade-off",
          f"spreads {[f'{s:.6f}' for s in spreads]} non-increasing, "
          f"peak divergence {[f'{p:.5f}' for p in peaks]} non-decreasing "
          f"over intervals (5, 30, 195) in {elapsed:.1f}s")


def test_criterion_6_pnl_coincidence():
    # no rank switching and eta=0: the rank-space backtest must match the
    # name-space backtest mark for mark
    t0 = time.time()
    cfg = Config().override({
        "n_assets": 8, "n_days": 200, "atlas_vol": 0.01, "atlas_drift": 0.0,
        "minutes_per_day": 5, "seed": 11, "universe_size": 8,
        "lookback_factors": 60, "lookback_loadings": 30, "traj_window": 30,
        "k_name": 1, "k_rank": 1, "eta": 0.0, "risk_free_rate": 0.01,
        "init_cap_step": repr(float(np.log(2.0))),
    })
    panel, sessions = acquire_market(cfg)
    assert rank_order_static(panel), "construction must not reorder ranks"
    res_name = run_strategy(panel, sessions, cfg, "name")
    res_rank = run_strategy(panel, sessions, cfg, "rank")
    diff = float(np.max(np.abs(res_name.series.values
                               - res_rank.series.values)))
    traded = float(np.abs(res_name.weights).sum())
    elapsed = time.time() - t0
    check(diff <= 1e-10 and traded > 1.0 and elapsed < 30.0,
          "criterion 6 PnL coincidence",
          f"max |name - rank| = {diff:.2e} with gross traded weight "
          f"{traded:.1f} in {elapsed:.1f}s (limits 1e-10, 30s)")


def test_criterion_7_spectrum_sanity():
    # iid panels keep (almost) all rescaled eigenvalues inside the
    # Marchenko-Pastur band for q = 60/500
    t0 = time.time()
    q = 60 / 500
    lower, upper = (1 - np.sqrt(q)) ** 2, (1 + np.sqrt(q)) ** 2
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        report = eigen_spectrum(rng.standard_normal((500, 60)))
        assert abs(report.mp_lower - lower) <= 1e-12
        assert abs(report.mp_upper - upper) <= 1e-12
        outside = float(((report.bulk < lower) | (report.bulk > upper)).mean())
        worst = max(worst, outside)
    elapsed = time.time() - t0
    check(worst <= 0.05 and elapsed < 60.0,
          "criterion 7 spectrum sanity",
          f"worst outside-band fraction {worst:.3f} over 20 seeds "
          f"(N=500, T=60) in {elapsed:.1f}s (limits 0.05, 60s)")


def test_criterion_8_normalized_residual_calibration():
    # pooled standard-normal residuals: empirical density stays within 0.01
    # of the normal curve everywhere on the grid at n = 1e5
    t0 = time.time()
    rng = np.random.default_rng(38)
    trajs = [NormalizedTrajectory(as_of=f"day{i}", L=1,
                                  assets=[f"A{j}" for j in range(2000)],
                                  values=rng.standard_normal((2000, 1)))
             for i in range(50)]
    report = xhat_density_diff(trajs)
    worst = float(np.max(np.abs(report.diff)))
    n = int(report.counts[0])
    elapsed = time.time() - t0
    check(worst < 0.01 and n > 99_000 and elapsed < 30.0,
          "criterion 8 normalized-residual calibration",
          f"max |empirical - normal| = {worst:.5f} over {n} pooled samples "
          f"in {elapsed:.1f}s (limits 0.01, 30s)")


def test_criterion_9_mean_reversion_advantage():
    # paired synthetic markets, identical shocks: trading 2.5-day
    # mean reversion in rank space beats trading the 6-day name-space
    # analogue, one-sided paired t-test
    t0 = time.time()
    cfg = Config().override({
        "universe_size": 8, "lookback_factors": 60, "lookback_loadings": 30,
        "traj_window": 30, "k_name": 1, "k_rank": 1, "eta": 0.0,
        "rebalance_interval": 2,
    })

    def overall_sharpe(series):
        r = series.daily_returns()
        return float(np.mean(r) / np.std(r, ddof=1) * np.sqrt(252.0))

    fast_sr, slow_sr = [], []
    for seed in range(10):
        fast_panel = ou_factor_market(8, 400, 252 / 2.5, 0.02, 0.01, seed)
        slow_panel = ou_factor_market(8, 400, 252 / 6.0, 0.02, 0.01, seed)
        assert rank_order_static(fast_panel)
        assert rank_order_static(slow_panel)
        sess = geometric_sessions(fast_panel, minutes_per_day=3)
        fast = run_strategy(fast_panel, sess, cfg, "rank")
        slow = run_strategy(slow_panel, [], cfg, "name")
        fast_sr.append(overall_sharpe(fast.series))
        slow_sr.append(overall_sharpe(slow.series))
    result = stats.ttest_rel(fast_sr, slow_sr, alternative="greater")
    elapsed = time.time() - t0
    check(result.pvalue < 0.05 and elapsed < 300.0,
          "criterion 9 mean-reversion advantage",
          f"mean Sharpe fast {np.mean(fast_sr):.2f} vs slow "
          f"{np.mean(slow_sr):.2f}, paired one-sided p = {result.pvalue:.2e} "
          f"over 10 seeds in {elapsed:.1f}s (limits 0.05, 300s)")
