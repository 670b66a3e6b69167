"""Backtest value recursions, annual metrics and book statistics.

Name-space accounting follows the self-financed daily recursion: today's
target book is funded from cash, the leftover cash leg earns the risk-free
rate overnight, and turnover is charged at eta times the l1 distance
between the target and yesterday's position drifted through today's close.

Rank-space accounting opens a name book from the rank book each morning
(charging eta on the overnight turnover), hands the day to the intraday
engine, books its latency and spread settlements against the cash leg while
it still earns interest, and marks the surviving name book at the close.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .market import IntradayPanel, MarketPanel
from .rebalance import CostLedger, open_book, simulate_day

WEIGHT_BUDGET_TOL = 1e-9


@dataclass
class PnLSeries:
    dates: np.ndarray          # datetime64[D], value marks
    values: np.ndarray         # V_t, starts at 1
    bankrupt: bool = False

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=float)
        if self.dates.shape != self.values.shape:
            raise DataError("pnl series axes differ")

    def daily_returns(self) -> np.ndarray:
        return self.values[1:] / self.values[:-1] - 1.0


@dataclass
class AnnualMetrics:
    year: int
    annual_return: float
    annual_vol: float
    sharpe: float
    n_days: int
    zero_vol: bool = False


def _check_weights(w: np.ndarray, n: int, label: str) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DataError(f"{label}: weight row has wrong length")
    if not np.all(np.isfinite(w)):
        raise DataError(f"{label}: non-finite weights")
    if np.abs(w).sum() > 1.0 + WEIGHT_BUDGET_TOL:
        raise DataError(f"{label}: gross weight exceeds the unit budget")
    return w


def pnl_name(panel: MarketPanel, weights: np.ndarray, eta: float,
             leverage: float = 1.0) -> PnLSeries:
    """Run the daily name-space recursion.

    weights is (T, N) aligned to panel dates and assets; row t is the book
    held from the close of date t to the close of date t+1 (the last row is
    never used).  A nonzero weight on an asset without a next-day return is
    an accounting error.
    """
    if eta < 0 or leverage <= 0:
        raise ConfigError("eta must be >= 0 and leverage positive")
    n, t_len = panel.caps.shape
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (t_len, n):
        raise DataError("weights must align with the panel's dates and assets")
    values = np.empty(t_len)
    values[0] = 1.0
    prev_dollars = np.zeros(n)
    bankrupt = False
    keep = t_len
    for t in range(t_len - 1):
        w = _check_weights(weights[t], n, f"date {panel.dates[t]}")
        r_next = panel.returns[:, t + 1]
        held = w != 0.0
        if np.any(held & ~np.isfinite(r_next)):
            bad = int(np.nonzero(held & ~np.isfinite(r_next))[0][0])
            raise DataError(f"{panel.dates[t]}: weight on {panel.assets[bad]} "
                            f"but no return on {panel.dates[t + 1]}")
        target = leverage * values[t] * w
        r_today = panel.returns[:, t]
        drifted = np.where(prev_dollars != 0.0,
                           prev_dollars * (1.0 + np.nan_to_num(r_today)), 0.0)
        if np.any((prev_dollars != 0.0) & ~np.isfinite(r_today)):
            bad = int(np.nonzero((prev_dollars != 0.0)
                                 & ~np.isfinite(r_today))[0][0])
            raise DataError(f"{panel.dates[t]}: position held in "
                            f"{panel.assets[bad]} across an undefined return")
        cost = eta * np.abs(target - drifted).sum()
        cash = values[t] - target.sum() - cost
        grown = np.where(held, target * (1.0 + r_next), 0.0)
        values[t + 1] = (1.0 + panel.rf[t + 1]) * cash + grown.sum()
        prev_dollars = target
        if values[t + 1] <= 0.0:
            # the breaching mark is dropped: the series stays positive
            bankrupt = True
            keep = t + 1
            break
    return PnLSeries(dates=panel.dates[:keep], values=values[:keep],
                     bankrupt=bankrupt)


def pnl_rank(panel: MarketPanel, rank_weights: np.ndarray,
             sessions: Sequence[IntradayPanel], interval: int, eta: float,
             leverage: float = 1.0):
    """Run the rank-space recursion through the intraday engine.

    rank_weights is (T, n_ranks) aligned to panel dates; sessions[t] must
    cover the day ending at panel date t+1.  Returns (PnLSeries, ledgers).
    """
    if eta < 0 or leverage <= 0:
        raise ConfigError("eta must be >= 0 and leverage positive")
    t_len = len(panel.dates)
    rank_weights = np.asarray(rank_weights, dtype=float)
    if rank_weights.ndim != 2 or rank_weights.shape[0] != t_len:
        raise DataError("rank weights must have one row per panel date")
    if len(sessions) < t_len - 1:
        raise DataError(f"need {t_len - 1} sessions, got {len(sessions)}")
    for t in range(t_len - 1):
        if sessions[t].date != panel.dates[t + 1]:
            raise DataError(f"session {t} covers {sessions[t].date}, "
                            f"expected {panel.dates[t + 1]}")
        if sessions[t].assets != sessions[0].assets:
            raise DataError("sessions must share one asset list")

    n_sess = len(sessions[0].assets)
    values = np.empty(t_len)
    values[0] = 1.0
    prev_name = np.zeros(n_sess)
    ledgers: list[CostLedger] = []
    bankrupt = False
    keep = t_len
    for t in range(t_len - 1):
        w = _check_weights(rank_weights[t], rank_weights.shape[1],
                           f"date {panel.dates[t]}")
        if len(w) > n_sess:
            raise DataError("more rank slots than session assets")
        session = sessions[t]
        target_rank = leverage * values[t] * w
        opened = open_book(target_rank, session)
        open_cost = eta * np.abs(opened.name_weights - prev_name).sum()
        cash = values[t] - opened.name_weights.sum() - open_cost
        book, ledger = simulate_day(target_rank, session, interval, eta)
        cash -= ledger.total_cost
        values[t + 1] = (1.0 + panel.rf[t + 1]) * cash + book.name_weights.sum()
        ledgers.append(ledger)
        prev_name = book.name_weights
        if values[t + 1] <= 0.0:
            bankrupt = True
            keep = t + 1
            break
    series = PnLSeries(dates=panel.dates[:keep], values=values[:keep],
                       bankrupt=bankrupt)
    return series, ledgers


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def annual_metrics(series: PnLSeries, rf: Optional[np.ndarray] = None,
                   excess: bool = True, periods_per_year: float = 252.0
                   ) -> list[AnnualMetrics]:
    """Calendar-year return, volatility and Sharpe ratio.

    Daily returns are grouped by the year of their end date.  The annual
    return compounds to a 252-day year; volatility is sqrt(252) times the
    sample std.  With excess=True (the default) the annualized risk-free
    growth over the same days is subtracted in the Sharpe numerator; pass
    excess=False for the plain ratio.
    """
    if len(series.values) < 2:
        raise DataError("need at least two value marks for metrics")
    if np.any(series.values <= 0):
        raise DataError("metrics need strictly positive values")
    rets = series.daily_returns()
    end_dates = series.dates[1:]
    rf = np.zeros(len(rets)) if rf is None else np.asarray(rf, dtype=float)
    if rf.shape != rets.shape:
        raise DataError("risk-free series must align with daily returns")
    years = end_dates.astype("datetime64[Y]").astype(int) + 1970
    out = []
    for year in np.unique(years):
        take = years == year
        r = rets[take]
        n = int(take.sum())
        growth = float(np.prod(1.0 + r))
        ann_ret = growth ** (periods_per_year / n) - 1.0
        vol = (float(np.sqrt(periods_per_year) * r.std(ddof=1))
               if n > 1 else float("nan"))
        rf_ann = float(np.prod(1.0 + rf[take])) ** (periods_per_year / n) - 1.0
        zero_vol = not np.isfinite(vol) or vol <= 0.0
        if zero_vol:
            sharpe = float("nan")
        else:
            sharpe = ((ann_ret - rf_ann) / vol) if excess else ann_ret / vol
        out.append(AnnualMetrics(year=int(year), annual_return=ann_ret,
                                 annual_vol=vol, sharpe=sharpe, n_days=n,
                                 zero_vol=zero_vol))
    return out


def dollar_neutrality(weights: np.ndarray):
    """Per-row neutrality ratio and signed masses of a weight series.

    Returns (ratio, long_mass, short_mass) arrays; rows with an empty book
    get ratio NaN and zero masses.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise DataError("weight series must be 2-D")
    long_mass = np.where(w > 0, w, 0.0).sum(axis=1)
    short_mass = np.where(w < 0, w, 0.0).sum(axis=1)
    gross = np.abs(w).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(gross > 0, w.sum(axis=1) / gross, np.nan)
    return ratio, long_mass, short_mass


def holding_time(weights: np.ndarray, dates) -> dict:
    """Average length of maximal nonzero holding runs, per calendar year.

    A run is a maximal streak of consecutive days with a nonzero weight on
    one asset; its length in days is assigned to the year the run started.
    """
    w = np.asarray(weights, dtype=float)
    dates = np.asarray(dates, dtype="datetime64[D]")
    if w.ndim != 2 or w.shape[0] != len(dates):
        raise DataError("weight series must align with dates")
    years = dates.astype("datetime64[Y]").astype(int) + 1970
    runs: dict[int, list[int]] = {}
    t_len, n = w.shape
    for i in range(n):
        active = w[:, i] != 0.0
        t = 0
        while t < t_len:
            if active[t]:
                start = t
                while t < t_len and active[t]:
                    t += 1
                runs.setdefault(int(years[start]), []).append(t - start)
            else:
                t += 1
    return {year: float(np.mean(lengths)) for year, lengths in
            sorted(runs.items())}


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def write_equity_csv(series: PnLSeries, path, config_hash: Optional[str] = None):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "value"])
        for date, value in zip(series.dates, series.values):
            writer.writerow([str(date), repr(float(value))])


def write_metrics_csv(metrics: Sequence[AnnualMetrics], path,
                      config_hash: Optional[str] = None):
    def cell(v):
        return repr(float(v)) if np.isfinite(v) else ""

    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["year", "return", "vol", "sharpe"])
        for m in metrics:
            writer.writerow([m.year, cell(m.annual_return),
                             cell(m.annual_vol), cell(m.sharpe)])
