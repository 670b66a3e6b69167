"""End-to-end runs: acquire data, refit daily, trade, account, diagnose.

The daily loop mirrors live operation.  At each date t with a full factor
lookback the engine selects the universe, fits factors on the trailing
window, fits loadings on the shorter trailing window using factor
realizations derived from the same weights, projects that day's excess
returns to residuals, and appends them to a residual matrix.  Once the
trajectory window is also full it fits the lag-1 regression per instrument,
turns deviations into residual-space books (threshold rule or an imported
weight stream) and maps them to tradable weights through the projector.
Name-space books settle through the daily recursion; rank-space books run
through the intraday engine.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bridge import (WeightRecord, WeightStream, export_weight_stream,
                     import_weight_stream, nn_equity_weights, record_weights)
from .config import Config
from .diagnostics import (DensityDiff, SpectrumReport, SwitchingReport,
                          TauDistribution, eigen_spectrum, strategy_map,
                          switching_time_distribution, tau_distribution,
                          write_strategy_map_csv, xhat_density_diff)
from .errors import ConfigError, DataError, DegeneracyError, EngineError
from .factors import (FactorModel, build_projector, fit_factors,
                      fit_loadings, project_and_normalize)
from .market import (AtlasConfig, IntradayPanel, MarketPanel,
                     generate_atlas_market, load_daily_panel,
                     load_intraday_panel, select_universe,
                     write_daily_panel, write_intraday_panels,
                     write_risk_free)
from .ou import (OUFit, PositionState, fit_ou, signal, update_positions,
                 write_fit_table)
from .pnl import (AnnualMetrics, PnLSeries, annual_metrics, pnl_name,
                  pnl_rank, write_equity_csv, write_metrics_csv)
from .rebalance import write_ledger_csv, write_ledger_summary
from .residual import (CumulativeTrajectory, NormalizedTrajectory,
                       cumulative_residuals, export_training_set,
                       normalize_cumulative)


@contextmanager
def stage(name: str):
    """Tag engine errors with the pipeline stage that raised them."""
    try:
        yield
    except EngineError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


# ---------------------------------------------------------------------------
# data acquisition
# ---------------------------------------------------------------------------

def atlas_from_config(cfg: Config) -> AtlasConfig:
    n = cfg.get_int("n_assets")
    k = np.arange(n)
    strength = cfg.get_float("atlas_drift")
    drifts = strength * (k - (n - 1) / 2.0) / max(n - 1, 1)
    vols = np.full(n, cfg.get_float("atlas_vol"))
    top = cfg.get_float("init_cap_top")
    step = cfg.get_float("init_cap_step")
    init = np.exp(np.log(top) - step * k)
    return AtlasConfig(n_assets=n, n_days=cfg.get_int("n_days"),
                       rank_drifts=tuple(drifts), rank_vols=tuple(vols),
                       minutes_per_day=cfg.get_int("minutes_per_day"),
                       seed=cfg.get_int("seed"), init_caps=tuple(init),
                       common_loading=cfg.get_float("common_loading"),
                       risk_free_rate=cfg.get_float("risk_free_rate"),
                       start_date=cfg.get_str("start_date"))


def acquire_market(cfg: Config, need_intraday: bool = False):
    """(panel, sessions) from CSV paths when set, otherwise simulated."""
    daily = cfg.get_str("daily_csv")
    with stage("data"):
        if daily:
            rf_path = cfg.get_str("risk_free_csv") or None
            panel = load_daily_panel(daily, risk_free_path=rf_path)
            intraday = cfg.get_str("intraday_csv")
            sessions: list[IntradayPanel] = []
            if intraday:
                sessions = load_intraday_panel(intraday)
            if need_intraday and not sessions:
                raise DataError("this run needs intraday data: set intraday_csv")
            return panel, sessions
        panel, sessions = generate_atlas_market(atlas_from_config(cfg))
        return panel, sessions


# ---------------------------------------------------------------------------
# space construction and daily decomposition
# ---------------------------------------------------------------------------

def rank_space_returns(panel: MarketPanel, n: int) -> np.ndarray:
    """Per-rank daily returns for the top n ranks, NaN where undefined."""
    t_len = len(panel.dates)
    out = np.full((n, t_len), np.nan)
    for t in range(1, t_len):
        alive = panel.alive[:, t] & panel.alive[:, t - 1]
        count = int(alive.sum())
        if count == 0:
            continue
        today = np.sort(panel.caps[alive, t])[::-1]
        prior = np.sort(panel.caps[alive, t - 1])[::-1]
        k = min(n, count)
        out[:k, t] = today[:k] / prior[:k] - 1.0
    return out


def rank_labels(n: int) -> list[str]:
    return [f"rank_{k:03d}" for k in range(1, n + 1)]


@dataclass
class Decomposition:
    space: str
    instruments: list[str]
    dates: np.ndarray
    returns: np.ndarray            # (N, T) instrument returns
    eps: np.ndarray                # (N, T) residuals, NaN where not fitted
    models: dict = field(default_factory=dict)        # t -> FactorModel
    model_index: dict = field(default_factory=dict)   # t -> instrument rows


def decompose_daily(panel: MarketPanel, cfg: Config, space: str
                    ) -> Decomposition:
    """Roll the two-window fit over every date with full history."""
    if space not in ("name", "rank"):
        raise ConfigError(f"space must be 'name' or 'rank', got {space!r}")
    look_f = cfg.get_int("lookback_factors")
    look_b = cfg.get_int("lookback_loadings")
    if look_b > look_f:
        raise ConfigError("lookback_loadings cannot exceed lookback_factors")
    if look_b < 2 or look_f < 2:
        raise ConfigError("lookbacks must be at least 2 days")
    n_univ = cfg.get_int("universe_size")
    k = cfg.get_int("k_name" if space == "name" else "k_rank")

    if space == "name":
        instruments = list(panel.assets)
        returns = panel.returns
    else:
        instruments = rank_labels(n_univ)
        returns = rank_space_returns(panel, n_univ)

    t_len = len(panel.dates)
    dec = Decomposition(space=space, instruments=instruments,
                        dates=panel.dates, returns=returns,
                        eps=np.full(returns.shape, np.nan))
    name_index = {a: i for i, a in enumerate(instruments)}

    for t in range(look_f, t_len - 1):
        if space == "name":
            chosen = select_universe(panel, panel.dates[t], n_univ).assets
            univ = np.array([name_index[a] for a in chosen])
        else:
            univ = np.arange(len(instruments))
        window = returns[univ, t - look_f + 1: t + 1] \
            - panel.rf[t - look_f + 1: t + 1]
        ok = np.all(np.isfinite(window), axis=1)
        if int(ok.sum()) < k + 1:
            raise DegeneracyError(
                f"{panel.dates[t]}: only {int(ok.sum())} instruments carry a "
                f"full {look_f}-day window, need more than k={k}")
        rows = univ[ok]
        x_long = window[ok]
        labels = [instruments[i] for i in rows]
        factors, omega = fit_factors(x_long, k, assets=labels)
        x_short = x_long[:, -look_b:]
        f_short = omega @ x_short
        beta = fit_loadings(x_short, f_short, assets=labels)
        phi = build_projector(beta, omega)
        dec.eps[rows, t] = phi @ (returns[rows, t] - panel.rf[t])
        dec.models[t] = FactorModel(as_of=str(panel.dates[t]), k=k,
                                    omega=omega, beta=beta, phi=phi,
                                    universe=labels)
        dec.model_index[t] = rows
    return dec


# ---------------------------------------------------------------------------
# strategy loop
# ---------------------------------------------------------------------------

@dataclass
class BacktestResult:
    space: str
    config_hash: str
    series: PnLSeries
    metrics: list
    weights: np.ndarray            # (T, N) tradable books per date
    w_eps: np.ndarray              # (T, N) residual books per date
    fits: dict                     # (date str, instrument) -> OUFit
    signals: dict                  # (date str, instrument) -> deviation
    weight_records: list           # residual books as bridge records
    raw_trajectories: list
    trajectories: list             # normalized
    ledgers: list = field(default_factory=list)
    decomposition: Optional[Decomposition] = None


def _trading_range(cfg: Config, t_len: int):
    start = cfg.get_int("lookback_factors") + cfg.get_int("traj_window") - 1
    return range(start, t_len - 1)


def run_strategy(panel: MarketPanel, sessions: Sequence[IntradayPanel],
                 cfg: Config, space: str,
                 stream: Optional[WeightStream] = None) -> BacktestResult:
    """OU threshold strategy, or replay of an imported weight stream."""
    look_l = cfg.get_int("traj_window")
    if look_l < 2:
        raise ConfigError("traj_window must be at least 2 days")
    with stage("decompose"):
        dec = decompose_daily(panel, cfg, space)
    n = len(dec.instruments)
    t_len = len(panel.dates)
    name_index = {a: i for i, a in enumerate(dec.instruments)}
    weights = np.zeros((t_len, n))
    w_eps_rows = np.zeros((t_len, n))
    fits_out: dict = {}
    signals_out: dict = {}
    records: list[WeightRecord] = []
    raw_trajs: list[CumulativeTrajectory] = []
    norm_trajs: list[NormalizedTrajectory] = []
    state = PositionState()
    by_date = stream.by_date() if stream is not None else {}
    open_thr = cfg.get_float("open_threshold")
    close_thr = cfg.get_float("close_threshold")
    tau_max = cfg.get_float("tau_max_days")

    with stage("strategy"):
        for t in _trading_range(cfg, t_len):
            if t not in dec.models:
                continue
            window = dec.eps[:, t - look_l + 1: t + 1]
            ok = np.all(np.isfinite(window), axis=1)
            rows = np.nonzero(ok)[0]
            if len(rows) == 0:
                continue
            date = panel.dates[t]
            labels = [dec.instruments[i] for i in rows]
            traj = cumulative_residuals(window[rows], labels, date)
            raw_trajs.append(traj)
            norm_trajs.append(normalize_cumulative(traj, window[rows]))
            fits: dict = {}
            sigs: dict = {}
            for label, row in zip(labels, traj.values):
                try:
                    fit = fit_ou(row)
                except DegeneracyError:
                    continue
                fits[label] = fit
                sigs[label] = signal(fit, row[-1])
                fits_out[(str(date), label)] = fit
                signals_out[(str(date), label)] = sigs[label]

            model = dec.models[t]
            if stream is None:
                state = update_positions(state, sigs, fits, date,
                                         open_threshold=open_thr,
                                         close_threshold=close_thr,
                                         tau_max_days=tau_max)
                w_eps_univ = np.array([float(state.weight(a))
                                       for a in model.universe])
            else:
                rec = by_date.get(str(date))
                if rec is None:
                    continue
                aligned = record_weights(rec, labels)
                w_eps_univ = np.zeros(len(model.universe))
                pos = {a: i for i, a in enumerate(model.universe)}
                for label, value in zip(labels, aligned):
                    w_eps_univ[pos[label]] = value
            w_equity, flat = nn_equity_weights(model.phi, w_eps_univ)
            for label, w_e, w_r in zip(model.universe, w_eps_univ, w_equity):
                w_eps_rows[t, name_index[label]] = w_e
                weights[t, name_index[label]] = w_r
            book = np.array([w_eps_rows[t, name_index[a]] for a in labels])
            records.append(WeightRecord(date=str(date), space=space,
                                        assets=labels, w_eps=book))

    with stage("account"):
        ledgers = []
        if space == "name":
            series = pnl_name(panel, weights, eta=cfg.get_float("eta"),
                              leverage=cfg.get_float("leverage"))
        else:
            if len(sessions) < t_len - 1:
                raise DataError("rank-space accounting needs a session for "
                                "every panel day")
            series, ledgers = pnl_rank(panel, weights, sessions,
                                       interval=cfg.get_int("rebalance_interval"),
                                       eta=cfg.get_float("eta"),
                                       leverage=cfg.get_float("leverage"))
        rf_slice = panel.rf[1:len(series.values)]
        metrics = annual_metrics(series, rf=rf_slice,
                                 excess=cfg.get_bool("sharpe_excess"))
    return BacktestResult(space=space, config_hash=cfg.hash(), series=series,
                          metrics=metrics, weights=weights,
                          w_eps=w_eps_rows, fits=fits_out,
                          signals=signals_out, weight_records=records,
                          raw_trajectories=raw_trajs,
                          trajectories=norm_trajs, ledgers=ledgers,
                          decomposition=dec)


def _load_stream(cfg: Config) -> Optional[WeightStream]:
    path = cfg.get_str("weights_jsonl")
    if not path:
        return None
    with stage("bridge"):
        stream = import_weight_stream(path)
        if stream.rejected:
            lineno, reason = stream.rejected[0]
            raise DataError(f"{path} has {len(stream.rejected)} rejected "
                            f"record(s); first at line {lineno}: {reason}")
    return stream


def run_backtest_name(cfg: Config) -> BacktestResult:
    panel, sessions = acquire_market(cfg)
    return run_strategy(panel, sessions, cfg, "name",
                        stream=_load_stream(cfg))


def run_backtest_rank(cfg: Config) -> BacktestResult:
    panel, sessions = acquire_market(cfg, need_intraday=True)
    return run_strategy(panel, sessions, cfg, "rank",
                        stream=_load_stream(cfg))


# ---------------------------------------------------------------------------
# diagnostics bundle
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsResult:
    config_hash: str
    spectra: dict                  # space -> SpectrumReport
    tau: dict                      # space -> TauDistribution
    density: dict                  # space -> DensityDiff
    map_rows: dict                 # space -> list of StrategyMapRow
    switching: Optional[SwitchingReport]
    backtests: dict                # space -> BacktestResult


def last_window_spectrum(dec: Decomposition, panel: MarketPanel,
                         cfg: Config) -> SpectrumReport:
    look_f = cfg.get_int("lookback_factors")
    ts = sorted(dec.models)
    if not ts:
        raise DataError("no fitted dates to take a spectrum from")
    t = ts[-1]
    rows = dec.model_index[t]
    window = dec.returns[rows, t - look_f + 1: t + 1] \
        - panel.rf[t - look_f + 1: t + 1]
    return eigen_spectrum(window)


def run_diagnostics(cfg: Config) -> DiagnosticsResult:
    panel, sessions = acquire_market(cfg)
    spectra, tau, density, map_rows, backtests = {}, {}, {}, {}, {}
    for space in ("name", "rank"):
        if space == "rank" and not sessions:
            continue                 # daily-only data: no rank accounting
        result = run_strategy(panel, sessions, cfg, space)
        backtests[space] = result
        with stage("diagnose"):
            spectra[space] = last_window_spectrum(result.decomposition,
                                                  panel, cfg)
            tau[space] = tau_distribution(
                list(result.fits.values()),
                bin_width=cfg.get_float("tau_bin"),
                upper=cfg.get_float("tau_hist_upper"),
                tau_max=cfg.get_float("tau_max_days"))
            density[space] = xhat_density_diff(
                result.trajectories, lo=cfg.get_float("value_lo"),
                hi=cfg.get_float("value_hi"),
                width=cfg.get_float("value_bin"))
            weight_lookup = {}
            for rec in result.weight_records:
                for asset, w in zip(rec.assets, rec.w_eps):
                    if w != 0:
                        weight_lookup[(rec.date, asset)] = w
            map_rows[space] = strategy_map(result.fits, result.signals,
                                           weight_lookup)
    switching = None
    if sessions:
        with stage("diagnose"):
            switching = switching_time_distribution(
                sessions, stride=cfg.get_int("pair_stride"),
                delta=cfg.get_float("crossing_delta"))
    return DiagnosticsResult(config_hash=cfg.hash(), spectra=spectra,
                             tau=tau, density=density, map_rows=map_rows,
                             switching=switching, backtests=backtests)


# ---------------------------------------------------------------------------
# training-set export
# ---------------------------------------------------------------------------

def export_train(cfg: Config, path) -> int:
    """Write the training JSONL for cfg's space; returns the record count."""
    space = cfg.get_str("space")
    panel, sessions = acquire_market(cfg, need_intraday=(space == "rank"))
    result = run_strategy(panel, sessions, cfg, space)
    return export_result_train(result, panel, cfg, path)


def export_result_train(result: BacktestResult, panel: MarketPanel,
                        cfg: Config, path) -> int:
    """Export a finished run's trajectories with training extras."""
    dec = result.decomposition
    with_returns = cfg.get_bool("with_returns")
    with_phi = cfg.get_bool("with_phi")
    date_to_t = {str(d): t for t, d in enumerate(dec.dates)}
    name_index = {a: i for i, a in enumerate(dec.instruments)}
    r_next: dict = {}
    phi: dict = {}
    for traj in result.raw_trajectories:
        t = date_to_t[traj.as_of]
        if with_returns and t + 1 < len(dec.dates):
            rows = np.array([name_index[a] for a in traj.assets])
            nxt = dec.returns[rows, t + 1] - panel.rf[t + 1]
            if np.all(np.isfinite(nxt)):
                r_next[traj.as_of] = nxt
        if with_phi and t in dec.models:
            model = dec.models[t]
            pos = {a: i for i, a in enumerate(model.universe)}
            take = np.array([pos[a] for a in traj.assets])
            phi[traj.as_of] = model.phi[np.ix_(take, take)]
    with stage("export"):
        export_training_set(result.raw_trajectories, path,
                            space=result.space,
                            r_next=r_next if with_returns else None,
                            phi=phi if with_phi else None,
                            config_hash=cfg.hash())
    return len(result.raw_trajectories)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def run_sweep(cfg: Config):
    """Cost and cadence sweeps for the configured space.

    Returns (eta_rows, interval_rows): each row is (value, terminal value,
    mean annual sharpe).  The cadence sweep only applies to rank space.
    """
    space = cfg.get_str("space")
    runner = run_backtest_rank if space == "rank" else run_backtest_name
    eta_rows = []
    for eta in cfg.get_float_list("eta_sweep"):
        result = runner(cfg.override({"eta": repr(eta)}))
        eta_rows.append((eta, float(result.series.values[-1]),
                         _mean_sharpe(result.metrics)))
    interval_rows = []
    if space == "rank":
        for interval in cfg.get_int_list("interval_sweep"):
            result = runner(cfg.override({"rebalance_interval": interval}))
            interval_rows.append((interval, float(result.series.values[-1]),
                                  _mean_sharpe(result.metrics)))
    return eta_rows, interval_rows


def _mean_sharpe(metrics: Sequence[AnnualMetrics]) -> float:
    vals = [m.sharpe for m in metrics if np.isfinite(m.sharpe)]
    return float(np.mean(vals)) if vals else float("nan")
