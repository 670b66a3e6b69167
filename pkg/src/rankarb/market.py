"""Market data containers, synthetic generation and CSV I/O.

Daily data is held as asset-by-date matrices with NaN marking dates where an
asset is absent; absent entries are never zero-filled or imputed.  Intraday
sessions are separate minute grids whose first minute repeats the prior
day's close, so consecutive sessions chain without gaps.

File formats (headers are mandatory, comment lines start with '#'):
    daily panel   date,asset,cap,return      return empty where undefined
    intraday      date,minute,asset,cap
    risk-free     date,rate
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError

RETURN_MISMATCH_TOL = 1e-9


class ReturnMismatchWarning(UserWarning):
    """Stated return disagrees with the cap ratio at constant share count."""


class UniverseWarning(UserWarning):
    """Universe request could not be met exactly."""


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass
class MarketPanel:
    """Daily capitalizations and returns for a set of assets.

    caps and returns are (n_assets, n_dates); NaN cap means the asset is
    absent that day.  returns[:, 0] is always undefined.  rf holds the simple
    daily risk-free rate per date.
    """

    dates: np.ndarray          # datetime64[D], strictly increasing
    assets: list[str]
    caps: np.ndarray           # (N, T) float, NaN = masked
    returns: np.ndarray        # (N, T) float, NaN = undefined
    rf: np.ndarray = field(default=None)  # (T,) float

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.caps = np.asarray(self.caps, dtype=float)
        self.returns = np.asarray(self.returns, dtype=float)
        if self.rf is None:
            self.rf = np.zeros(len(self.dates))
        self.rf = np.asarray(self.rf, dtype=float)
        self.validate()

    def validate(self):
        n, t = self.caps.shape
        if len(self.assets) != n or len(self.dates) != t:
            raise DataError("panel axes do not match caps shape")
        if self.returns.shape != (n, t):
            raise DataError("returns shape differs from caps shape")
        if self.rf.shape != (t,):
            raise DataError("risk-free series length differs from date axis")
        if t > 1 and not np.all(np.diff(self.dates).astype(int) > 0):
            raise DataError("dates must be strictly increasing")
        alive = np.isfinite(self.caps)
        if np.any(self.caps[alive] <= 0):
            raise DataError("caps must be strictly positive where present")
        defined = np.isfinite(self.returns)
        if np.any(self.returns[defined] <= -1.0):
            raise DataError("returns must exceed -1 where defined")

    @property
    def alive(self) -> np.ndarray:
        """Boolean (N, T) mask of dates where each asset has a cap."""
        return np.isfinite(self.caps)

    def date_index(self, date) -> int:
        date = np.datetime64(date, "D")
        idx = np.searchsorted(self.dates, date)
        if idx >= len(self.dates) or self.dates[idx] != date:
            raise DataError(f"date {date} not in panel")
        return int(idx)


@dataclass
class IntradayPanel:
    """One trading session on a minute grid.

    Minute 1 carries the prior day's closing caps; the last minute equals
    this day's close in the daily panel.
    """

    date: np.datetime64
    minutes: np.ndarray        # (M,) int, strictly increasing
    assets: list[str]
    caps: np.ndarray           # (N, M) float, strictly positive

    def __post_init__(self):
        self.date = np.datetime64(self.date, "D")
        self.minutes = np.asarray(self.minutes, dtype=int)
        self.caps = np.asarray(self.caps, dtype=float)
        if self.caps.shape != (len(self.assets), len(self.minutes)):
            raise DataError("intraday caps shape does not match axes")
        if len(self.minutes) > 1 and not np.all(np.diff(self.minutes) > 0):
            raise DataError("intraday minutes must be strictly increasing")
        if not np.all(np.isfinite(self.caps)) or np.any(self.caps <= 0):
            raise DataError("intraday caps must be finite and positive")


@dataclass(frozen=True)
class AtlasConfig:
    """Parameters of the rank-driven diffusion generator.

    rank_drifts and rank_vols are indexed by rank (entry 0 = largest asset);
    units are per trading day for drift and per sqrt(day) for vol of the log
    cap.  common_loading in [0, 1) routes that fraction of each asset's
    Brownian motion through one shared factor; 0 keeps assets independent.
    """

    n_assets: int
    n_days: int
    rank_drifts: tuple
    rank_vols: tuple
    minutes_per_day: int = 390
    seed: int = 0
    init_caps: Optional[tuple] = None
    common_loading: float = 0.0
    risk_free_rate: float = 0.0
    start_date: str = "2020-01-02"

    def __post_init__(self):
        if self.n_assets < 2:
            raise ConfigError("need at least two assets")
        if self.n_days < 1:
            raise ConfigError("need at least one day")
        if self.minutes_per_day < 2:
            raise ConfigError("need at least two minutes per day")
        if len(self.rank_drifts) != self.n_assets or len(self.rank_vols) != self.n_assets:
            raise ConfigError("rank profiles must have one entry per asset")
        if any(v < 0 for v in self.rank_vols):
            raise ConfigError("rank vols must be non-negative")
        if not 0.0 <= self.common_loading < 1.0:
            raise ConfigError("common_loading must lie in [0, 1)")
        if self.init_caps is not None:
            if len(self.init_caps) != self.n_assets:
                raise ConfigError("init_caps must have one entry per asset")
            if any(c <= 0 for c in self.init_caps):
                raise ConfigError("init_caps must be positive")


@dataclass
class UniverseSelection:
    """Top-capitalization membership list at one date."""

    as_of: np.datetime64
    assets: list[str]          # descending cap, ties by ascending id


def default_atlas_config(n_assets: int, n_days: int, seed: int = 0,
                         drift_strength: float = 0.02, vol: float = 0.02,
                         **kwargs) -> AtlasConfig:
    """Stability-shaped profile: low ranks drift up, top ranks drift down."""
    k = np.arange(n_assets)
    drifts = drift_strength * (k - (n_assets - 1) / 2.0) / max(n_assets - 1, 1)
    vols = np.full(n_assets, vol)
    return AtlasConfig(n_assets=n_assets, n_days=n_days,
                       rank_drifts=tuple(drifts), rank_vols=tuple(vols),
                       seed=seed, **kwargs)


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

def _asset_names(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"a{i:0{width}d}" for i in range(n)]


def _rank_order(caps: np.ndarray, id_rank: np.ndarray) -> np.ndarray:
    """Asset indices sorted by descending cap, ties by ascending identifier."""
    return np.lexsort((id_rank, -caps))


def business_days(start, count: int) -> np.ndarray:
    start = np.datetime64(start, "D")
    return np.busday_offset(start, np.arange(count), roll="forward")


def generate_atlas_market(config: AtlasConfig):
    """Simulate the rank-driven diffusion.

    Returns (MarketPanel, list of IntradayPanel); the daily panel has
    n_days + 1 dates (the first is the seed snapshot and has no session),
    and each session's minute grid is 1..minutes_per_day with minute 1
    repeating the prior close.  Identical config -> identical output.
    """
    n, m = config.n_assets, config.minutes_per_day
    steps = m - 1                      # Brownian steps per session
    dt = 1.0 / steps                   # one session = one trading day
    rng = np.random.default_rng(config.seed)
    drifts = np.asarray(config.rank_drifts, dtype=float)
    vols = np.asarray(config.rank_vols, dtype=float)
    rho = config.common_loading
    idio = np.sqrt(1.0 - rho * rho)

    assets = _asset_names(n)
    id_rank = np.arange(n)             # names are already in ascending id order
    if config.init_caps is not None:
        log_c = np.log(np.asarray(config.init_caps, dtype=float))
    else:
        # descending log-spaced seed caps, largest first
        log_c = np.log(1e9) - 0.5 * np.arange(n)

    dates = business_days(config.start_date, config.n_days + 1)
    daily_caps = np.empty((n, config.n_days + 1))
    daily_caps[:, 0] = np.exp(log_c)
    sessions: list[IntradayPanel] = []
    minutes = np.arange(1, m + 1)

    for day in range(1, config.n_days + 1):
        caps_day = np.empty((n, m))
        caps_day[:, 0] = np.exp(log_c)
        for s in range(steps):
            order = _rank_order(np.exp(log_c), id_rank)
            rank_of = np.empty(n, dtype=int)
            rank_of[order] = np.arange(n)
            z_common = rng.standard_normal()
            z = rng.standard_normal(n)
            shock = idio * z + rho * z_common
            log_c = log_c + drifts[rank_of] * dt + vols[rank_of] * np.sqrt(dt) * shock
            caps_day[:, s + 1] = np.exp(log_c)
        daily_caps[:, day] = caps_day[:, -1]
        sessions.append(IntradayPanel(date=dates[day], minutes=minutes.copy(),
                                      assets=assets, caps=caps_day))

    returns = np.full_like(daily_caps, np.nan)
    returns[:, 1:] = daily_caps[:, 1:] / daily_caps[:, :-1] - 1.0
    rf = np.full(config.n_days + 1, config.risk_free_rate)
    panel = MarketPanel(dates=dates, assets=assets, caps=daily_caps,
                        returns=returns, rf=rf)
    return panel, sessions


def panel_from_returns(returns: np.ndarray, dates=None, assets=None,
                       init_caps=None, rf=None) -> MarketPanel:
    """Build a panel from a dense (N, T) return matrix via cap compounding.

    returns[:, 0] is ignored (first date has no return by construction).
    """
    returns = np.asarray(returns, dtype=float)
    n, t = returns.shape
    if assets is None:
        assets = _asset_names(n)
    if dates is None:
        dates = business_days("2020-01-02", t)
    if init_caps is None:
        init_caps = np.exp(np.log(1e9) - 0.5 * np.arange(n))
    caps = np.empty((n, t))
    caps[:, 0] = init_caps
    growth = 1.0 + returns[:, 1:]
    caps[:, 1:] = caps[:, [0]] * np.cumprod(growth, axis=1)
    rets = returns.copy()
    rets[:, 0] = np.nan
    return MarketPanel(dates=dates, assets=list(assets), caps=caps,
                       returns=rets, rf=rf)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _open_rows(path, expected_header: list[str]):
    """Yield (line_number, row) after the header, skipping comments."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header != expected_header:
                    raise DataError(
                        f"{path}: header {header} does not match {expected_header}")
                continue
            if len(row) != len(expected_header):
                raise DataError(f"{path}:{lineno}: expected "
                                f"{len(expected_header)} fields, got {len(row)}")
            yield lineno, row
        if header is None:
            raise DataError(f"{path}: missing header row")


def write_daily_panel(panel: MarketPanel, path, config_hash: str | None = None):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "asset", "cap", "return"])
        alive = panel.alive
        for t, date in enumerate(panel.dates):
            for i, asset in enumerate(panel.assets):
                if not alive[i, t]:
                    continue
                r = panel.returns[i, t]
                writer.writerow([str(date), asset, _fmt(panel.caps[i, t]),
                                 _fmt(r) if np.isfinite(r) else ""])


def write_risk_free(panel: MarketPanel, path, config_hash: str | None = None):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "rate"])
        for t, date in enumerate(panel.dates):
            writer.writerow([str(date), _fmt(panel.rf[t])])


def write_intraday_panels(sessions: Sequence[IntradayPanel], path,
                          config_hash: str | None = None):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "minute", "asset", "cap"])
        for sess in sessions:
            for j, minute in enumerate(sess.minutes):
                for i, asset in enumerate(sess.assets):
                    writer.writerow([str(sess.date), int(minute), asset,
                                     _fmt(sess.caps[i, j])])


def load_risk_free(path) -> dict:
    """Read a date,rate file into a dict keyed by datetime64 date."""
    rates: dict = {}
    for lineno, row in _open_rows(path, ["date", "rate"]):
        try:
            date = np.datetime64(row[0].strip(), "D")
            rate = float(row[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if date in rates:
            raise DataError(f"{path}:{lineno}: duplicate date {date}")
        rates[date] = rate
    return rates


def load_daily_panel(path, risk_free_path=None) -> MarketPanel:
    """Read a daily panel CSV.

    Rows must be grouped by non-decreasing date.  Assets missing on a date
    stay masked.  The engine works at constant share count, so a stated
    return that disagrees with the cap ratio by more than 1e-9 draws a
    ReturnMismatchWarning; the stated return is kept either way.
    """
    dates: list[np.datetime64] = []
    rows = []
    for lineno, row in _open_rows(path, ["date", "asset", "cap", "return"]):
        try:
            date = np.datetime64(row[0].strip(), "D")
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from exc
        asset = row[1].strip()
        if not asset:
            raise DataError(f"{path}:{lineno}: empty asset id")
        try:
            cap = float(row[2])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad cap {row[2]!r}") from exc
        if not np.isfinite(cap) or cap <= 0:
            raise DataError(f"{path}:{lineno}: cap must be positive, got {row[2]}")
        ret_text = row[3].strip()
        if ret_text == "":
            ret = np.nan
        else:
            try:
                ret = float(ret_text)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad return {row[3]!r}") from exc
            if ret <= -1.0:
                raise DataError(f"{path}:{lineno}: return must exceed -1")
        if dates and date < dates[-1]:
            raise DataError(f"{path}:{lineno}: dates out of order")
        if not dates or date != dates[-1]:
            dates.append(date)
        rows.append((lineno, len(dates) - 1, asset, cap, ret))

    assets = sorted({r[2] for r in rows})
    index = {a: i for i, a in enumerate(assets)}
    n, t = len(assets), len(dates)
    caps = np.full((n, t), np.nan)
    rets = np.full((n, t), np.nan)
    seen = set()
    for lineno, d_idx, asset, cap, ret in rows:
        key = (d_idx, asset)
        if key in seen:
            raise DataError(f"{path}:{lineno}: duplicate entry for "
                            f"{asset} on {dates[d_idx]}")
        seen.add(key)
        caps[index[asset], d_idx] = cap
        rets[index[asset], d_idx] = ret

    # cross-check stated returns against cap ratios
    for lineno, d_idx, asset, cap, ret in rows:
        if d_idx == 0 or not np.isfinite(ret):
            continue
        prev = caps[index[asset], d_idx - 1]
        if not np.isfinite(prev):
            continue
        implied = cap / prev - 1.0
        if abs(ret - implied) > RETURN_MISMATCH_TOL:
            warnings.warn(
                f"{path}:{lineno}: return {ret!r} for {asset} on "
                f"{dates[d_idx]} disagrees with cap ratio {implied!r}",
                ReturnMismatchWarning, stacklevel=2)

    rf = np.zeros(t)
    if risk_free_path is not None:
        table = load_risk_free(risk_free_path)
        for d_idx, date in enumerate(dates):
            if date not in table:
                raise DataError(f"{risk_free_path}: no rate for {date}")
            rf[d_idx] = table[date]

    return MarketPanel(dates=np.array(dates, dtype="datetime64[D]"),
                       assets=assets, caps=caps, returns=rets, rf=rf)


def load_intraday_panel(path, prior_close: Optional[Mapping[str, float]] = None
                        ) -> list[IntradayPanel]:
    """Read an intraday CSV into one IntradayPanel per date.

    Every (minute, asset) cell must be present per date.  Consecutive
    sessions must chain: first-minute caps equal the previous session's
    last-minute caps.  prior_close, when given, anchors the first session.
    """
    by_date: dict = {}
    order: list[np.datetime64] = []
    for lineno, row in _open_rows(path, ["date", "minute", "asset", "cap"]):
        try:
            date = np.datetime64(row[0].strip(), "D")
            minute = int(row[1])
            cap = float(row[3])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        asset = row[2].strip()
        if not np.isfinite(cap) or cap <= 0:
            raise DataError(f"{path}:{lineno}: cap must be positive")
        if date not in by_date:
            by_date[date] = {}
            order.append(date)
        cell = by_date[date]
        if (minute, asset) in cell:
            raise DataError(f"{path}:{lineno}: duplicate cell "
                            f"({date}, {minute}, {asset})")
        cell[(minute, asset)] = cap

    if len(order) > 1 and any(b <= a for a, b in zip(order, order[1:])):
        raise DataError(f"{path}: session dates out of order")

    sessions = []
    for date in order:
        cell = by_date[date]
        minutes = sorted({m for m, _ in cell})
        assets = sorted({a for _, a in cell})
        caps = np.empty((len(assets), len(minutes)))
        for j, minute in enumerate(minutes):
            for i, asset in enumerate(assets):
                if (minute, asset) not in cell:
                    raise DataError(f"{path}: {date} missing cap for "
                                    f"{asset} at minute {minute}")
                caps[i, j] = cell[(minute, asset)]
        sessions.append(IntradayPanel(date=date, minutes=np.array(minutes),
                                      assets=assets, caps=caps))

    for prev, cur in zip(sessions, sessions[1:]):
        if prev.assets != cur.assets:
            raise DataError(f"{path}: asset set changes between {prev.date} "
                            f"and {cur.date}")
        gap = np.abs(cur.caps[:, 0] - prev.caps[:, -1])
        scale = np.maximum(np.abs(prev.caps[:, -1]), 1e-300)
        if np.any(gap / scale > 1e-9):
            raise DataError(f"{path}: {cur.date} does not open at the "
                            f"{prev.date} close")
    if prior_close is not None and sessions:
        first = sessions[0]
        for i, asset in enumerate(first.assets):
            if asset not in prior_close:
                raise DataError(f"{path}: no prior close for {asset}")
            ref = prior_close[asset]
            if abs(first.caps[i, 0] - ref) / max(abs(ref), 1e-300) > 1e-9:
                raise DataError(f"{path}: {first.date} does not open at the "
                                f"given prior close for {asset}")
    return sessions


# ---------------------------------------------------------------------------
# universe selection
# ---------------------------------------------------------------------------

def select_universe(panel: MarketPanel, as_of, n: int) -> UniverseSelection:
    """Top-n assets by cap at as_of, restricted to names with a defined
    next-day return.  Ties go to the lower asset identifier."""
    if n < 1:
        raise ConfigError("universe size must be at least 1")
    t = panel.date_index(as_of)
    if t >= len(panel.dates) - 1:
        raise DataError(f"as_of {panel.dates[t]} has no next day in the panel")
    eligible = panel.alive[:, t] & np.isfinite(panel.returns[:, t + 1])
    idx = np.nonzero(eligible)[0]
    if len(idx) == 0:
        raise DataError(f"no eligible assets at {panel.dates[t]}")
    if len(idx) < n:
        warnings.warn(f"only {len(idx)} assets eligible at {panel.dates[t]}, "
                      f"requested {n}", UniverseWarning, stacklevel=2)
        n = len(idx)
    caps = panel.caps[idx, t]
    id_rank = np.empty(len(panel.assets), dtype=int)
    id_rank[np.argsort(np.array(panel.assets))] = np.arange(len(panel.assets))
    order = np.lexsort((id_rank[idx], -caps))
    chosen = idx[order][:n]
    return UniverseSelection(as_of=panel.dates[t],
                             assets=[panel.assets[i] for i in chosen])
