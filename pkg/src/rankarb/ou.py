"""AR(1)-based Ornstein-Uhlenbeck fits and the threshold trading rule.

A cumulative-residual path x_1..x_L is regressed as x_a = a + b x_{a-1} + xi.
With 0 < b < 1 the discrete fit maps to OU parameters at 252 trading days
per year:

    kappa = -ln(b) * 252          mean-reversion speed, 1/year
    m     = a / (1 - b)           equilibrium level
    sigma = sqrt(Var(xi) / (1 - b^2))   equilibrium standard deviation

tau_days = 252 / kappa is the e-folding time in trading days.  Fits with b
outside (0, 1) carry no OU interpretation and are flagged; their kappa, tau,
m and sigma stay NaN.  The dimensionless deviation s = (x_L - m) / sigma
drives the position rule:

    flat  -> short when s > open_threshold, long when s < -open_threshold,
             both only while tau_days < tau_max_days
    long  -> stays long while s < -close_threshold
    short -> stays short while s > +close_threshold
    otherwise flat; undefined signals and slow fits always force flat.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DataError, DegeneracyError

TRADING_DAYS = 252.0
OPEN_THRESHOLD = 1.25
CLOSE_THRESHOLD = 0.5
TAU_MAX_DAYS = 30.0


@dataclass
class OUFit:
    a: float
    b: float
    kappa: float               # 1/year, NaN when not mean-reverting
    tau_days: float            # e-folding time, NaN when not mean-reverting
    m: float                   # equilibrium level, NaN when not mean-reverting
    sigma: float               # equilibrium std, NaN when not mean-reverting
    resid_var: float
    r2: float
    mean_reverting: bool


@dataclass
class PositionState:
    """Residual-space book: +1, -1 per asset; flat assets are absent."""

    weights: dict = field(default_factory=dict)    # asset -> +1 | -1
    opened_at: dict = field(default_factory=dict)  # asset -> date string

    def weight(self, asset) -> int:
        return self.weights.get(asset, 0)


def fit_ou(x: np.ndarray) -> OUFit:
    """Fit the lag-1 regression of a trajectory row and map to OU terms."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise DataError("OU fit needs a 1-D path of at least 3 points")
    if not np.all(np.isfinite(x)):
        raise DataError("OU fit path contains non-finite values")
    lag, cur = x[:-1], x[1:]
    var_lag = lag.var()
    if var_lag == 0.0:
        raise DegeneracyError("constant regressor: OU fit undefined")
    b = float(np.cov(lag, cur, bias=True)[0, 1] / var_lag)
    a = float(cur.mean() - b * lag.mean())
    resid = cur - (a + b * lag)
    resid_var = float(resid.var())
    var_cur = cur.var()
    # an exact linear path leaves only rounding crumbs in the residuals;
    # clamp those to zero so sigma is 0 and no signal is emitted
    if resid_var < var_cur * 1e-28:
        resid_var = 0.0
    r2 = 1.0 - resid_var / var_cur if var_cur > 0 else 0.0
    mean_reverting = 0.0 < b < 1.0
    if mean_reverting:
        kappa = -np.log(b) * TRADING_DAYS
        tau_days = TRADING_DAYS / kappa
        m = a / (1.0 - b)
        sigma = float(np.sqrt(resid_var / (1.0 - b * b)))
    else:
        kappa = tau_days = m = sigma = float("nan")
    return OUFit(a=a, b=b, kappa=float(kappa), tau_days=float(tau_days),
                 m=float(m), sigma=float(sigma), resid_var=resid_var,
                 r2=float(r2), mean_reverting=mean_reverting)


def signal(fit: OUFit, x_terminal: float) -> float:
    """Deviation s = (x_L - m) / sigma; NaN when the fit supports no signal."""
    if not fit.mean_reverting or not np.isfinite(fit.sigma) or fit.sigma <= 0:
        return float("nan")
    return (float(x_terminal) - fit.m) / fit.sigma


def _next_weight(prev: int, s: float, tau: float, open_threshold: float,
                 close_threshold: float, tau_max: float) -> int:
    if not np.isfinite(s) or not np.isfinite(tau) or tau >= tau_max:
        return 0
    if prev == 0:
        if s > open_threshold:
            return -1
        if s < -open_threshold:
            return 1
        return 0
    if prev > 0:
        return 1 if s < -close_threshold else 0
    return -1 if s > close_threshold else 0


def update_positions(prev: PositionState, signals: Mapping, fits: Mapping,
                     as_of, open_threshold: float = OPEN_THRESHOLD,
                     close_threshold: float = CLOSE_THRESHOLD,
                     tau_max_days: float = TAU_MAX_DAYS) -> PositionState:
    """Advance the book one day.  signals and fits are keyed by asset and
    define today's universe; positions on assets outside it are dropped."""
    weights = {}
    opened = {}
    for asset, s in signals.items():
        fit = fits.get(asset)
        if fit is None:
            raise DataError(f"no fit supplied for {asset}")
        tau = fit.tau_days if fit.mean_reverting else float("nan")
        w = _next_weight(prev.weight(asset), s, tau,
                         open_threshold, close_threshold, tau_max_days)
        if w != 0:
            weights[asset] = w
            if prev.weight(asset) == w and asset in prev.opened_at:
                opened[asset] = prev.opened_at[asset]
            else:
                opened[asset] = str(as_of)
    return PositionState(weights=weights, opened_at=opened)


def strategy_weights(model, state: PositionState):
    """(equity weights over model.universe, flat flag).

    The residual book is projected through the model and scaled to unit l1
    norm; an empty book returns zeros with the flag set.
    """
    from .factors import project_and_normalize
    w_eps = np.array([float(state.weight(a)) for a in model.universe])
    return project_and_normalize(model.phi, w_eps)


def write_fit_table(rows, path, config_hash: Optional[str] = None):
    """CSV of fits: date,asset,a,b,kappa,tau_days,m,sigma,r2,flag.

    rows are (date, asset, OUFit); flag is 1 for mean-reverting fits, 0 for
    flagged ones (whose OU columns are left empty).
    """
    def cell(v):
        return repr(float(v)) if np.isfinite(v) else ""

    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "asset", "a", "b", "kappa", "tau_days",
                         "m", "sigma", "r2", "flag"])
        for date, asset, fit in rows:
            writer.writerow([str(date), asset, cell(fit.a), cell(fit.b),
                             cell(fit.kappa), cell(fit.tau_days),
                             cell(fit.m), cell(fit.sigma), cell(fit.r2),
                             int(fit.mean_reverting)])
