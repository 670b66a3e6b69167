"""Shared fixtures and synthetic-market builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from rankarb.config import Config
from rankarb.market import IntradayPanel, MarketPanel, business_days, panel_from_returns


def simulate_ar1(a: float, b: float, noise_std: float, length: int, rng: np.random.Generator, x0: float | None = None) -> np.ndarray:
    """Reference AR(1) simulator: x_i = a + b*x_{i-1} + noise."""
    x = np.empty(length)
    if x0 is None:
        # start at the stationary mean with stationary dispersion when possible
        if 0.0 < b < 1.0:
            mean = a / (1.0 - b)
            std = noise_std / np.sqrt(1.0 - b * b)
        else:
            mean, std = 0.0, noise_std
        x[0] = mean + std * rng.standard_normal()
    else:
        x[0] = x0
    shocks = noise_std * rng.standard_normal(length - 1)
    for i in range(1, length):
        x[i] = a + b * x[i - 1] + shocks[i - 1]
    return x


def simulate_ou_level(kappa: float, m: float, sigma_eq: float, length: int, rng: np.random.Generator) -> np.ndarray:
    """OU level path sampled daily: AR(1) with b = exp(-kappa/252)."""
    b = np.exp(-kappa / 252.0)
    a = m * (1.0 - b)
    noise_std = sigma_eq * np.sqrt(1.0 - b * b)
    return simulate_ar1(a, b, noise_std, length, rng)


def ou_factor_market(n_assets: int, n_days: int, kappa: float, sigma_eq: float, factor_vol: float, seed: int, rf: float = 0.0) -> MarketPanel:
    """One-factor market whose idiosyncratic part is the increment of an OU level.

    Initial caps are spaced by a factor of 3 so capitalization ranks never
    change over realistic horizons: rank instruments then coincide with name
    instruments, which pins down the residual dynamics in both spaces.
    """
    rng = np.random.default_rng(seed)
    levels = np.stack([simulate_ou_level(kappa, 0.0, sigma_eq, n_days + 1, rng) for _ in range(n_assets)])
    factor = factor_vol * rng.standard_normal(n_days)
    returns = factor[None, :] + np.diff(levels, axis=1)
    init = 1e9 * 3.0 ** -np.arange(n_assets)
    panel = panel_from_returns(returns, init_caps=init)
    if rf:
        panel.rf[:] = rf
    return panel


def geometric_sessions(panel: MarketPanel, minutes_per_day: int = 3) -> list[IntradayPanel]:
    """Intraday sessions interpolating caps geometrically between closes."""
    m = minutes_per_day
    expo = np.linspace(0.0, 1.0, m)
    sessions = []
    for t in range(panel.caps.shape[1] - 1):
        c0 = panel.caps[:, t]
        c1 = panel.caps[:, t + 1]
        caps = c0[:, None] * (c1 / c0)[:, None] ** expo[None, :]
        caps[:, 0] = c0
        caps[:, -1] = c1
        sessions.append(IntradayPanel(date=panel.dates[t + 1], minutes=list(range(1, m + 1)), assets=list(panel.assets), caps=caps))
    return sessions


def rank_order_static(panel: MarketPanel) -> bool:
    """True when the capitalization ordering never changes over the panel."""
    order0 = np.argsort(-panel.caps[:, 0])
    return all(np.array_equal(np.argsort(-panel.caps[:, t]), order0) for t in range(panel.caps.shape[1]))


def tiny_panel() -> MarketPanel:
    """Three assets, four days, hand-sized numbers for direct assertions."""
    dates = business_days("2021-01-04", 4)
    caps = np.array(
        [
            [10.0, 11.0, 9.9, 10.5],
            [5.0, 5.5, 6.0, 5.7],
            [2.0, 1.8, 2.1, 2.2],
        ]
    )
    returns = np.full_like(caps, np.nan)
    returns[:, 1:] = caps[:, 1:] / caps[:, :-1] - 1.0
    rf = np.zeros(4)
    return MarketPanel(dates=dates, assets=["AAA", "BBB", "CCC"], caps=caps, returns=returns, rf=rf)


@pytest.fixture
def small_cfg() -> Config:
    return Config().override(
        {
            "n_assets": 8,
            "universe_size": 6,
            "lookback_factors": 60,
            "lookback_loadings": 30,
            "traj_window": 30,
            "k_name": 1,
            "k_rank": 1,
            "eta": 0.0,
            "rebalance_interval": 2,
            "minutes_per_day": 3,
        }
    )
