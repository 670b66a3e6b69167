"""Shared builders: synthetic trajectory records and engine-CLI helpers."""

from __future__ import annotations

import csv
import io
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from rankarb_trainer import TrajectoryRecord

ENGINE = shutil.which("rankarb")

needs_engine = pytest.mark.skipif(ENGINE is None,
                                  reason="engine CLI not installed")


def _dates(count: int, start: str = "2020-01-01") -> list[str]:
    base = np.datetime64(start)
    return [str(base + np.timedelta64(d, "D")) for d in range(count)]


def ou_records(n_assets: int, n_dates: int, window: int, b: float,
               sigma_u: float, seed: int, space: str = "name") -> list:
    """Records whose residual levels follow an AR(1): mean-reverting.

    The per-date trajectory x is the running sum of level increments over
    the trailing window, r_next the next increment, phi the identity.
    """
    rng = np.random.default_rng(seed)
    total = n_dates + window + 1
    innov = rng.standard_normal((n_assets, total)) * sigma_u * np.sqrt(1 - b * b)
    u = np.zeros((n_assets, total))
    u[:, 0] = rng.standard_normal(n_assets) * sigma_u
    for t in range(1, total):
        u[:, t] = b * u[:, t - 1] + innov[:, t]
    eps = np.diff(u, axis=1)
    return _records_from_eps(eps, n_dates, window, space)


def rw_records(n_assets: int, n_dates: int, window: int, sigma: float,
               seed: int, space: str = "name") -> list:
    """Records with iid increments: no signal links x to r_next."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n_assets, n_dates + window)) * sigma
    return _records_from_eps(eps, n_dates, window, space)


def _records_from_eps(eps: np.ndarray, n_dates: int, window: int,
                      space: str) -> list:
    n_assets = eps.shape[0]
    assets = [f"a{i:03d}" for i in range(n_assets)]
    phi = np.eye(n_assets)
    recs = []
    for d, date in enumerate(_dates(n_dates)):
        win = eps[:, d: d + window]
        recs.append(TrajectoryRecord(date=date, space=space, assets=assets,
                                     x=np.cumsum(win, axis=1),
                                     r_next=eps[:, d + window],
                                     phi=phi.copy()))
    return recs


def write_ou_market(path: Path, n_assets: int, n_days: int, seed: int,
                    b: float | None = None, sigma_u: float = 0.02,
                    sigma_m: float = 0.01) -> None:
    """Daily panel CSV whose log-caps carry a common walk plus AR(1) noise."""
    if b is None:
        b = float(np.exp(-1 / 2.5))
    rng = np.random.default_rng(seed)
    m = np.concatenate([[0.0],
                        np.cumsum(rng.standard_normal(n_days - 1) * sigma_m)])
    innov = rng.standard_normal((n_assets, n_days)) * sigma_u * np.sqrt(1 - b * b)
    u = np.zeros((n_assets, n_days))
    u[:, 0] = rng.standard_normal(n_assets) * sigma_u
    for t in range(1, n_days):
        u[:, t] = b * u[:, t - 1] + innov[:, t]
    base = 1e9 * 0.85 ** np.arange(n_assets)
    caps = base[:, None] * np.exp(m[None, :] + u)
    dates = np.datetime_as_string(np.busday_offset("2018-01-02",
                                                   np.arange(n_days),
                                                   roll="forward"))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["date", "asset", "cap", "return"])
    for t in range(n_days):
        for i in range(n_assets):
            ret = "" if t == 0 else repr(float(caps[i, t] / caps[i, t - 1] - 1))
            writer.writerow([dates[t], f"a{i:03d}",
                             repr(float(caps[i, t])), ret])
    path.write_text(buf.getvalue())


def engine(*args: str) -> subprocess.CompletedProcess:
    """Run the engine CLI, asserting success."""
    assert ENGINE is not None
    res = subprocess.run([ENGINE, *args], capture_output=True, text=True)
    assert res.returncode == 0, f"rankarb {args} failed:\n{res.stderr}"
    return res


def engine_settings(outdir: Path, daily: Path, n_assets: int) -> list[str]:
    """Config overrides shared by export and replay runs on one market."""
    pairs = {"daily_csv": daily, "output_dir": outdir,
             "universe_size": n_assets, "lookback_factors": 60,
             "lookback_loadings": 30, "traj_window": 30, "k_name": 1,
             "space": "name"}
    out = []
    for key, value in pairs.items():
        out.extend(["--set", f"{key}={value}"])
    return out
