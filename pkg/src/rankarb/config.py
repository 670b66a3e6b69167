"""Flat key-value run configuration.

Files hold one `key = value` pair per line; blank lines and lines starting
with '#' are skipped.  Every key must be known.  Command-line overrides win
over the file, the file wins over defaults, and the config hash is taken
over the fully merged mapping so every output can state exactly which
settings produced it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ConfigError

DEFAULTS = {
    # synthetic market
    "seed": "0",
    "n_assets": "20",
    "n_days": "420",
    "minutes_per_day": "390",
    "atlas_drift": "0.02",
    "atlas_vol": "0.02",
    "common_loading": "0.0",
    "risk_free_rate": "0.0",
    "start_date": "2020-01-02",
    "init_cap_top": "1e9",
    "init_cap_step": "0.5",
    # data files (empty -> simulate in memory)
    "daily_csv": "",
    "intraday_csv": "",
    "risk_free_csv": "",
    # decomposition
    "space": "name",
    "universe_size": "10",
    "lookback_factors": "252",
    "lookback_loadings": "60",
    "traj_window": "60",
    "k_name": "5",
    "k_rank": "1",
    # strategy
    "open_threshold": "1.25",
    "close_threshold": "0.5",
    "tau_max_days": "30",
    # execution and accounting
    "eta": "0.0002",
    "leverage": "1.0",
    "rebalance_interval": "225",
    # diagnostics
    "crossing_delta": "0.001",
    "value_bin": "0.1",
    "value_lo": "-4.0",
    "value_hi": "4.0",
    "tau_bin": "1.0",
    "tau_hist_upper": "60",
    "pair_stride": "25",
    "sharpe_excess": "true",
    # sweeps
    "eta_sweep": "0.0,0.0002,0.0005",
    "interval_sweep": "5,30,195",
    # bridge
    "weights_jsonl": "",
    "with_returns": "true",
    "with_phi": "true",
    # output
    "output_dir": "out",
}


@dataclass
class Config:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    @classmethod
    def from_file(cls, path) -> "Config":
        cfg = cls()
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                if "=" not in text:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, value = text.partition("=")
                key = key.strip()
                if key not in DEFAULTS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                cfg.values[key] = value.strip()
        return cfg

    def override(self, updates: dict) -> "Config":
        merged = dict(self.values)
        for key, value in updates.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = str(value)
        return Config(values=merged)

    def hash(self) -> str:
        text = "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    # typed getters ---------------------------------------------------------

    def get_str(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def get_int(self, key: str) -> int:
        raw = self.get_str(key)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc

    def get_float(self, key: str) -> float:
        raw = self.get_str(key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from exc

    def get_bool(self, key: str) -> bool:
        raw = self.get_str(key).lower()
        if raw in ("true", "1", "yes", "on"):
            return True
        if raw in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {raw!r}")

    def get_float_list(self, key: str) -> list[float]:
        raw = self.get_str(key)
        if not raw.strip():
            return []
        try:
            return [float(p) for p in raw.split(",")]
        except ValueError as exc:
            raise ConfigError(f"{key} must be comma-separated numbers, "
                              f"got {raw!r}") from exc

    def get_int_list(self, key: str) -> list[int]:
        return [int(v) for v in self.get_float_list(key)]
