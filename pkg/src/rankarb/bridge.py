"""Residual-weight streams exchanged with external weight generators.

The stream is JSONL: an optional header record {"schema": "weight-stream",
"version": 1} followed by one record per date:

    {"date": ..., "space": "name"|"rank", "assets": [...], "w_eps": [...]}

Import is tolerant: malformed records are collected with their line number
and reason while the rest of the stream loads.  Consumption is strict: a
record can only drive the backtest on a date whose engine universe matches
its asset list exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .factors import project_and_normalize

SCHEMA_NAME = "weight-stream"
SCHEMA_VERSION = 1


@dataclass
class WeightRecord:
    date: str
    space: str
    assets: list[str]
    w_eps: np.ndarray

    def __post_init__(self):
        self.w_eps = np.asarray(self.w_eps, dtype=float)
        if self.w_eps.shape != (len(self.assets),):
            raise DataError("w_eps length does not match assets")


@dataclass
class WeightStream:
    records: list = field(default_factory=list)
    rejected: list = field(default_factory=list)   # (lineno, reason)

    def by_date(self) -> dict:
        return {rec.date: rec for rec in self.records}


def import_weight_stream(path) -> WeightStream:
    """Load and validate a JSONL weight stream.

    Structural problems reject individual records (with line numbers and
    reasons) instead of aborting the load.  Duplicate (date, space) keys
    reject the later record.
    """
    stream = WeightStream()
    seen = set()
    with open(path) as fh:
        lines = fh.readlines()
    start = 0
    if lines:
        try:
            probe = json.loads(lines[0])
            if isinstance(probe, dict) and "schema" in probe:
                if probe.get("schema") != SCHEMA_NAME:
                    raise DataError(f"{path}:1: unexpected schema "
                                    f"{probe.get('schema')!r}")
                start = 1
        except json.JSONDecodeError:
            pass                      # first line handled as a record below
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            stream.rejected.append((lineno, f"bad JSON: {exc}"))
            continue
        missing = [k for k in ("date", "space", "assets", "w_eps")
                   if k not in raw]
        if missing:
            stream.rejected.append((lineno, f"missing fields {missing}"))
            continue
        if raw["space"] not in ("name", "rank"):
            stream.rejected.append((lineno, f"bad space {raw['space']!r}"))
            continue
        assets = raw["assets"]
        w = np.asarray(raw["w_eps"], dtype=float)
        if not isinstance(assets, list) or w.shape != (len(assets),):
            stream.rejected.append(
                (lineno, f"w_eps length {w.shape} does not match "
                         f"{len(assets)} assets"))
            continue
        if not np.all(np.isfinite(w)):
            stream.rejected.append((lineno, "non-finite weights"))
            continue
        key = (raw["date"], raw["space"])
        if key in seen:
            stream.rejected.append((lineno, f"duplicate record for {key}"))
            continue
        seen.add(key)
        stream.records.append(WeightRecord(date=str(raw["date"]),
                                           space=raw["space"],
                                           assets=list(assets), w_eps=w))
    return stream


def export_weight_stream(records: Sequence[WeightRecord], path,
                         config_hash: Optional[str] = None):
    with open(path, "w") as fh:
        header = {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION}
        if config_hash:
            header["config_hash"] = config_hash
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(json.dumps({"date": rec.date, "space": rec.space,
                                 "assets": list(rec.assets),
                                 "w_eps": rec.w_eps.tolist()}) + "\n")


def record_weights(record: WeightRecord, universe: Sequence[str]) -> np.ndarray:
    """Strict universe check before the engine consumes a record."""
    if list(universe) != list(record.assets):
        raise DataError(f"record for {record.date} lists "
                        f"{len(record.assets)} assets that do not match the "
                        f"engine universe of {len(universe)}")
    return record.w_eps


def nn_equity_weights(phi: np.ndarray, w_eps: np.ndarray):
    """Externally supplied residual book -> unit-l1 equity book.

    Returns (weights, flat flag); degenerate books flag the day flat
    instead of dividing by a vanishing norm.
    """
    return project_and_normalize(phi, w_eps)
