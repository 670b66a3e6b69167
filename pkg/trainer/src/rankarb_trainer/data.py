"""Trajectory training sets exchanged with the backtesting engine.

The file format is JSONL: a header record {"schema": "trajectories",
"version": 1} followed by one record per date,

    {"date": ..., "space": "name"|"rank", "assets": [...], "L": int,
     "x": [[...]], "r_next": [...], "phi": [[...]]}

where "x" is the (N, L) block of cumulative residual trajectories,
"r_next" the next-day excess return per asset, and "phi" the residual
projector restricted to the record's assets.  The last two are optional
per record; training needs both, emission needs neither.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

SCHEMA_NAME = "trajectories"
SCHEMA_VERSION = 1
SPACES = ("name", "rank")


@dataclass
class TrajectoryRecord:
    """One date's trajectories plus optional training extras."""

    date: str
    space: str
    assets: list[str]
    x: np.ndarray                        # (N, L)
    r_next: Optional[np.ndarray] = None  # (N,)
    phi: Optional[np.ndarray] = None     # (N, N)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        n = len(self.assets)
        if self.x.ndim != 2 or self.x.shape[0] != n:
            raise DataError(f"{self.date}: x shape {self.x.shape} does not "
                            f"match {n} assets")
        if self.r_next is not None:
            self.r_next = np.asarray(self.r_next, dtype=float)
            if self.r_next.shape != (n,):
                raise DataError(f"{self.date}: r_next length mismatch")
        if self.phi is not None:
            self.phi = np.asarray(self.phi, dtype=float)
            if self.phi.shape != (n, n):
                raise DataError(f"{self.date}: phi shape {self.phi.shape} "
                                f"does not match {n} assets")

    @property
    def window(self) -> int:
        return self.x.shape[1]

    @property
    def trainable(self) -> bool:
        return self.r_next is not None and self.phi is not None


@dataclass
class TrainingSet:
    """Date-sorted trajectory records sharing one window length."""

    records: list[TrajectoryRecord] = field(default_factory=list)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.date)
        windows = {r.window for r in self.records}
        if len(windows) > 1:
            raise DataError(f"mixed window lengths {sorted(windows)}")

    @property
    def window(self) -> int:
        if not self.records:
            raise DataError("empty training set has no window length")
        return self.records[0].window

    @property
    def dates(self) -> list[str]:
        return [r.date for r in self.records]

    def before(self, date: str) -> list[TrajectoryRecord]:
        return [r for r in self.records if r.date < date]

    def since(self, date: str) -> list[TrajectoryRecord]:
        return [r for r in self.records if r.date >= date]


def load_trajectories(path) -> TrainingSet:
    """Read a trajectory JSONL file, validating every record.

    Malformed lines raise DataError naming the line; a missing or foreign
    schema header rejects the whole file.
    """
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise DataError(f"{path}: empty file, expected a header record")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: bad header: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema") != SCHEMA_NAME:
        raise DataError(f"{path}:1: unexpected schema "
                        f"{header.get('schema') if isinstance(header, dict) else None!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        missing = [k for k in ("date", "space", "assets", "L", "x")
                   if k not in raw]
        if missing:
            raise DataError(f"{path}:{lineno}: missing fields {missing}")
        if raw["space"] not in SPACES:
            raise DataError(f"{path}:{lineno}: bad space {raw['space']!r}")
        x = np.asarray(raw["x"], dtype=float)
        n, l = len(raw["assets"]), int(raw["L"])
        if x.shape != (n, l):
            raise DataError(f"{path}:{lineno}: x shape {x.shape} does not "
                            f"match {n} assets and L={l}")
        arrays = {"x": x}
        for key, shape in (("r_next", (n,)), ("phi", (n, n))):
            if key not in raw:
                arrays[key] = None
                continue
            a = np.asarray(raw[key], dtype=float)
            if a.shape != shape:
                raise DataError(f"{path}:{lineno}: {key} shape {a.shape} "
                                f"does not match {n} assets")
            arrays[key] = a
        for key, a in arrays.items():
            if a is not None and not np.all(np.isfinite(a)):
                raise DataError(f"{path}:{lineno}: non-finite {key}")
        records.append(TrajectoryRecord(date=str(raw["date"]),
                                        space=raw["space"],
                                        assets=[str(a) for a in raw["assets"]],
                                        x=arrays["x"], r_next=arrays["r_next"],
                                        phi=arrays["phi"]))
    return TrainingSet(records=records)


def write_trajectories(records: Sequence[TrajectoryRecord], path,
                       config_hash: Optional[str] = None):
    """Write records in the trajectory JSONL schema (header first)."""
    with open(path, "w") as fh:
        header: dict = {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION}
        if config_hash:
            header["config_hash"] = config_hash
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            raw: dict = {"date": rec.date, "space": rec.space,
                         "assets": list(rec.assets),
                         "L": int(rec.window), "x": rec.x.tolist()}
            if rec.r_next is not None:
                raw["r_next"] = rec.r_next.tolist()
            if rec.phi is not None:
                raw["phi"] = rec.phi.tolist()
            fh.write(json.dumps(raw) + "\n")
