"""Cumulative residual trajectories and their JSONL training-set format.

A trajectory at date t collects the running sums of the last L daily
residual returns per asset.  The normalized variant divides the sum at step
alpha by sigma_hat * sqrt(alpha), where sigma_hat is the per-asset sample
std of the residuals over the window; under iid residuals each normalized
coordinate is approximately standard normal, which is what the calibration
diagnostics exploit.

JSONL layout: first line is a header record {"schema": "trajectories",
"version": 1}, then one record per (date, space):
    {"date": ..., "space": "name"|"rank", "assets": [...], "L": 60,
     "x": [[...]]}
Records may carry optional training-only fields "r_next" (next-day excess
returns) and "phi" (that day's projector, row-major); both are ignored by
consumers that do not need them.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError

SCHEMA_NAME = "trajectories"
SCHEMA_VERSION = 1
SIGMA_FLOOR = 1e-12


class ExclusionWarning(UserWarning):
    """An asset was dropped from a normalized trajectory."""


@dataclass
class CumulativeTrajectory:
    """Running residual sums over the lookback window, one row per asset."""

    as_of: str
    L: int
    assets: list[str]
    values: np.ndarray         # (N, L)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.assets), self.L):
            raise DataError("trajectory shape does not match assets and L")


@dataclass
class NormalizedTrajectory:
    """Variance-normalized running sums; excluded lists dropped assets."""

    as_of: str
    L: int
    assets: list[str]
    values: np.ndarray         # (N_kept, L)
    excluded: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.assets), self.L):
            raise DataError("trajectory shape does not match assets and L")


def cumulative_residuals(eps_window: np.ndarray, assets: Sequence[str],
                         as_of) -> CumulativeTrajectory:
    """Prefix sums along the window axis of an (N, L) residual block."""
    eps = np.asarray(eps_window, dtype=float)
    if eps.ndim != 2 or eps.shape[1] < 2:
        raise DataError("residual window must be (N, L) with L >= 2")
    if not np.all(np.isfinite(eps)):
        raise DataError("residual window contains non-finite entries")
    if eps.shape[0] != len(assets):
        raise DataError("asset list does not match residual window")
    return CumulativeTrajectory(as_of=str(as_of), L=eps.shape[1],
                                assets=list(assets),
                                values=np.cumsum(eps, axis=1))


def normalize_cumulative(traj: CumulativeTrajectory,
                         eps_window: np.ndarray) -> NormalizedTrajectory:
    """Scale each running sum by sigma_hat * sqrt(step count).

    sigma_hat is the per-asset std of the window residuals with one degree
    of freedom removed.  Assets whose sigma_hat collapses below 1e-12 are
    excluded with a warning rather than emitted as infinities.
    """
    eps = np.asarray(eps_window, dtype=float)
    if eps.shape != traj.values.shape:
        raise DataError("residual window does not match trajectory shape")
    sigma = eps.std(axis=1, ddof=1)
    keep = sigma > SIGMA_FLOOR
    dropped = [a for a, k in zip(traj.assets, keep) if not k]
    if dropped:
        warnings.warn(f"excluding {len(dropped)} zero-variance asset(s) "
                      f"at {traj.as_of}: {dropped[:5]}",
                      ExclusionWarning, stacklevel=2)
    steps = np.sqrt(np.arange(1, traj.L + 1))
    values = traj.values[keep] / (sigma[keep, None] * steps[None, :])
    return NormalizedTrajectory(as_of=traj.as_of, L=traj.L,
                                assets=[a for a, k in zip(traj.assets, keep) if k],
                                values=values, excluded=dropped)


# ---------------------------------------------------------------------------
# JSONL training sets
# ---------------------------------------------------------------------------

def export_training_set(trajectories: Sequence, path, space: str = "name",
                        r_next: Optional[Mapping[str, np.ndarray]] = None,
                        phi: Optional[Mapping[str, np.ndarray]] = None,
                        config_hash: Optional[str] = None):
    """Write trajectories as JSONL, one record per date.

    r_next and phi, when given, are keyed by the trajectory's as_of string
    and attach the optional training-only fields.  An empty sequence still
    produces the header record.
    """
    if space not in ("name", "rank"):
        raise DataError(f"space must be 'name' or 'rank', got {space!r}")
    with open(path, "w") as fh:
        header = {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION}
        if config_hash:
            header["config_hash"] = config_hash
        fh.write(json.dumps(header) + "\n")
        for traj in trajectories:
            record = {
                "date": str(traj.as_of),
                "space": space,
                "assets": list(traj.assets),
                "L": int(traj.L),
                "x": traj.values.tolist(),
            }
            if r_next is not None and traj.as_of in r_next:
                record["r_next"] = np.asarray(r_next[traj.as_of],
                                              dtype=float).tolist()
            if phi is not None and traj.as_of in phi:
                record["phi"] = np.asarray(phi[traj.as_of],
                                           dtype=float).tolist()
            fh.write(json.dumps(record) + "\n")


def load_training_set(path) -> list[dict]:
    """Read a trajectory JSONL file back into validated records.

    Each record gets numpy arrays under "x" (and "r_next"/"phi" when
    present).  Malformed lines raise DataError naming the line.
    """
    records = []
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise DataError(f"{path}: empty file, expected a header record")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: bad header: {exc}") from exc
    if header.get("schema") != SCHEMA_NAME:
        raise DataError(f"{path}:1: unexpected schema {header.get('schema')!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        for key in ("date", "space", "assets", "L", "x"):
            if key not in rec:
                raise DataError(f"{path}:{lineno}: missing field {key!r}")
        if rec["space"] not in ("name", "rank"):
            raise DataError(f"{path}:{lineno}: bad space {rec['space']!r}")
        x = np.asarray(rec["x"], dtype=float)
        n, l = len(rec["assets"]), int(rec["L"])
        if x.shape != (n, l):
            raise DataError(f"{path}:{lineno}: x shape {x.shape} does not "
                            f"match {n} assets and L={l}")
        if not np.all(np.isfinite(x)):
            raise DataError(f"{path}:{lineno}: non-finite trajectory values")
        rec["x"] = x
        if "r_next" in rec:
            r = np.asarray(rec["r_next"], dtype=float)
            if r.shape != (n,):
                raise DataError(f"{path}:{lineno}: r_next length mismatch")
            rec["r_next"] = r
        if "phi" in rec:
            p = np.asarray(rec["phi"], dtype=float)
            if p.shape != (n, n):
                raise DataError(f"{path}:{lineno}: phi shape mismatch")
            rec["phi"] = p
        records.append(rec)
    return records
