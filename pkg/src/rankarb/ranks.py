"""Rank-space views of a market: permutations, rank returns, crossing times.

Rank k on a given day means the k-th largest capitalization that day (1 is
the largest); the asset occupying a rank changes over time.  Ties are broken
toward the lower asset identifier so the permutation is always well defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .market import IntradayPanel, MarketPanel


@dataclass
class RankPermutation:
    """Bijection between ranks 1..N and asset identifiers at one snapshot."""

    rank_of: dict      # asset -> rank (1-based)
    name_at: dict      # rank -> asset

    def __post_init__(self):
        if len(self.rank_of) != len(self.name_at):
            raise DataError("rank permutation is not a bijection")
        for asset, rank in self.rank_of.items():
            if self.name_at.get(rank) != asset:
                raise DataError("rank_of and name_at disagree")


@dataclass
class CrossingRecord:
    """Local-time profile of one asset pair over a span of sessions.

    local_time[j] counts contributing minutes up to and including global
    minute j (minute counter runs across the whole span; the duplicated
    boundary minute between chained sessions is counted once).  gaps holds
    the minute spacing between successive contributing minutes.
    """

    pair: tuple
    local_time: np.ndarray     # (total_minutes,) int
    gaps: np.ndarray           # (n_contributions - 1,) int
    delta: float


def rank_order(caps: np.ndarray, id_rank: np.ndarray) -> np.ndarray:
    """Asset indices in rank order: descending cap, ties by ascending id rank."""
    return np.lexsort((id_rank, -caps))


def identifier_rank(assets: Sequence[str]) -> np.ndarray:
    """Position of each asset in the sorted identifier order."""
    out = np.empty(len(assets), dtype=int)
    out[np.argsort(np.array(assets))] = np.arange(len(assets))
    return out


def compute_ranks(caps: Mapping[str, float]) -> RankPermutation:
    """Rank a capitalization snapshot; rank 1 is the largest cap."""
    if not caps:
        raise DataError("cannot rank an empty snapshot")
    items = list(caps.items())
    for asset, cap in items:
        if not np.isfinite(cap) or cap <= 0:
            raise DataError(f"cap for {asset} must be finite and positive")
    items.sort(key=lambda kv: (-kv[1], kv[0]))
    rank_of = {asset: k + 1 for k, (asset, _) in enumerate(items)}
    name_at = {k + 1: asset for k, (asset, _) in enumerate(items)}
    return RankPermutation(rank_of=rank_of, name_at=name_at)


def rank_returns(panel: MarketPanel, date) -> np.ndarray:
    """Per-rank return into `date`: k-th largest cap today over k-th largest
    cap yesterday, minus one, each day sorted independently.

    Only assets alive on both days participate.
    """
    t = panel.date_index(date)
    if t == 0:
        raise DataError("first panel date has no prior day")
    alive = panel.alive[:, t] & panel.alive[:, t - 1]
    if not np.any(alive):
        raise DataError(f"no assets alive across {panel.dates[t-1]} -> {panel.dates[t]}")
    today = np.sort(panel.caps[alive, t])[::-1]
    prior = np.sort(panel.caps[alive, t - 1])[::-1]
    return today / prior - 1.0


def rank_return_series(caps: np.ndarray) -> np.ndarray:
    """Dense version: (N, T+1) caps -> (N, T) per-rank returns."""
    caps = np.asarray(caps, dtype=float)
    if not np.all(np.isfinite(caps)) or np.any(caps <= 0):
        raise DataError("rank return series needs a dense positive cap matrix")
    sorted_caps = np.sort(caps, axis=0)[::-1]
    return sorted_caps[:, 1:] / sorted_caps[:, :-1] - 1.0


def local_crossing_time(sessions: Sequence[IntradayPanel], pair: tuple,
                        delta: float = 1e-3) -> CrossingRecord:
    """Minute-sampled local time at the crossing boundary of two assets.

    A minute contributes when |c1 - c2| <= delta * max(c1, c2).  Chained
    sessions share their boundary minute; the shared tick is counted once.
    """
    if delta <= 0:
        raise ConfigError("crossing tolerance delta must be positive")
    a, b = pair
    chunks = []
    for s_idx, sess in enumerate(sessions):
        try:
            i = sess.assets.index(a)
            j = sess.assets.index(b)
        except ValueError as exc:
            raise DataError(f"pair {pair} not present on {sess.date}") from exc
        c1, c2 = sess.caps[i], sess.caps[j]
        near = np.abs(c1 - c2) <= delta * np.maximum(c1, c2)
        # drop the duplicated boundary tick on every session after the first
        chunks.append(near[1:] if s_idx > 0 else near)
    if not chunks:
        raise DataError("no sessions supplied")
    near_all = np.concatenate(chunks)
    local_time = np.cumsum(near_all.astype(int))
    where = np.nonzero(near_all)[0]
    gaps = np.diff(where) if len(where) > 1 else np.array([], dtype=int)
    return CrossingRecord(pair=(a, b), local_time=local_time, gaps=gaps,
                          delta=delta)


def write_crossing_csv(records: Sequence[CrossingRecord], path,
                       config_hash: str | None = None):
    """One row per gap between successive contributing minutes."""
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["pair", "minute", "lambda_gap"])
        for rec in records:
            where = np.nonzero(np.diff(rec.local_time, prepend=0))[0]
            label = f"{rec.pair[0]}|{rec.pair[1]}"
            for minute, gap in zip(where[1:], rec.gaps):
                writer.writerow([label, int(minute), int(gap)])
