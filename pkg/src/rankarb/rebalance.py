"""Intraday tracking of a rank-indexed book by a tradable name book.

The rank book holds dollars per rank slot and drifts with the k-th largest
cap each minute; the name book holds dollars per asset and drifts with that
asset's cap.  Whenever ranks swap between rebalance points the two books
diverge.  At every rebalance point the name book is traded back onto the
rank book under the current rank-to-name map, booking two costs against
cash:

    latency = sum(rank book) - sum(name book pre-trade)
    spread  = eta * sum(|target - pre-trade|)

latency is signed: it is the extra (or missing) mark-to-market the trader
must fund because the names were held through the swap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .market import IntradayPanel
from .ranks import identifier_rank, rank_order


@dataclass
class IntradayBook:
    """Paired rank/name dollar books plus their last-seen cap references."""

    assets: list[str]
    rank_weights: np.ndarray   # dollars per rank slot, slot 0 = largest cap
    name_weights: np.ndarray   # dollars per asset, aligned to assets
    rank_ref: np.ndarray       # sorted (descending) caps at last rank update
    name_ref: np.ndarray       # per-asset caps at last name update
    minute: int
    id_rank: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.id_rank is None:
            self.id_rank = identifier_rank(self.assets)
        n = len(self.assets)
        for name in ("rank_weights", "name_weights", "rank_ref", "name_ref"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DataError(f"{name} must have one entry per asset")
            setattr(self, name, arr)


@dataclass
class CostLedger:
    """Per-session cost bookkeeping."""

    date: object
    eta: float
    interval: int
    points: list = field(default_factory=list)   # (minute, latency, spread)
    divergence: np.ndarray = None                # |sum rank - sum name| per tick
    end_value: float = float("nan")              # sum of name book at close

    @property
    def total_latency(self) -> float:
        return float(sum(p[1] for p in self.points))

    @property
    def total_spread(self) -> float:
        return float(sum(p[2] for p in self.points))

    @property
    def total_cost(self) -> float:
        return self.total_latency + self.total_spread


def open_book(w_rank_open: np.ndarray, session: IntradayPanel) -> IntradayBook:
    """Assign the name book from the rank book at the session open.

    w_rank_open may cover only the top ranks; remaining slots are zero.
    The open uses minute 1 caps, i.e. the prior day's closing ranks.
    """
    n = len(session.assets)
    w = np.asarray(w_rank_open, dtype=float)
    if w.ndim != 1 or len(w) > n:
        raise DataError("rank weights exceed the session's asset count")
    rank_weights = np.zeros(n)
    rank_weights[:len(w)] = w
    caps0 = session.caps[:, 0]
    id_rank = identifier_rank(session.assets)
    order = rank_order(caps0, id_rank)
    name_weights = np.zeros(n)
    name_weights[order] = rank_weights
    return IntradayBook(assets=list(session.assets),
                        rank_weights=rank_weights, name_weights=name_weights,
                        rank_ref=caps0[order].copy(), name_ref=caps0.copy(),
                        minute=int(session.minutes[0]), id_rank=id_rank)


def _check_caps(book: IntradayBook, caps: np.ndarray) -> np.ndarray:
    caps = np.asarray(caps, dtype=float)
    if caps.shape != (len(book.assets),):
        raise DataError("minute caps do not match the book's asset axis")
    if not np.all(np.isfinite(caps)) or np.any(caps <= 0):
        raise DataError("minute caps must be finite and positive")
    return caps


def evolve_rank_weights(book: IntradayBook, caps: np.ndarray) -> IntradayBook:
    """Drift the rank book to new minute caps: slot k scales with the ratio
    of the k-th largest cap to its value at the book's reference minute."""
    caps = _check_caps(book, caps)
    sorted_caps = np.sort(caps)[::-1]
    book.rank_weights = book.rank_weights * (sorted_caps / book.rank_ref)
    book.rank_ref = sorted_caps
    return book


def evolve_name_weights(book: IntradayBook, caps: np.ndarray) -> IntradayBook:
    """Drift the name book: each asset's dollars scale with its own cap."""
    caps = _check_caps(book, caps)
    book.name_weights = book.name_weights * (caps / book.name_ref)
    book.name_ref = caps
    return book


def rebalance_step(book: IntradayBook, eta: float):
    """Trade the name book onto the rank book at the current minute.

    Returns (book, latency, spread).  The rank map is taken from the caps
    last seen by the name book; after the step the name book equals the
    rank book composed with that map, exactly.
    """
    if eta < 0:
        raise ConfigError("spread parameter eta must be non-negative")
    order = rank_order(book.name_ref, book.id_rank)
    target = np.zeros_like(book.name_weights)
    target[order] = book.rank_weights
    latency = float(book.rank_weights.sum() - book.name_weights.sum())
    spread = float(eta * np.abs(target - book.name_weights).sum())
    book.name_weights = target
    return book, latency, spread


def simulate_day(w_rank_open: np.ndarray, session: IntradayPanel,
                 interval: int, eta: float):
    """Run one session: open assignment, minute drift, periodic rebalances.

    Rebalance points sit every `interval` ticks after the open, and the last
    minute is always one.  Returns (IntradayBook, CostLedger).
    """
    if interval < 1:
        raise ConfigError("rebalance interval must be at least 1 minute")
    if eta < 0:
        raise ConfigError("spread parameter eta must be non-negative")
    m = len(session.minutes)
    book = open_book(w_rank_open, session)
    ledger = CostLedger(date=session.date, eta=eta, interval=interval)
    divergence = np.zeros(m)
    for j in range(1, m):
        caps = session.caps[:, j]
        evolve_rank_weights(book, caps)
        evolve_name_weights(book, caps)
        book.minute = int(session.minutes[j])
        divergence[j] = abs(book.rank_weights.sum() - book.name_weights.sum())
        if j % interval == 0 or j == m - 1:
            book, latency, spread = rebalance_step(book, eta)
            ledger.points.append((int(session.minutes[j]), latency, spread))
    ledger.divergence = divergence
    ledger.end_value = float(book.name_weights.sum())
    return book, ledger


def write_ledger_csv(ledgers: Sequence[CostLedger], path,
                     config_hash: Optional[str] = None):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "minute", "latency_cost", "spread_cost"])
        for ledger in ledgers:
            for minute, latency, spread in ledger.points:
                writer.writerow([str(ledger.date), minute,
                                 repr(latency), repr(spread)])


def write_ledger_summary(ledgers: Sequence[CostLedger], path,
                         config_hash: Optional[str] = None):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "total_latency", "total_spread", "end_value"])
        for ledger in ledgers:
            writer.writerow([str(ledger.date), repr(ledger.total_latency),
                             repr(ledger.total_spread), repr(ledger.end_value)])
