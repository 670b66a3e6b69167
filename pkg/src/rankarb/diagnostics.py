"""Structure diagnostics: spectra, OU-speed tables, calibration, crossings.

The spectrum report keeps raw correlation eigenvalues (they sum to the
number of assets) and a mean-one rescaling of the nonzero part: multiplying
the min(N, T) nonzero eigenvalues by T/N maps an iid panel's bulk onto the
Marchenko-Pastur support [(1 - sqrt(q))^2, (1 + sqrt(q))^2] with q = T/N,
whichever of N and T is larger.  Spikes escaping that band mark factor
structure.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .market import IntradayPanel
from .ranks import identifier_rank, local_crossing_time, rank_order

MIN_POOL = 100


class CoverageWarning(UserWarning):
    """A diagnostic pool is too small to be trustworthy."""


# ---------------------------------------------------------------------------
# eigenvalue spectrum
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray    # raw correlation eigenvalues, descending
    bulk: np.ndarray           # nonzero part rescaled by q, descending
    q: float                   # aspect ratio T / N
    mp_lower: float
    mp_upper: float
    n_assets: int
    n_days: int


def eigen_spectrum(window: np.ndarray) -> SpectrumReport:
    """Correlation spectrum of an (N, T) return window.

    Zero-variance assets are excluded before standardizing.  Eigenvalues
    are reported in descending order and sum to the retained asset count;
    `bulk` is the Marchenko-Pastur-comparable rescaling described above.
    """
    x = np.asarray(window, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise DataError("spectrum needs an (N, T) window with T >= 2")
    if not np.all(np.isfinite(x)):
        raise DataError("spectrum window contains non-finite entries")
    stds = x.std(axis=1)
    keep = stds > 0.0
    if not np.any(keep):
        raise DataError("all assets have zero variance in the window")
    x = x[keep]
    n, t = x.shape
    z = (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)
    if n <= t:
        corr = z @ z.T / t
        eig = np.linalg.eigvalsh(corr)[::-1]
    else:
        gram = z.T @ z / t            # shares the nonzero spectrum
        eig = np.concatenate([np.linalg.eigvalsh(gram)[::-1],
                              np.zeros(n - t)])
    eig = np.clip(eig, 0.0, None)
    q = t / n
    bulk = eig[:min(n, t)] * q
    return SpectrumReport(eigenvalues=eig, bulk=bulk, q=q,
                          mp_lower=(1.0 - np.sqrt(q)) ** 2,
                          mp_upper=(1.0 + np.sqrt(q)) ** 2,
                          n_assets=n, n_days=t)


# ---------------------------------------------------------------------------
# OU speed distribution
# ---------------------------------------------------------------------------

@dataclass
class TauDistribution:
    edges: np.ndarray          # histogram bin edges in days
    counts: np.ndarray
    n_valid: int               # mean-reverting fits
    n_flagged: int             # fits with b outside (0, 1)
    fraction_slow: float       # share of valid fits with tau > tau_max
    tau_max: float


def tau_distribution(fits: Sequence, bin_width: float = 1.0,
                     upper: float = 60.0, tau_max: float = 30.0
                     ) -> TauDistribution:
    """Histogram of e-folding times over [0, upper] in bin_width steps.

    Non-mean-reverting fits are counted separately and never binned; the
    slow fraction is taken among valid fits (including those beyond the
    grid).
    """
    if bin_width <= 0 or upper <= 0:
        raise ConfigError("bin_width and upper must be positive")
    taus = np.array([f.tau_days for f in fits if f.mean_reverting])
    n_flagged = sum(1 for f in fits if not f.mean_reverting)
    edges = np.arange(0.0, upper + bin_width / 2, bin_width)
    counts, _ = np.histogram(taus, bins=edges)
    fraction = float((taus > tau_max).mean()) if len(taus) else float("nan")
    return TauDistribution(edges=edges, counts=counts, n_valid=len(taus),
                           n_flagged=n_flagged, fraction_slow=fraction,
                           tau_max=tau_max)


# ---------------------------------------------------------------------------
# normalized-trajectory calibration
# ---------------------------------------------------------------------------

@dataclass
class DensityDiff:
    centers: np.ndarray        # bin centers
    diff: np.ndarray           # (L, n_bins) empirical minus normal density
    counts: np.ndarray         # in-range pool size per step
    lo: float
    hi: float
    width: float


def _normal_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def density_vs_normal(values: np.ndarray, lo: float = -4.0, hi: float = 4.0,
                      width: float = 0.1):
    """(centers, empirical density - normal pdf, in-range count).

    The empirical histogram is normalized over the in-range samples so it
    integrates to one on the grid before differencing.
    """
    values = np.asarray(values, dtype=float).ravel()
    edges = np.arange(lo, hi + width / 2, width)
    counts, _ = np.histogram(values, bins=edges)
    total = counts.sum()
    if total == 0:
        raise DataError("no samples fall inside the density grid")
    density = counts / (total * width)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return centers, density - _normal_pdf(centers), int(total)


def xhat_density_diff(trajectories: Sequence, lo: float = -4.0,
                      hi: float = 4.0, width: float = 0.1) -> DensityDiff:
    """Per-step difference between pooled normalized-residual density and
    the standard normal, on a fixed grid.

    Pools with fewer than 100 in-range samples draw a CoverageWarning.
    """
    if not trajectories:
        raise DataError("no trajectories supplied")
    l = trajectories[0].L
    if any(t.L != l for t in trajectories):
        raise DataError("trajectories disagree on window length")
    diffs, counts = [], []
    centers = None
    for alpha in range(l):
        pool = np.concatenate([t.values[:, alpha] for t in trajectories])
        centers, diff, n = density_vs_normal(pool, lo, hi, width)
        if n < MIN_POOL:
            warnings.warn(f"step {alpha + 1}: only {n} samples in range",
                          CoverageWarning, stacklevel=2)
        diffs.append(diff)
        counts.append(n)
    return DensityDiff(centers=centers, diff=np.array(diffs),
                       counts=np.array(counts), lo=lo, hi=hi, width=width)


# ---------------------------------------------------------------------------
# strategy map
# ---------------------------------------------------------------------------

@dataclass
class StrategyMapRow:
    date: str
    asset: str
    deviation: float
    tau_days: float
    w_eps: int


def strategy_map(fits: Mapping, signals: Mapping, weights: Mapping
                 ) -> list[StrategyMapRow]:
    """Join fits, deviations and positions into one table.

    All mappings are keyed by (date, asset); a missing weight means flat.
    """
    rows = []
    for (date, asset), fit in sorted(fits.items()):
        s = signals.get((date, asset), float("nan"))
        w = int(weights.get((date, asset), 0))
        rows.append(StrategyMapRow(date=str(date), asset=asset,
                                   deviation=float(s),
                                   tau_days=float(fit.tau_days), w_eps=w))
    return rows


def write_strategy_map_csv(rows: Sequence[StrategyMapRow], path,
                           config_hash: Optional[str] = None):
    def cell(v):
        return repr(float(v)) if np.isfinite(v) else ""

    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", "asset", "deviation", "tau_days", "w_eps"])
        for r in rows:
            writer.writerow([r.date, r.asset, cell(r.deviation),
                             cell(r.tau_days), r.w_eps])


# ---------------------------------------------------------------------------
# rank-boundary switching times
# ---------------------------------------------------------------------------

@dataclass
class PairCrossingSummary:
    rank: int                  # upper rank k of the (k, k+1) pair
    pair: tuple
    n_gaps: int
    rate: float                # 1 / mean gap, NaN when no gaps
    gaps: np.ndarray


@dataclass
class SwitchingReport:
    pairs: list
    pooled_gaps: np.ndarray
    delta: float


def exponential_fit(gaps: np.ndarray, bin_width: float = 1.0):
    """MLE rate of an exponential on the gaps plus a histogram R^2.

    Returns (rate, r2).  r2 compares the empirical gap density against the
    fitted density at bin centers.
    """
    gaps = np.asarray(gaps, dtype=float)
    if len(gaps) == 0 or np.any(gaps <= 0):
        raise DataError("need positive gaps for an exponential fit")
    rate = 1.0 / gaps.mean()
    edges = np.arange(0.0, gaps.max() + bin_width, bin_width)
    counts, _ = np.histogram(gaps, bins=edges)
    density = counts / (counts.sum() * bin_width)
    centers = (edges[:-1] + edges[1:]) / 2.0
    model = rate * np.exp(-rate * centers)
    ss_res = float(np.sum((density - model) ** 2))
    ss_tot = float(np.sum((density - density.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return float(rate), r2


def switching_time_distribution(sessions: Sequence[IntradayPanel],
                                stride: int = 25, delta: float = 1e-3
                                ) -> SwitchingReport:
    """Crossing-gap statistics for asset pairs adjacent in rank.

    Pairs are the assets holding ranks (k, k+1) at the first session's open
    for k = 1, 1+stride, 1+2*stride, ...; each pair is then tracked by name
    through the whole span.
    """
    if stride < 1:
        raise ConfigError("stride must be at least 1")
    if not sessions:
        raise DataError("no sessions supplied")
    first = sessions[0]
    order = rank_order(first.caps[:, 0], identifier_rank(first.assets))
    n = len(first.assets)
    summaries = []
    pooled = []
    for k in range(1, n, stride):
        if k + 1 > n:
            break
        a = first.assets[order[k - 1]]
        b = first.assets[order[k]]
        record = local_crossing_time(sessions, (a, b), delta)
        rate = (1.0 / record.gaps.mean()) if len(record.gaps) else float("nan")
        summaries.append(PairCrossingSummary(rank=k, pair=(a, b),
                                             n_gaps=len(record.gaps),
                                             rate=float(rate),
                                             gaps=record.gaps))
        pooled.append(record.gaps)
    pooled_gaps = (np.concatenate(pooled) if pooled
                   else np.array([], dtype=int))
    return SwitchingReport(pairs=summaries, pooled_gaps=pooled_gaps,
                           delta=delta)
