"""PCA factor extraction, loadings and the residual projector.

The excess-return window X (assets by days) is decomposed as U S Vt without
demeaning.  Factor rows are the top right-singular vectors, the factor
weight matrix is omega = S_k^-1 U_k^T, and loadings are fit by regressing a
window of excess returns on the factor realizations omega X of that window.
Because the regression target is built from omega itself, the projector
Phi = I - beta omega annihilates beta exactly: residual books project to
market-neutral equity books.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, DegeneracyError

FLAT_NORM_TOL = 1e-12


@dataclass
class FactorModel:
    """One day's fitted decomposition for a fixed universe ordering."""

    as_of: str
    k: int
    omega: np.ndarray          # (K, N) factor weights
    beta: np.ndarray           # (N, K) loadings
    phi: np.ndarray            # (N, N) residual projector
    universe: list[str]

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        n = len(self.universe)
        if self.omega.shape != (self.k, n) or self.beta.shape != (n, self.k):
            raise DataError("factor model shapes do not match universe")
        if self.phi.shape != (n, n):
            raise DataError("projector must be square over the universe")

    def to_json(self, config_hash: Optional[str] = None) -> str:
        payload = {
            "as_of": str(self.as_of),
            "k": self.k,
            "universe": list(self.universe),
            "omega": self.omega.tolist(),
            "beta": self.beta.tolist(),
            "phi": self.phi.tolist(),
        }
        if config_hash:
            payload["config_hash"] = config_hash
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "FactorModel":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"bad factor model JSON: {exc}") from exc
        try:
            return cls(as_of=payload["as_of"], k=int(payload["k"]),
                       omega=np.array(payload["omega"], dtype=float),
                       beta=np.array(payload["beta"], dtype=float),
                       phi=np.array(payload["phi"], dtype=float),
                       universe=list(payload["universe"]))
        except KeyError as exc:
            raise DataError(f"factor model JSON missing field {exc}") from exc


@dataclass
class ResidualSeries:
    """Daily residual returns for one universe ordering."""

    dates: np.ndarray
    universe: list[str]
    epsilon: np.ndarray        # (N, T)

    def __post_init__(self):
        self.epsilon = np.asarray(self.epsilon, dtype=float)
        if self.epsilon.shape != (len(self.universe), len(self.dates)):
            raise DataError("residual series shape does not match axes")


def _dense_window(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError("return window must be a 2-D matrix")
    if not np.all(np.isfinite(x)):
        raise DataError("return window contains non-finite entries")
    return x


def _check_window(x: np.ndarray, assets: Optional[Sequence[str]]) -> np.ndarray:
    x = _dense_window(x)
    stds = x.std(axis=1)
    dead = np.nonzero(stds == 0.0)[0]
    if len(dead):
        name = assets[dead[0]] if assets is not None else f"row {dead[0]}"
        raise DegeneracyError(f"zero-variance asset in window: {name}")
    return x


def fit_factors(excess: np.ndarray, k: int,
                assets: Optional[Sequence[str]] = None):
    """Top-k SVD factors of an (N, T) excess-return window.

    Returns (factors, omega): factors is (k, T) rows of right-singular
    vectors, omega is (k, N) with omega @ excess == factors.  Each singular
    vector's sign is fixed so its largest-magnitude entry is positive.
    """
    x = _check_window(excess, assets)
    n, t = x.shape
    if not 1 <= k <= min(n, t):
        raise ConfigError(f"k must lie in [1, {min(n, t)}], got {k}")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    if s[k - 1] <= max(n, t) * np.finfo(float).eps * s[0]:
        raise DegeneracyError(f"window rank is below k={k}")
    for i in range(k):
        j = int(np.argmax(np.abs(vt[i])))
        if vt[i, j] < 0:
            vt[i] = -vt[i]
            u[:, i] = -u[:, i]
    factors = vt[:k].copy()
    omega = (u[:, :k] / s[:k]).T
    return factors, omega


def fit_loadings(excess: np.ndarray, factors: np.ndarray,
                 assets: Optional[Sequence[str]] = None) -> np.ndarray:
    """Least-squares loadings of an excess-return window on factor rows.

    A constant (even all-zero) target row is fine here: its loading is
    whatever the regression says, zero for a zero row.
    """
    del assets
    x = _dense_window(excess)
    f = np.asarray(factors, dtype=float)
    if f.ndim != 2 or f.shape[1] != x.shape[1]:
        raise DataError("factor rows must span the same days as the window")
    if f.shape[0] == 0:
        return np.zeros((x.shape[0], 0))
    gram = f @ f.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise DegeneracyError("factor gram matrix is singular")
    return np.linalg.solve(gram, f @ x.T).T


def build_projector(beta: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Phi = I - beta omega; with k = 0 this is the identity."""
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if beta.ndim != 2 or omega.ndim != 2:
        raise DataError("beta and omega must be 2-D")
    n, k = beta.shape
    if omega.shape != (k, n):
        raise DataError(f"omega shape {omega.shape} does not match beta {beta.shape}")
    if k == 0:
        return np.eye(n)
    return np.eye(n) - beta @ omega


def residuals(phi: np.ndarray, excess: np.ndarray) -> np.ndarray:
    """Project excess returns (vector or matrix) onto the residual space."""
    phi = np.asarray(phi, dtype=float)
    x = np.asarray(excess, dtype=float)
    if x.shape[0] != phi.shape[0]:
        raise DataError("excess returns do not match projector dimension")
    return phi @ x


def weights_to_equity(phi: np.ndarray, w_eps: np.ndarray,
                      normalize: bool = False) -> np.ndarray:
    """Map a residual-space book to equity weights: w = Phi^T w_eps."""
    phi = np.asarray(phi, dtype=float)
    w_eps = np.asarray(w_eps, dtype=float)
    if w_eps.shape != (phi.shape[0],):
        raise DataError("residual book does not match projector dimension")
    w = phi.T @ w_eps
    if normalize:
        norm = np.abs(w).sum()
        if norm <= FLAT_NORM_TOL:
            raise DegeneracyError("projected book has zero l1 norm")
        w = w / norm
    return w


def project_and_normalize(phi: np.ndarray, w_eps: np.ndarray):
    """(equity weights, flat flag): l1-normalized projection, or zeros when
    the residual book is empty or projects to nothing."""
    w_eps = np.asarray(w_eps, dtype=float)
    if np.all(w_eps == 0.0):
        return np.zeros(phi.shape[0]), True
    w = np.asarray(phi, dtype=float).T @ w_eps
    norm = np.abs(w).sum()
    if norm <= FLAT_NORM_TOL:
        return np.zeros(phi.shape[0]), True
    return w / norm, False
