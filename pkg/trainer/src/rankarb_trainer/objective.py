"""Mean-variance objective over sliding windows of portfolio returns.

Given residual weights w_eps per date, the tradable book is the projected,
l1-normalized w = phi^T w_eps / ||phi^T w_eps||_1, its next-day portfolio
excess return is w . r_next, and the target on a window of T consecutive
dates is

    mean(returns) - risk_aversion * var(returns)

with the biased (1/T) variance.  Training maximizes the average of this
target over all sliding windows of the span.
"""

from __future__ import annotations

from typing import Sequence

import torch

from .errors import DataError


def equity_weights(phi: torch.Tensor, w_eps: torch.Tensor) -> torch.Tensor:
    """l1-normalized projected book; exact division, no epsilon guard."""
    raw = phi.T @ w_eps
    return raw / raw.abs().sum()


def day_returns(w_eps_seq: Sequence[torch.Tensor],
                phi_seq: Sequence[torch.Tensor],
                r_next_seq: Sequence[torch.Tensor]) -> torch.Tensor:
    """Portfolio excess return per date from per-date books."""
    if not len(w_eps_seq) == len(phi_seq) == len(r_next_seq):
        raise DataError("w_eps, phi and r_next sequences differ in length")
    return torch.stack([equity_weights(phi, w) @ r for w, phi, r
                        in zip(w_eps_seq, phi_seq, r_next_seq)])


def window_targets(returns: torch.Tensor, window: int,
                   risk_aversion: float) -> torch.Tensor:
    """Sliding mean minus risk_aversion times the biased variance."""
    if window < 2:
        raise DataError("mean-variance window must be at least 2 days")
    if returns.ndim != 1 or len(returns) < window:
        raise DataError(f"need at least {window} daily returns, "
                        f"got {tuple(returns.shape)}")
    win = returns.unfold(0, window, 1)
    return win.mean(dim=1) - risk_aversion * win.var(dim=1, unbiased=False)


def mean_variance_target(w_eps_seq: Sequence[torch.Tensor],
                         phi_seq: Sequence[torch.Tensor],
                         r_next_seq: Sequence[torch.Tensor],
                         window: int, risk_aversion: float) -> torch.Tensor:
    """Average sliding-window target over one contiguous span of dates."""
    rets = day_returns(w_eps_seq, phi_seq, r_next_seq)
    return window_targets(rets, window, risk_aversion).mean()
