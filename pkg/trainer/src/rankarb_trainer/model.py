"""Convolution-transformer network mapping trajectories to residual weights.

The input is an (N, L) block of cumulative residual trajectories, one row
per asset.  Every layer acts per asset (the asset axis is the batch axis),
so the network is permutation-equivariant across assets:

  1. instance normalization (affine) of each trajectory over time,
  2. two causal 1-d convolution blocks with ReLU and residual connections,
  3. a standard transformer encoder layer attending over the time axis,
  4. a linear head reading the last time slice -> one weight per asset.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError


@dataclass
class ModelConfig:
    """Architecture hyperparameters; window is the trajectory length L."""

    window: int
    channels: int = 8
    kernel: int = 2
    heads: int = 4
    dropout: float = 0.25

    def __post_init__(self):
        if self.window < 2:
            raise ConfigError("window must be at least 2")
        if self.channels < 1 or self.kernel < 1 or self.heads < 1:
            raise ConfigError("channels, kernel and heads must be positive")
        if self.channels % self.heads != 0:
            raise ConfigError(f"channels ({self.channels}) must be divisible "
                              f"by heads ({self.heads})")
        if self.kernel > self.window:
            raise ConfigError("kernel cannot exceed the window length")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")


class ConvBlock(nn.Module):
    """Instance norm, causal conv, ReLU, plus the normalized input."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int):
        super().__init__()
        self.norm = nn.InstanceNorm1d(in_channels, affine=True)
        self.pad = nn.ConstantPad1d((kernel - 1, 0), 0.0)
        self.conv = nn.Conv1d(in_channels, out_channels, kernel)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # (N, C_in, L) -> (N, C_out, L); the residual broadcasts when C_in=1
        x = self.norm(x)
        return torch.relu(self.conv(self.pad(x))) + x


class TrajectoryNet(nn.Module):
    """(N, L) trajectories in, (N,) residual weights out."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.channels
        self.block1 = ConvBlock(1, d, config.kernel)
        self.block2 = ConvBlock(d, d, config.kernel)
        self.encoder = nn.TransformerEncoderLayer(
            d_model=d, nhead=config.heads, dim_feedforward=4 * d,
            dropout=config.dropout, batch_first=True)
        self.head = nn.Linear(d, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 2 or x.shape[1] != self.config.window:
            raise ConfigError(f"expected (N, {self.config.window}) input, "
                              f"got {tuple(x.shape)}")
        h = x.unsqueeze(1)             # (N, 1, L)
        h = self.block1(h)             # (N, D, L)
        h = self.block2(h)             # (N, D, L)
        h = h.transpose(1, 2)          # (N, L, D): attention over time
        h = self.encoder(h)
        return self.head(h[:, -1, :]).squeeze(-1)


def build_model(config: ModelConfig, seed: int | None = None) -> TrajectoryNet:
    """Construct a TrajectoryNet; a seed makes the init deterministic."""
    if seed is not None:
        torch.manual_seed(seed)
    return TrajectoryNet(config)
