"""Gradient-ascent training of the network on exported trajectories.

The span layout mirrors walk-forward usage: everything strictly before the
evaluation start date is historical, the last val_span of it validates,
and up to train_span records before that train.  Early stopping tracks the
validation target and restores the best parameters.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch

from .data import TrainingSet, TrajectoryRecord
from .errors import ConfigError, DataError, TrainingError
from .model import TrajectoryNet
from .objective import mean_variance_target


@dataclass
class TrainConfig:
    """Objective, span and optimizer settings."""

    risk_aversion: float = 2.0
    mv_window: int = 24          # days per mean-variance window
    train_span: int = 940        # cap on training records, ending val_span+1
    val_span: int = 59           # records held out right before evaluation
    retrain_span: int = 500      # cap when re-fitting an existing model
    retrain_every: int = 63      # trading days between walk-forward refits
    learning_rate: float = 1e-3
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.mv_window < 2:
            raise ConfigError("mv_window must be at least 2 days")
        spans = (self.train_span, self.val_span, self.retrain_span,
                 self.retrain_every)
        if any(s < 1 for s in spans):
            raise ConfigError("spans must be positive")
        if self.val_span < self.mv_window:
            raise ConfigError(f"val_span ({self.val_span}) must cover at "
                              f"least one mean-variance window "
                              f"({self.mv_window} days)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.max_epochs < 0 or self.patience < 1:
            raise ConfigError("max_epochs must be >= 0 and patience >= 1")
        if self.risk_aversion < 0:
            raise ConfigError("risk_aversion cannot be negative")


@dataclass
class TrainingCurve:
    """Per-epoch train/validation targets; val is empty without a val set."""

    train: list[float] = field(default_factory=list)
    val: list[float] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        scores = self.val or self.train
        if not scores:
            raise TrainingError("no epochs were run")
        return max(range(len(scores)), key=scores.__getitem__)


def split_for_eval(ts: TrainingSet, eval_start: str,
                   config: TrainConfig) -> tuple[list, list]:
    """(train, validation) records strictly before the evaluation start."""
    earlier = ts.before(eval_start)
    if len(earlier) <= config.val_span:
        raise DataError(f"only {len(earlier)} records precede {eval_start}; "
                        f"need more than val_span={config.val_span}")
    val = earlier[-config.val_span:]
    rest = earlier[:-config.val_span]
    train = rest[-config.train_span:]
    if len(train) < config.mv_window:
        raise DataError(f"training span must cover at least "
                        f"{config.mv_window + 1} days of data, got "
                        f"{len(train)} records")
    return train, val


def _trainable(records: Sequence[TrajectoryRecord], what: str) -> list:
    usable = [r for r in records if r.trainable]
    if len(usable) < len(records):
        raise DataError(f"{len(records) - len(usable)} {what} record(s) "
                        f"lack r_next/phi fields needed for training")
    return usable


def _tensors(records: Sequence[TrajectoryRecord]):
    xs = [torch.as_tensor(r.x, dtype=torch.float32) for r in records]
    phis = [torch.as_tensor(r.phi, dtype=torch.float32) for r in records]
    rs = [torch.as_tensor(r.r_next, dtype=torch.float32) for r in records]
    return xs, phis, rs


def _span_target(model: TrajectoryNet, xs, phis, rs,
                 config: TrainConfig) -> torch.Tensor:
    # every layer acts per asset row, so one batched forward over all
    # dates is exactly the per-date computation
    out = model(torch.cat(xs))
    w_eps = out.split([len(x) for x in xs])
    return mean_variance_target(w_eps, phis, rs,
                                window=config.mv_window,
                                risk_aversion=config.risk_aversion)


def span_target(model: TrajectoryNet, records: Sequence[TrajectoryRecord],
                config: TrainConfig) -> float:
    """Deterministic (eval-mode, no-grad) target of a span of records."""
    xs, phis, rs = _tensors(_trainable(records, "span"))
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            return float(_span_target(model, xs, phis, rs, config))
    finally:
        model.train(was_training)


def train(model: TrajectoryNet, records: Sequence[TrajectoryRecord],
          config: TrainConfig,
          val_records: Optional[Sequence[TrajectoryRecord]] = None
          ) -> TrainingCurve:
    """Maximize the mean-variance target in place; returns the curve.

    With a validation set, stops once the validation target has not
    improved for `patience` epochs and restores the best parameters.
    """
    records = _trainable(records, "training")
    if len(records) < config.mv_window:
        raise DataError(f"training span must cover at least "
                        f"{config.mv_window + 1} days of data, got "
                        f"{len(records)} records")
    if val_records is not None and len(val_records) < config.mv_window:
        raise DataError(f"validation span must cover at least "
                        f"{config.mv_window} records, got "
                        f"{len(val_records)}")
    torch.manual_seed(config.seed)
    xs, phis, rs = _tensors(records)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    curve = TrainingCurve()
    best_val = -float("inf")
    best_state = None
    stale = 0
    for epoch in range(config.max_epochs):
        model.train()
        target = _span_target(model, xs, phis, rs, config)
        if not torch.isfinite(target):
            raise TrainingError(f"non-finite training target at epoch "
                                f"{epoch}: {float(target.detach())}")
        optimizer.zero_grad()
        (-target).backward()
        optimizer.step()
        curve.train.append(float(target.detach()))
        if val_records is not None:
            score = span_target(model, val_records, config)
            curve.val.append(score)
            if score > best_val:
                best_val = score
                best_state = copy.deepcopy(model.state_dict())
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return curve
