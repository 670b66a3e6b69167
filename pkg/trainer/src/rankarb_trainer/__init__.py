"""Neural weight generator for the rank-space backtesting engine.

Consumes trajectory JSONL files exported by the engine, trains a small
convolution-transformer network under a mean-variance objective, and emits
weight-stream JSONL files the engine can replay.
"""

from .data import (TrainingSet, TrajectoryRecord, load_trajectories,
                   write_trajectories)
from .errors import ConfigError, DataError, TrainerError, TrainingError
from .model import ModelConfig, TrajectoryNet, build_model
from .objective import (day_returns, equity_weights, mean_variance_target,
                        window_targets)
from .train import (TrainConfig, TrainingCurve, span_target, split_for_eval,
                    train)
from .emit import (RunSummary, emit_weight_stream, git_blob_sha,
                   run_training, write_manifest)

__all__ = [
    "ConfigError", "DataError", "TrainerError", "TrainingError",
    "TrainingSet", "TrajectoryRecord", "load_trajectories",
    "write_trajectories",
    "ModelConfig", "TrajectoryNet", "build_model",
    "day_returns", "equity_weights", "mean_variance_target",
    "window_targets",
    "TrainConfig", "TrainingCurve", "span_target", "split_for_eval", "train",
    "RunSummary", "emit_weight_stream", "git_blob_sha", "run_training",
    "write_manifest",
]
