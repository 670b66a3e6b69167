"""Weight-stream emission and the run manifest.

Emitted files follow the engine's weight-stream JSONL schema: a header
record {"schema": "weight-stream", "version": 1} and then one record per
date, {"date", "space", "assets", "w_eps"}.  The manifest records the
exact configs, seed and a git-style content hash of every input file so a
run can be reproduced bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import torch

from .data import TrainingSet, TrajectoryRecord, load_trajectories
from .errors import DataError
from .model import ModelConfig, TrajectoryNet, build_model
from .train import TrainConfig, TrainingCurve, split_for_eval, train

STREAM_SCHEMA = "weight-stream"
STREAM_VERSION = 1


def emit_weight_stream(model: TrajectoryNet,
                       records: Sequence[TrajectoryRecord], path,
                       config_hash: Optional[str] = None) -> int:
    """Write one weight record per trajectory record; returns the count."""
    for rec in records:
        if rec.window != model.config.window:
            raise DataError(f"{rec.date}: record window {rec.window} does "
                            f"not match model window {model.config.window}")
    model.eval()
    header: dict = {"schema": STREAM_SCHEMA, "version": STREAM_VERSION}
    if config_hash:
        header["config_hash"] = config_hash
    lines = [json.dumps(header)]
    with torch.no_grad():
        for rec in records:
            w = model(torch.as_tensor(rec.x, dtype=torch.float32))
            if not bool(torch.isfinite(w).all()):
                raise DataError(f"{rec.date}: model emitted non-finite "
                                f"weights")
            lines.append(json.dumps({"date": rec.date, "space": rec.space,
                                     "assets": list(rec.assets),
                                     "w_eps": [float(v) for v in w]}))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return len(records)


def git_blob_sha(path) -> str:
    """sha1 of the file in git blob form: 'blob <size>\\0<content>'."""
    with open(path, "rb") as fh:
        content = fh.read()
    return hashlib.sha1(b"blob %d\0" % len(content) + content).hexdigest()


def write_manifest(path, model_config: ModelConfig, train_config: TrainConfig,
                   inputs: Sequence, eval_start: Optional[str] = None,
                   curve: Optional[TrainingCurve] = None):
    manifest: dict = {
        "model": asdict(model_config),
        "train": asdict(train_config),
        "seed": train_config.seed,
        "inputs": {str(p): git_blob_sha(p) for p in inputs},
    }
    if eval_start is not None:
        manifest["eval_start"] = eval_start
    if curve is not None:
        manifest["epochs"] = len(curve.train)
        if curve.train:
            manifest["final_train_target"] = curve.train[-1]
        if curve.val:
            manifest["best_val_target"] = max(curve.val)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class RunSummary:
    n_train: int
    n_val: int
    n_emitted: int
    curve: TrainingCurve
    model: TrajectoryNet


def run_training(train_path, weights_path, eval_start: str,
                 model_config: Optional[ModelConfig] = None,
                 train_config: Optional[TrainConfig] = None,
                 manifest_path=None) -> RunSummary:
    """Load, split, train, emit weights for dates >= eval_start."""
    ts = load_trajectories(train_path)
    if not ts.records:
        raise DataError(f"{train_path}: no trajectory records")
    cfg = train_config or TrainConfig()
    mcfg = model_config or ModelConfig(window=ts.window)
    if mcfg.window != ts.window:
        raise DataError(f"model window {mcfg.window} does not match "
                        f"exported window {ts.window}")
    train_recs, val_recs = split_for_eval(ts, eval_start, cfg)
    eval_recs = ts.since(eval_start)
    if not eval_recs:
        raise DataError(f"no records on or after {eval_start} to emit")
    model = build_model(mcfg, seed=cfg.seed)
    curve = train(model, train_recs, cfg, val_records=val_recs)
    emit_weight_stream(model, eval_recs, weights_path)
    if manifest_path is not None:
        write_manifest(manifest_path, mcfg, cfg, [train_path],
                       eval_start=eval_start, curve=curve)
    return RunSummary(n_train=len(train_recs), n_val=len(val_recs),
                      n_emitted=len(eval_recs), curve=curve, model=model)
