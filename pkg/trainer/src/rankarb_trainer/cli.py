"""Command line: train on an exported trajectory file, emit a weight stream.

Exit codes mirror the engine: 0 success, 2 configuration error, 3 data
error, 4 training failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .errors import ConfigError, DataError, TrainingError
from .model import ModelConfig
from .train import TrainConfig
from .emit import run_training


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rankarb-train",
        description="Train the trajectory network and emit a weight stream")
    p.add_argument("--train", required=True,
                   help="trajectory JSONL exported by the engine")
    p.add_argument("--weights", required=True,
                   help="output weight-stream JSONL path")
    p.add_argument("--eval-start", required=True,
                   help="first date to emit weights for; everything "
                        "earlier is training/validation history")
    p.add_argument("--manifest", help="optional run-manifest JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--risk-aversion", type=float, default=2.0)
    p.add_argument("--mv-window", type=int, default=24)
    p.add_argument("--train-span", type=int, default=940)
    p.add_argument("--val-span", type=int, default=59)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = TrainConfig(risk_aversion=args.risk_aversion,
                          mv_window=args.mv_window,
                          train_span=args.train_span,
                          val_span=args.val_span,
                          learning_rate=args.lr,
                          max_epochs=args.epochs,
                          patience=args.patience,
                          seed=args.seed)
        summary = run_training(args.train, args.weights, args.eval_start,
                               train_config=cfg,
                               manifest_path=args.manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 4
    curve = summary.curve
    last = f", final target {curve.train[-1]:+.3e}" if curve.train else ""
    print(f"trained on {summary.n_train} records "
          f"(validation {summary.n_val}) for {len(curve.train)} epochs{last}")
    print(f"emitted {summary.n_emitted} weight records -> {args.weights}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
