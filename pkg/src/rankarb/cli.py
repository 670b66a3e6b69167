"""Command-line entry points.

Every subcommand reads one flat config file (--config), applies --set
key=value overrides on top (flags win), and writes its outputs under
output_dir with the merged config's hash stamped into each file.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .bridge import export_weight_stream, import_weight_stream
from .config import Config
from .diagnostics import write_strategy_map_csv
from .errors import ConfigError, DataError, DegeneracyError
from .market import write_daily_panel, write_intraday_panels, write_risk_free
from .ou import write_fit_table
from .pipeline import (acquire_market, decompose_daily, export_train,
                       run_backtest_name, run_backtest_rank,
                       run_diagnostics, run_sweep, stage)
from .pnl import write_equity_csv, write_metrics_csv
from .rebalance import write_ledger_csv, write_ledger_summary


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def _load_config(args) -> Config:
    cfg = Config.from_file(args.config) if args.config else Config()
    return cfg.override(_parse_overrides(args.set))


def _outdir(cfg: Config) -> str:
    path = cfg.get_str("output_dir")
    os.makedirs(path, exist_ok=True)
    return path


def _write_rows(path, header, rows, config_hash):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _cell(v) -> str:
    return repr(float(v)) if np.isfinite(v) else ""


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args, cfg: Config) -> int:
    out = _outdir(cfg)
    h = cfg.hash()
    panel, sessions = acquire_market(cfg)
    write_daily_panel(panel, os.path.join(out, "daily.csv"), config_hash=h)
    write_risk_free(panel, os.path.join(out, "risk_free.csv"), config_hash=h)
    if sessions:
        write_intraday_panels(sessions, os.path.join(out, "intraday.csv"),
                              config_hash=h)
    print(f"simulated {len(panel.assets)} assets over "
          f"{len(panel.dates)} dates -> {out} config_hash={h}")
    return 0


def cmd_decompose(args, cfg: Config) -> int:
    out = _outdir(cfg)
    h = cfg.hash()
    space = cfg.get_str("space")
    panel, _ = acquire_market(cfg)
    with stage("decompose"):
        dec = decompose_daily(panel, cfg, space)
        if not dec.models:
            raise DataError("no date carries a full lookback window")
        if args.date:
            t = panel.date_index(args.date)
            if t not in dec.models:
                raise DataError(f"no model fitted at {args.date}")
        else:
            t = sorted(dec.models)[-1]
    path = os.path.join(out, f"factor_model_{space}.json")
    with open(path, "w") as fh:
        fh.write(dec.models[t].to_json(config_hash=h) + "\n")
    print(f"factor model at {dec.models[t].as_of} -> {path} config_hash={h}")
    return 0


def _write_backtest(result, cfg: Config) -> None:
    out = _outdir(cfg)
    h = result.config_hash
    tag = result.space
    write_equity_csv(result.series, os.path.join(out, f"equity_{tag}.csv"),
                     config_hash=h)
    write_metrics_csv(result.metrics, os.path.join(out, f"metrics_{tag}.csv"),
                      config_hash=h)
    rows = [(date, asset, fit) for (date, asset), fit
            in sorted(result.fits.items())]
    write_fit_table(rows, os.path.join(out, f"fits_{tag}.csv"), config_hash=h)
    export_weight_stream(result.weight_records,
                         os.path.join(out, f"weights_{tag}.jsonl"),
                         config_hash=h)
    if result.ledgers:
        write_ledger_csv(result.ledgers, os.path.join(out, "ledger.csv"),
                         config_hash=h)
        write_ledger_summary(result.ledgers,
                             os.path.join(out, "ledger_summary.csv"),
                             config_hash=h)
    for m in result.metrics:
        print(f"{tag} {m.year}: return={m.annual_return:+.4f} "
              f"vol={m.annual_vol:.4f} sharpe={m.sharpe:.3f} "
              f"days={m.n_days}")
    print(f"terminal value {result.series.values[-1]:.6f} "
          f"over {len(result.series.values)} marks"
          + (" (bankrupt)" if result.series.bankrupt else "")
          + f" config_hash={h}")


def cmd_backtest_name(args, cfg: Config) -> int:
    _write_backtest(run_backtest_name(cfg), cfg)
    return 0


def cmd_backtest_rank(args, cfg: Config) -> int:
    _write_backtest(run_backtest_rank(cfg), cfg)
    return 0


def cmd_diagnose(args, cfg: Config) -> int:
    out = _outdir(cfg)
    h = cfg.hash()
    result = run_diagnostics(cfg)
    for space, spec in result.spectra.items():
        rows = []
        for i, eig in enumerate(spec.eigenvalues):
            bulk = spec.bulk[i] if i < len(spec.bulk) else np.nan
            rows.append((i + 1, _cell(eig), _cell(bulk),
                         _cell(spec.mp_lower), _cell(spec.mp_upper)))
        _write_rows(os.path.join(out, f"spectrum_{space}.csv"),
                    ["index", "eigenvalue", "bulk", "mp_lower", "mp_upper"],
                    rows, h)
    for space, tau in result.tau.items():
        _write_rows(os.path.join(out, f"tau_{space}.csv"),
                    ["bin_lo", "bin_hi", "count"],
                    [(float(lo), float(hi), int(c)) for lo, hi, c in
                     zip(tau.edges[:-1], tau.edges[1:], tau.counts)], h)
        print(f"{space}: {tau.n_valid} fits, {tau.n_flagged} flagged, "
              f"slow fraction {tau.fraction_slow:.3f}")
    for space, dens in result.density.items():
        rows = []
        for alpha in range(dens.diff.shape[0]):
            for center, diff in zip(dens.centers, dens.diff[alpha]):
                rows.append((alpha + 1, float(center), repr(float(diff))))
        _write_rows(os.path.join(out, f"xhat_diff_{space}.csv"),
                    ["step", "center", "density_diff"], rows, h)
    for space, rows in result.map_rows.items():
        write_strategy_map_csv(rows,
                               os.path.join(out, f"strategy_map_{space}.csv"),
                               config_hash=h)
    if result.switching is not None:
        _write_rows(os.path.join(out, "switching.csv"),
                    ["rank", "pair", "n_gaps", "rate"],
                    [(p.rank, f"{p.pair[0]}|{p.pair[1]}", p.n_gaps,
                      _cell(p.rate)) for p in result.switching.pairs], h)
    print(f"diagnostics -> {out} config_hash={h}")
    return 0


def cmd_sweep(args, cfg: Config) -> int:
    out = _outdir(cfg)
    h = cfg.hash()
    eta_rows, interval_rows = run_sweep(cfg)
    _write_rows(os.path.join(out, "sweep_eta.csv"),
                ["eta", "terminal_value", "mean_sharpe"],
                [(repr(e), repr(v), _cell(s)) for e, v, s in eta_rows], h)
    if interval_rows:
        _write_rows(os.path.join(out, "sweep_interval.csv"),
                    ["interval", "terminal_value", "mean_sharpe"],
                    [(i, repr(v), _cell(s)) for i, v, s in interval_rows], h)
    for e, v, s in eta_rows:
        print(f"eta={e}: terminal={v:.6f} sharpe={s:.3f}")
    for i, v, s in interval_rows:
        print(f"interval={i}: terminal={v:.6f} sharpe={s:.3f}")
    print(f"config_hash={h}")
    return 0


def cmd_export_train(args, cfg: Config) -> int:
    out = _outdir(cfg)
    path = args.out or os.path.join(out, "train.jsonl")
    count = export_train(cfg, path)
    print(f"wrote {count} training records -> {path} "
          f"config_hash={cfg.hash()}")
    return 0


def cmd_import_weights(args, cfg: Config) -> int:
    path = args.weights or cfg.get_str("weights_jsonl")
    if not path:
        raise ConfigError("import-weights needs --weights or weights_jsonl")
    with stage("bridge"):
        stream = import_weight_stream(path)
    print(f"accepted {len(stream.records)} records, "
          f"rejected {len(stream.rejected)}")
    for lineno, reason in stream.rejected[:10]:
        print(f"  line {lineno}: {reason}", file=sys.stderr)
    return 3 if stream.rejected else 0


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankarb",
        description="Rank-space statistical arbitrage engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **extra):
        p = sub.add_parser(name, **extra)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable; flags win)")
        p.set_defaults(func=func)
        return p

    add("simulate", cmd_simulate, help="generate a synthetic market")
    p = add("decompose", cmd_decompose, help="fit one day's factor model")
    p.add_argument("--date", help="as-of date (default: last fitted)")
    add("backtest-name", cmd_backtest_name, help="daily name-space backtest")
    add("backtest-rank", cmd_backtest_rank,
        help="rank-space backtest through the intraday engine")
    add("diagnose", cmd_diagnose, help="spectra, speeds, calibration, crossings")
    add("sweep", cmd_sweep, help="cost and cadence sweeps")
    p = add("export-train", cmd_export_train,
            help="write the trajectory training set")
    p.add_argument("--out", help="output JSONL path")
    p = add("import-weights", cmd_import_weights,
            help="validate an external weight stream")
    p.add_argument("--weights", help="weight stream JSONL path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"degeneracy error: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
