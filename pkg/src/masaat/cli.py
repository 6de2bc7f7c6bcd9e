"""Command-line entry point: train, backtest, dc-inspect and synth.

Every command validates its configuration completely before writing any
output; results land in a per-run directory (timestamp plus config hash)
unless --out picks one explicitly. The MASAAT_LOG environment variable
selects the logging level (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import numpy as np

from . import experiments
from .backtest import PolicyStrategy, run_backtest
from .baselines import make_baseline
from .data import MarketFrame, load_csv, write_csv
from .dc import event_rows
from .errors import ConfigError, MasaatError, RangeError
from .model import load_checkpoint, save_checkpoint
from .training import train, write_training_log

log = logging.getLogger("masaat")


def _configure_logging() -> None:
    level_name = os.environ.get("MASAAT_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _prepare_out_dir(args, cfg) -> Path:
    out = Path(args.out) if args.out else Path("runs") / experiments.run_id(cfg)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_echo(cfg, out_dir: Path) -> None:
    echo = experiments.config_echo(cfg)
    (out_dir / "config_echo.json").write_text(json.dumps(echo, indent=1),
                                              encoding="utf-8")


def _parse_range(text: str, frame: MarketFrame) -> tuple[int, int]:
    try:
        start_s, end_s = text.split(":", 1)
        start_d, end_d = date.fromisoformat(start_s), date.fromisoformat(end_s)
    except ValueError:
        raise ConfigError(f"--range must be START:END ISO dates, got {text!r}") from None
    if end_d < start_d:
        raise RangeError(f"range {text} is reversed")
    start = frame.locate(start_d)
    stop = start
    for i in range(start, frame.n_days):
        if frame.calendar[i] > end_d:
            break
        stop = i
    if frame.calendar[start] > end_d:
        raise RangeError(f"range {text} covers no trading days")
    return start, stop


# ----------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = experiments.load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, trainer=replace(cfg.trainer, seed=args.seed))
    frame = experiments.build_frame(cfg)
    splits = experiments.resolve_splits(cfg, frame)
    policy = experiments.build_policy(cfg, frame)

    out_dir = _prepare_out_dir(args, cfg)
    _write_echo(cfg, out_dir)
    log.info("training for %d iterations", cfg.trainer.max_iterations)
    result = train(frame, splits, policy, cfg.trainer, cfg.metrics)
    save_checkpoint(result.policy, out_dir / "checkpoint.json")
    write_training_log(result.log, out_dir / "training_log.csv")
    best = result.best_validation_sharpe
    print(f"wrote {out_dir / 'checkpoint.json'} "
          f"(best validation SR: {'n/a' if best is None else f'{best:.4f}'})")
    return 0


def _mean_report(reports: list[dict]) -> dict:
    sharpes = [r["sharpe"] for r in reports]
    return {
        "runs": len(reports),
        "ar_pct": float(np.mean([r["ar_pct"] for r in reports])),
        "mdd_pct": float(np.mean([r["mdd_pct"] for r in reports])),
        "sharpe": None if any(s is None for s in sharpes)
        else float(np.mean(sharpes)),
        "final_value": float(np.mean([r["final_value"] for r in reports])),
        "per_run": reports,
    }


def cmd_backtest(args) -> int:
    cfg = experiments.load_config(args.config)
    frame = experiments.build_frame(cfg)
    if args.range:
        span = _parse_range(args.range, frame)
    else:
        splits = experiments.resolve_splits(cfg, frame)
        span = splits.indices(frame, "test")

    if (args.checkpoint is None) == (args.strategy is None):
        raise ConfigError("pass exactly one of --checkpoint or --strategy")

    def fresh_strategy():
        if args.checkpoint is not None:
            return PolicyStrategy(load_checkpoint(args.checkpoint))
        return make_baseline(args.strategy)

    out_dir = _prepare_out_dir(args, cfg)
    _write_echo(cfg, out_dir)
    reports = []
    for run in range(args.runs):
        report = run_backtest(frame, fresh_strategy(), span, cfg.metrics)
        report.write_json(out_dir / f"report_run{run:02d}.json")
        report.write_equity_csv(out_dir / f"equity_run{run:02d}.csv")
        reports.append(report.to_json_dict())
    mean = _mean_report(reports)
    (out_dir / "mean_report.json").write_text(json.dumps(mean, indent=1),
                                              encoding="utf-8")
    sr = mean["sharpe"]
    print(f"AR {mean['ar_pct']:.4f}%  MDD {mean['mdd_pct']:.4f}%  "
          f"SR {'n/a' if sr is None else f'{sr:.4f}'}  "
          f"({args.runs} run(s), days {span[0]}..{span[1]}) -> {out_dir}")
    return 0


def cmd_dc_inspect(args) -> int:
    series = load_csv(args.asset_csv)
    rows = event_rows(series, args.threshold)
    header = ["asset_id", "direction", "confirm_date", "extreme_date", "threshold"]
    if args.out:
        with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {len(rows)} event(s) to {args.out}")
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    return 0


def cmd_synth(args) -> int:
    cfg = experiments.load_config(args.config)
    if cfg.data.synthetic is None:
        raise ConfigError("synth requires a [data.synthetic] section")
    frame = experiments.build_frame(replace(cfg, data=replace(cfg.data,
                                                              source="synthetic")))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for asset in frame.assets:
        write_csv(asset, out_dir / f"{asset.asset_id}.csv")
    print(f"wrote {frame.n_assets} asset file(s) to {out_dir}")
    return 0


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masaat",
        description="Multi-agent attention portfolio optimisation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a policy from a config")
    p_train.add_argument("--config", required=True, help="TOML or JSON config")
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.add_argument("--seed", type=int, default=None,
                         help="override trainer seed")
    p_train.set_defaults(func=cmd_train)

    p_bt = sub.add_parser("backtest", help="evaluate a checkpoint or baseline")
    p_bt.add_argument("--config", required=True)
    p_bt.add_argument("--checkpoint", default=None, help="policy checkpoint path")
    p_bt.add_argument("--strategy", default=None, help="crp, eg or pamr")
    p_bt.add_argument("--range", default=None, metavar="START:END",
                      help="ISO date range; defaults to the test split")
    p_bt.add_argument("--runs", type=int, default=1)
    p_bt.add_argument("--out", default=None)
    p_bt.set_defaults(func=cmd_backtest)

    p_dc = sub.add_parser("dc-inspect", help="emit DC events of one asset CSV")
    p_dc.add_argument("asset_csv")
    p_dc.add_argument("--threshold", type=float, required=True)
    p_dc.add_argument("--out", default=None, help="events CSV path (default stdout)")
    p_dc.set_defaults(func=cmd_dc_inspect)

    p_sy = sub.add_parser("synth", help="write synthetic asset CSVs")
    p_sy.add_argument("--config", required=True)
    p_sy.add_argument("--out", required=True, help="dataset directory")
    p_sy.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MasaatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
