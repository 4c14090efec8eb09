"""Command-line front end.

Subcommands::

    rmslam run    [--config PATH] [--seed N] [--estimator E] [--exploit-extent on|off] [--out DIR]
    rmslam mc     [--config PATH] [--seed N] [--trials N] [--workers N] [...same flags]
    rmslam export --in DIR [--format csv,json,svg] [--out DIR]
    rmslam record [--config PATH] [--seed N] --out FILE

``run`` and ``mc`` write ``series.csv`` and ``summary.json`` (plus
``plots.svg`` unless ``--no-plots``) into the output directory. ``export``
regenerates any of those files from an existing ``series.csv`` and
``summary.json``. ``record`` writes the simulated scenario and scan stream as
line-delimited JSON for replay.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, apply_overrides, load_config


def _add_run_flags(p: argparse.ArgumentParser, trials: bool) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=int, help="(base) seed")
    if trials:
        p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
        p.add_argument("--workers", type=int, help="worker processes (trial-level)")
    p.add_argument("--estimator", choices=("rma", "efa", "both"))
    p.add_argument("--exploit-extent", choices=("on", "off"))
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--no-plots", action="store_true", help="skip plots.svg")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmslam", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="single trial"), trials=False)
    _add_run_flags(sub.add_parser("mc", help="Monte Carlo over consecutive seeds"), trials=True)
    ex = sub.add_parser("export", help="re-export a saved report")
    ex.add_argument("--in", dest="inp", type=Path, required=True, help="directory with series.csv/summary.json")
    ex.add_argument("--format", default="csv,json,svg", help="comma-separated subset of csv,json,svg")
    ex.add_argument("--out", type=Path, help="output directory (default: --in)")
    rec = sub.add_parser("record", help="write the simulated scan stream as JSON lines")
    rec.add_argument("--config", type=Path)
    rec.add_argument("--seed", type=int)
    rec.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    rec.add_argument("--out", type=Path, required=True, help="output .jsonl file")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    kv: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip()] = v.strip()
    for flag, key in (
        ("seed", "seed"),
        ("trials", "trials"),
        ("workers", "workers"),
        ("estimator", "estimator"),
        ("exploit_extent", "exploit_extent"),
        ("out", "out"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            kv[key] = str(val)
    return apply_overrides(cfg, kv)


def _cmd_run(args, trials: bool) -> int:
    from .harness import aggregate, export, run_monte_carlo, run_trial

    cfg = resolve_config(args)
    if trials:
        report = run_monte_carlo(cfg)
    else:
        report = aggregate(cfg, [run_trial(cfg, cfg.seed)])
    formats = ("csv", "json") if args.no_plots else ("csv", "json", "svg")
    paths = export(report, cfg.out, formats)
    s = report.summary
    print(
        f"trials={s['trials']} pos_rmse={s['pos_rmse']:.4f} m "
        f"heading_rmse={s['heading_rmse_deg']:.4f} deg "
        f"gwd_rma={s['gwd_rmse_rma']} gwd_efa={s['gwd_rmse_efa']}"
    )
    for p in paths:
        print(p)
    return 0


def _cmd_export(args) -> int:
    from .harness import export, read_csv

    report = read_csv(args.inp / "series.csv")
    summary_path = args.inp / "summary.json"
    if summary_path.exists():
        report.summary = json.loads(summary_path.read_text(encoding="utf-8"))
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    bad = [f for f in formats if f not in ("csv", "json", "svg")]
    if bad:
        raise ConfigError(f"unknown export format(s): {', '.join(bad)}")
    for p in export(report, args.out or args.inp, formats):
        print(p)
    return 0


def _cmd_record(args) -> int:
    from .simulator import build_carpark, generate_scans, write_records

    args.trials = args.workers = args.estimator = args.exploit_extent = None
    cfg = resolve_config(args)
    scenario = build_carpark(cfg.seed, cfg.sim)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_records(args.out, scenario, generate_scans(scenario))
    print(args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "run":
            return _cmd_run(args, trials=False)
        if args.command == "mc":
            return _cmd_run(args, trials=True)
        if args.command == "export":
            return _cmd_export(args)
        if args.command == "record":
            return _cmd_record(args)
    except ConfigError as exc:
        print(f"rmslam: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"rmslam: error: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
