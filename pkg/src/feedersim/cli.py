"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import DataError, FeederSimError
from .feeder import default_feeder
from .ingest import load_prices, load_scenario_config, load_weather, parse_timestamp
from .report import (
    run_baseline, run_comparison, run_label_dir, run_steered, summary_rows,
    write_run_csvs,
)
from .scenario import generate_scenario, load_scenario, save_scenario
from .steering import SteeringRunConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="feedersim",
                     description="Demand-side management comparison on a "
                                 "residential low-voltage feeder")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a frozen scenario file",
                         add_help=True)
    gen.add_argument("--config", required=True)
    gen.add_argument("--weather", required=True)
    gen.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run one configuration on a frozen scenario")
    run.add_argument("--scenario", required=True)
    run.add_argument("--prices", required=True)
    run.add_argument("--weather", required=True)
    run.add_argument("--alpha", required=True,
                     help="steering weight in [0, 1], or 'baseline'")
    run.add_argument("--out", required=True)
    run.add_argument("--window", default=None,
                     help="restrict CSV output to START,END (ISO-8601 UTC)")

    cmp_ = sub.add_parser("compare", help="run baseline plus all configured alphas")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--weather", required=True)
    cmp_.add_argument("--prices", required=True)
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--window", default=None,
                      help="restrict CSV output to START,END (ISO-8601 UTC)")
    return parser


def _parse_window(text):
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError("--window expects START,END")
    try:
        return (parse_timestamp(parts[0], "--window start"),
                parse_timestamp(parts[1], "--window end"))
    except DataError as exc:
        raise UsageError(str(exc)) from None


def _parse_alpha(text):
    if text == "baseline":
        return "baseline"
    try:
        alpha = float(text)
    except ValueError:
        raise UsageError(f"--alpha must be a number in [0, 1] or 'baseline', "
                         f"got '{text}'") from None
    if not 0.0 <= alpha <= 1.0:
        raise UsageError(f"--alpha must be in [0, 1], got {alpha}")
    return alpha


def _cmd_generate(args) -> int:
    config = load_scenario_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    weather = load_weather(args.weather, config.grid())
    households = generate_scenario(config, weather, np.random.default_rng(config.seed))
    save_scenario(args.out, config, households)
    print(f"wrote {args.out}: {len(households)} households, seed {config.seed}")
    return 0


def _cmd_run(args) -> int:
    alpha = _parse_alpha(args.alpha)
    window = _parse_window(args.window)
    config, households = load_scenario(args.scenario)
    grid = config.grid()
    weather = load_weather(args.weather, grid)
    prices = load_prices(args.prices, grid)
    feeder = default_feeder(config.n_houses, config.feeder.segment_resistance_ohm,
                            config.feeder.v_nominal_v)
    if alpha == "baseline":
        report = run_baseline(households, weather, prices, feeder)
    else:
        cfg = SteeringRunConfig(alpha=alpha, block_len=config.block_len,
                                epsilon_w=config.epsilon_w,
                                max_iters=config.max_iters,
                                split_deviation=config.split_deviation)
        report = run_steered(households, weather, prices, feeder, cfg)
    from pathlib import Path

    run_dir = Path(args.out) / run_label_dir(report.label)
    write_run_csvs(report, run_dir, window)
    summary = summary_rows([report], prices, config)
    (Path(args.out) / "summary.csv").write_text("\n".join(summary) + "\n",
                                                encoding="utf-8")
    print(f"{report.label}: peak {report.substation_peak_w:.0f} W, "
          f"losses {report.total_losses_kwh:.2f} kWh "
          f"({report.runtime_s:.1f} s)")
    return 0


def _cmd_compare(args) -> int:
    window = _parse_window(args.window)
    reports = run_comparison(args.config, args.weather, args.prices, args.out,
                             window)
    for r in reports:
        print(f"{r.label}: peak {r.substation_peak_w:.0f} W, "
              f"losses {r.total_losses_kwh:.2f} kWh ({r.runtime_s:.1f} s)")
    print(f"wrote {args.out}/summary.csv")
    return 0


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_compare(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FeederSimError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
