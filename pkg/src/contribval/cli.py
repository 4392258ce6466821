"""Command-line entry points: ``run``, ``value`` and ``sweep``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .estimators import ESTIMATOR_IDS, NORMALIZATION_MODES, estimate
from .games import GAME_CATALOG, MAX_EXACT_PLAYERS, GameError, exact_banzhaf, exact_shapley, normalize, standard_games
from .idx import IdxFormatError
from .results import ResultsWriteError, write_results
from .sim import run_experiment

SWEEP_PARAMS = {"epsilon": float, "Q": int}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="contribval", description="Contribution valuation for federated learning.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a full experiment from a config file")
    run.add_argument("config")
    run.add_argument("--output-dir", help="override output_dir from the config")

    val = sub.add_parser("value", help="compare an estimator with the exact values on a test game")
    val.add_argument("--game", choices=GAME_CATALOG, default="majority")
    val.add_argument("--n", type=int, default=5)
    val.add_argument("--estimator", choices=ESTIMATOR_IDS, default="owen")
    val.add_argument("--Q", type=int, default=2)
    val.add_argument("--M", type=int, default=100)
    val.add_argument("--eta", type=float, default=0.0)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--mode", choices=NORMALIZATION_MODES, default="visited")
    val.add_argument("--game-seed", type=int, default=0, help="seed for the random game families")

    sw = sub.add_parser("sweep", help="rerun an experiment for several values of one parameter")
    sw.add_argument("config")
    sw.add_argument("--param", choices=sorted(SWEEP_PARAMS), required=True)
    sw.add_argument("--values", required=True, help="comma-separated values, e.g. 1,2,4,8")
    sw.add_argument("--output-dir", help="override output_dir from the config")
    return p


def _read_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise UsageError(f"invalid config {path}:\n{exc}") from None


def cmd_run(args) -> int:
    cfg = _read_config(args.config)
    if args.output_dir:
        cfg = cfg.replace(output_dir=args.output_dir)
    report = run_experiment(cfg)
    write_results(report, cfg.output_dir)
    for run in report.runs:
        print(f"seed {run.seed}: final accuracy {run.final_accuracy:.4f} ({run.utility_calls} utility calls)")
    print(f"mean {report.mean_final_accuracy:.4f} std {report.std_final_accuracy:.4f} -> {cfg.output_dir}")
    return 0


def cmd_value(args) -> int:
    game = standard_games(args.game, args.n, seed=args.game_seed)
    norm = normalize(game)
    est = estimate(args.estimator, norm, M=args.M, seed=args.seed, Q=args.Q, eta=args.eta, mode=args.mode)
    label = "banzhaf/2" if args.estimator == "banzhaf" else "shapley"
    print(f"game={args.game} n={args.n} estimator={args.estimator} evaluations={est.evals_used}")
    if args.n > MAX_EXACT_PLAYERS:
        print(f"(exact values skipped: enumeration needs n <= {MAX_EXACT_PLAYERS})")
        for i, e in enumerate(est.values):
            print(f"{i:>6} {e:>12.6f}")
        return 0
    if args.estimator == "banzhaf":
        exact = exact_banzhaf(norm).values / 2.0
    else:
        exact = exact_shapley(norm).values
    print(f"{'player':>6} {'estimate':>12} {label:>12} {'abs err':>10}")
    for i, (e, x) in enumerate(zip(est.values, exact)):
        print(f"{i:>6} {e:>12.6f} {x:>12.6f} {abs(e - x):>10.2e}")
    print(f"max abs error {np.max(np.abs(np.asarray(est.values) - exact)):.3e}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _read_config(args.config)
    kind = SWEEP_PARAMS[args.param]
    try:
        values = [kind(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values: cannot parse {args.values!r} as {kind.__name__} list") from None
    if not values:
        raise UsageError("--values: empty list")
    root = Path(args.output_dir or cfg.output_dir)
    for v in values:
        try:
            sub = cfg.replace(**{args.param: v})
        except ConfigError as exc:
            raise UsageError(f"{args.param}={v}: {exc}") from None
        report = run_experiment(sub)
        out = root / f"{args.param}={v}"
        write_results(report, out)
        print(f"{args.param}={v}: mean final accuracy {report.mean_final_accuracy:.4f} -> {out}")
    return 0


COMMANDS = {"run": cmd_run, "value": cmd_value, "sweep": cmd_sweep}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, GameError, IdxFormatError, ResultsWriteError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
