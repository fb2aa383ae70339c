"""Command line entry point: ``multilink {link,simulate,evaluate}``.

Exit status: 0 on success, 1 for configuration or input problems, 2 when
the fit is numerically unusable.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .errors import LinkageError
from .evaluation import DEFAULT_MODE, MODES

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2

logger = logging.getLogger("multilink")


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", type=Path, required=config_required, help="YAML run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--verbose", "-v", action="count", default=0, help="more logging (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multilink", description="Multiple record linkage of K datafiles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("link", help="link K CSV datafiles")
    _common(p)

    p = sub.add_parser("simulate", help="run a synthetic scenario sweep")
    _common(p)
    p.add_argument("--replications", type=int, help="override the number of replications")
    p.add_argument("--emit-data", action="store_true",
                   help="also write one observed instance (first beta, replication 0) with its truth")

    p = sub.add_parser("evaluate", help="score an assignments CSV against a ground truth CSV")
    _common(p, config_required=False)
    p.add_argument("--assignments", type=Path, help="assignments CSV written by 'link'")
    p.add_argument("--truth", type=Path, help="ground truth CSV (file_id, record_id, entity_id)")
    p.add_argument("--mode", choices=MODES, help=f"undeclared accounting (default {DEFAULT_MODE})")
    return parser


def _cmd_link(args) -> int:
    from .pipeline import LinkageConfig, run_link

    cfg = LinkageConfig.from_yaml(args.config)
    report = run_link(cfg, out=args.out, seed=args.seed)
    print(f"n={report['n']} blocked={report['fully_blocked_count']} "
          f"undeclared={report['undeclared']} converged={report['converged']}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from dataclasses import replace

    from .pipeline import SweepConfig, run_simulation

    sweep = SweepConfig.from_yaml(args.config)
    if args.replications is not None:
        sweep = replace(sweep, replications=args.replications)
    result = run_simulation(sweep, out=args.out, threads=args.threads, seed=args.seed,
                            emit_data=args.emit_data)
    for row in result.summary_rows():
        if row["metric"] == "MWGE":
            print(f"{row['scenario_id']}: MWGE={row['mean']:.4f} (se {row['se']:.4f}, n={row['n']})")
    if result.failures():
        print(f"{len(result.failures())} replication(s) failed; see failures.csv")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .errors import ConfigError
    from .pipeline import run_evaluate

    doc = {}
    if args.config is not None:
        try:
            doc = yaml.safe_load(args.config.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    base = args.config.parent if args.config is not None else Path(".")
    assignments = args.assignments or (base / doc["assignments"] if "assignments" in doc else None)
    truth = args.truth or (base / doc["truth"] if "truth" in doc else None)
    if assignments is None or truth is None:
        raise ConfigError("evaluate needs --assignments and --truth (or both keys in --config)")
    out = args.out or (base / doc["out"] if "out" in doc else None)
    rows = run_evaluate(assignments, truth, args.mode or doc.get("mode", DEFAULT_MODE), out)
    for r in rows:
        if r["class"] == "all":
            print(f"{r['metric']}={r['value']:.6f}")
    return EXIT_OK


COMMANDS = {"link": _cmd_link, "simulate": _cmd_simulate, "evaluate": _cmd_evaluate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LinkageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
