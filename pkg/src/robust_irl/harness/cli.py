"""Command line: ``run``, ``suite`` and ``lint-config``.

Exit codes: 0 success, 1 acceptance violation (instability or
hypoglycemia in a robust run), 2 configuration or I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import config as config_mod
from . import io
from .config import ConfigError, ScenarioConfig
from .episode import run_episode
from .suite import exit_status, run_suite, violations

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robust-irl", description="Robust IRL glucose-control experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log policy updates")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one episode")
    run.add_argument("--config", metavar="PATH", help="JSON scenario config (defaults when omitted)")
    run.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--controller", choices=("robust", "optimal"))
    run.add_argument("--mode", choices=("general", "frequent"))

    suite = sub.add_parser("suite", help="run the 9-episode scenario suite")
    suite.add_argument("--config", metavar="PATH", help="base JSON config for every episode")
    suite.add_argument("--out", metavar="DIR", default="suite_out")
    suite.add_argument("--seed", type=int)
    suite.add_argument("--mode", choices=("general", "frequent"))
    suite.add_argument("--jobs", type=int, default=1, help="episodes run in parallel (default 1)")

    lint = sub.add_parser("lint-config", help="validate a config and print its normalized form")
    lint.add_argument("--config", metavar="PATH", required=True)
    return ap


def _load(args) -> ScenarioConfig:
    cfg = config_mod.load(args.config) if args.config else ScenarioConfig()
    return cfg.with_overrides(
        seed=args.seed,
        controller=getattr(args, "controller", None),
        mode=args.mode,
    )


def _cmd_run(args) -> int:
    cfg = _load(args)
    io.ensure_dir(args.out)
    result = run_episode(cfg)
    io.write_series(result, os.path.join(args.out, "episode.csv"))
    row = io.summary_row("episode", result, "episode.csv")
    io.write_summary([row], os.path.join(args.out, "summary.csv"))
    with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(config_mod.dumps(cfg))
    m = result.metrics
    print(
        f"settling={io.fmt(m.settling_time_min)} min  min_g={io.fmt(m.min_g_mgdl)} mg/dL  "
        f"hypo_events={m.hypo_events}  unstable={io.fmt(m.unstable_flag)}"
    )
    bad = violations(row)
    for b in bad:
        print(f"violation: {b}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def _cmd_suite(args) -> int:
    base = _load(args)
    rows, _ = run_suite(args.out, base, jobs=max(1, args.jobs))
    for r in rows:
        bad = violations(r)
        print(
            f"{r['episode']:<24} hypo={r['hypo_events']} unstable={io.fmt(r['unstable_flag'])} "
            f"settling={io.fmt(r['settling_time_min'])} peak={io.fmt(r['max_postprandial_g'])}"
            + (f"  VIOLATION: {', '.join(bad)}" if bad else "")
        )
    return exit_status(rows)


def _cmd_lint(args) -> int:
    cfg = config_mod.load(args.config)
    sys.stdout.write(config_mod.dumps(cfg))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "suite": _cmd_suite, "lint-config": _cmd_lint}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
