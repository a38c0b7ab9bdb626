"""The scenario suite: fasting and meals under noise cases 1-4, plus the optimal baseline."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .config import ScenarioConfig
from .episode import EpisodeResult, run_episode
from . import io

MEAL_DURATION = 900.0  # 06:00 to 21:00 covers the three default meals plus 3 h


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    config: ScenarioConfig


def suite_entries(base: ScenarioConfig | None = None) -> list:
    base = base or ScenarioConfig()
    out = []
    for scenario in ("fasting", "meals"):
        for case in (1, 2, 3, 4):
            cfg = replace(base, scenario=scenario, noise_case=case, controller="robust")
            if scenario == "meals":
                cfg = replace(cfg, duration=max(base.duration, MEAL_DURATION))
            out.append(SuiteEntry(f"{scenario}_case{case}_robust", cfg))
    out.append(SuiteEntry("fasting_case1_optimal", replace(base, scenario="fasting", noise_case=1, controller="optimal")))
    return out


def violations(row: dict) -> list:
    """Acceptance violations of one robust summary row (empty for the baseline)."""
    if row["controller"] != "robust":
        return []
    bad = []
    if row["unstable_flag"]:
        bad.append("unstable")
    if row["hypo_events"]:
        bad.append(f"{row['hypo_events']} hypoglycemia event(s)")
    return bad


def run_suite(out_dir, base: ScenarioConfig | None = None, jobs: int = 1):
    """Run every entry, write one CSV per episode and ``summary.csv``.

    Returns ``(rows, results)``; rows are in suite order whatever ``jobs`` is.
    """
    entries = suite_entries(base)
    io.ensure_dir(out_dir)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_episode, [e.config for e in entries]))
    else:
        results = [run_episode(e.config) for e in entries]
    rows = []
    for entry, result in zip(entries, results):
        fname = f"{entry.name}.csv"
        io.write_series(result, os.path.join(out_dir, fname))
        rows.append(io.summary_row(entry.name, result, fname))
    io.write_summary(rows, os.path.join(out_dir, "summary.csv"))
    return rows, results


def exit_status(rows) -> int:
    return 1 if any(violations(r) for r in rows) else 0
