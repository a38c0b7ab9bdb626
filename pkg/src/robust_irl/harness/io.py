"""CSV output with a fixed column contract and 9 significant digits."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict

import numpy as np

from .episode import COLUMNS, EpisodeResult

DIGITS = 9

SUMMARY_COLUMNS = (
    "episode",
    "scenario",
    "noise_case",
    "controller",
    "mode",
    "seed",
    "settling_time_min",
    "min_g_mgdl",
    "max_postprandial_g",
    "hypo_events",
    "unstable_flag",
    "deep_clamp_fraction",
    "updates_accepted",
    "updates_fallback",
    "csv_file",
)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.{DIGITS}g}"
    return str(v)


def _open(path, mode):
    try:
        return open(path, mode, newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot open {path}: {exc.strerror}") from None


def write_series(result: EpisodeResult, path) -> None:
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in result.series:
            w.writerow([fmt(float(v)) for v in row])


def read_series(path) -> np.ndarray:
    with _open(path, "r") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return np.array([[float(v) for v in row] for row in r])


def summary_row(name: str, result: EpisodeResult, csv_file: str = "") -> dict:
    cfg = result.config
    m = asdict(result.metrics)
    nc = cfg.noise_case if isinstance(cfg.noise_case, int) else "custom"
    row = {
        "episode": name,
        "scenario": cfg.scenario,
        "noise_case": nc,
        "controller": cfg.controller,
        "mode": cfg.actor.mode if cfg.controller == "robust" else "",
        "seed": cfg.seed,
        **m,
        "updates_accepted": sum(e.outcome == "accepted" for e in result.updates),
        "updates_fallback": sum(e.outcome in ("fallback", "no-estimate") for e in result.updates),
        "csv_file": csv_file,
    }
    return {k: row[k] for k in SUMMARY_COLUMNS}


def write_summary(rows, path) -> None:
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([fmt(row[k]) for k in SUMMARY_COLUMNS])


def read_summary(path) -> list:
    with _open(path, "r") as fh:
        return list(csv.DictReader(fh))


def ensure_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory {path}: {exc.strerror}") from None
