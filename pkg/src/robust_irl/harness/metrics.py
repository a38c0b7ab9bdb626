"""Episode metrics computed from the true-glucose series (mg/dL)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..plant import DIVERGENCE_CHI, DIVERGENCE_G, MGDL_PER_MMOL

HYPO_MGDL = 70.0
SETTLING_BAND_MGDL = 10.0
SETTLING_DWELL_MIN = 30.0
POSTPRANDIAL_WINDOW_MIN = 180.0


@dataclass(frozen=True)
class Metrics:
    settling_time_min: float  # nan when the band is never held for the dwell time
    min_g_mgdl: float
    max_postprandial_g: float  # nan without meals
    hypo_events: int
    unstable_flag: bool
    deep_clamp_fraction: float  # share of near-target steps whose command asks for negative total insulin


def settling_time(t, g, target, band=SETTLING_BAND_MGDL, dwell=SETTLING_DWELL_MIN) -> float:
    """Earliest ``t_s`` with ``|g - target| <= band`` on all of ``[t_s, t_s + dwell]``."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(np.asarray(g, dtype=float) - target) <= band
    start = None
    for k in range(t.size):
        if not inside[k]:
            start = None
            continue
        if start is None:
            start = k
        if t[k] - t[start] >= dwell - 1e-9:
            return float(t[start])
    return math.nan


def hypo_events(g, threshold=HYPO_MGDL) -> int:
    """Number of maximal runs strictly below ``threshold``."""
    below = np.asarray(g, dtype=float) < threshold
    if below.size == 0:
        return 0
    starts = below[1:] & ~below[:-1]
    return int(starts.sum() + below[0])


def max_postprandial(t, g, meal_starts, window=POSTPRANDIAL_WINDOW_MIN) -> float:
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    peaks = []
    for s in meal_starts:
        sel = (t >= s) & (t <= s + window)
        if sel.any():
            peaks.append(float(g[sel].max()))
    return max(peaks) if peaks else math.nan


def unstable(g_mmol, chi) -> bool:
    """Whether any state in the series trips the plant's divergence guard."""
    g_mmol = np.asarray(g_mmol, dtype=float)
    chi = np.asarray(chi, dtype=float)
    bad = (np.abs(g_mmol) >= DIVERGENCE_G) | (np.abs(chi) >= DIVERGENCE_CHI) | ~np.isfinite(g_mmol) | ~np.isfinite(chi)
    return bool(bad.any())


def deep_clamp_fraction(g_mgdl, u_command, target_mgdl, i_b, band=SETTLING_BAND_MGDL) -> float:
    """Among steps with ``|g - target| <= band``, the share with ``u_command < -i_b``.

    Such a command requests a negative absolute insulin concentration, so
    the nonnegativity clamp is doing all the work. ``nan`` when the band is
    never visited.
    """
    g = np.asarray(g_mgdl, dtype=float)
    u = np.asarray(u_command, dtype=float)
    near = np.abs(g - target_mgdl) <= band
    if not near.any():
        return math.nan
    return float(np.mean(u[near] < -i_b))


def compute(t, g_mgdl, target_mgdl, meal_starts=(), g_mmol=None, chi=None, u_command=None, i_b=None) -> Metrics:
    g = np.asarray(g_mgdl, dtype=float)
    if g.size == 0:
        raise ValueError("empty series")
    clamp = math.nan if u_command is None else deep_clamp_fraction(g, u_command, target_mgdl, i_b)
    flag = False if chi is None else unstable(g_mmol if g_mmol is not None else g / MGDL_PER_MMOL, chi)
    return Metrics(
        settling_time_min=settling_time(t, g, target_mgdl),
        min_g_mgdl=float(g.min()),
        max_postprandial_g=max_postprandial(t, g, meal_starts),
        hypo_events=hypo_events(g),
        unstable_flag=flag,
        deep_clamp_fraction=clamp,
    )
