"""One closed-loop learning episode on the virtual patient.

The loop: apply ``u = -K x`` (plus decaying probing) every plant step,
cut the trajectory into sampling windows of length ``T``, and every
``update_period`` windows fit the value kernel and update the gain. Any
critic rejection or LMI fallback keeps the current gain.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import actor as actor_mod
from ..critic import EstimateRejected, InsufficientDataError, TransitionSample, accumulate_cost, estimate_value, input_mismatch_terms
from ..plant import PlantState, applied_insulin, clip_to_guard, deviation_state, diverged, measure, mgdl_to_mmol, step
from ..plant import MGDL_PER_MMOL
from . import metrics as metrics_mod
from .config import ScenarioConfig

log = logging.getLogger(__name__)

COLUMNS = (
    "t_min",
    "g_mmol",
    "g_mgdl",
    "ghat_mgdl",
    "chi",
    "D1",
    "D2",
    "u_command",
    "i_applied",
    "K1",
    "K2",
    "alpha_certified",
)


@dataclass(frozen=True)
class UpdateEvent:
    t: float
    outcome: str  # accepted | fallback | no-estimate | diverged
    detail: str = ""
    alpha: float | None = None
    gamma1: float | None = None
    K: tuple = ()
    certified: bool = False


@dataclass
class EpisodeResult:
    config: ScenarioConfig
    series: np.ndarray  # rows follow COLUMNS
    metrics: metrics_mod.Metrics
    updates: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return self.series[:, COLUMNS.index(name)]


def _round_sig(a: np.ndarray, digits: int = 9) -> np.ndarray:
    """Values exactly as the CSV writer prints them."""
    flat = [float(f"{v:.{digits}g}") for v in a.ravel()]
    return np.array(flat).reshape(a.shape)


def series_metrics(series: np.ndarray, cfg: ScenarioConfig) -> metrics_mod.Metrics:
    col = {c: k for k, c in enumerate(COLUMNS)}
    return metrics_mod.compute(
        series[:, col["t_min"]],
        series[:, col["g_mgdl"]],
        cfg.g_target,
        cfg.meal_schedule().starts,
        g_mmol=series[:, col["g_mmol"]],
        chi=series[:, col["chi"]],
        u_command=series[:, col["u_command"]],
        i_b=cfg.patient.i_b,
    )


class _Window:
    """Plant-step records of the current sampling window."""

    def __init__(self):
        self.ts, self.xs, self.dv = [], [], []

    def reset(self, t, x):
        self.ts, self.xs, self.dv = [t], [x], []

    def push(self, t, x, dv):
        self.dv.append(dv)
        self.ts.append(t)
        self.xs.append(x)

    def sample(self, K, Q, R) -> TransitionSample:
        xs = np.array(self.xs)
        u_pol = -xs @ K.T
        d = accumulate_cost(self.ts, xs, u_pol, Q, R)
        corr = input_mismatch_terms(self.ts, xs, np.array(self.dv))
        return TransitionSample(self.ts[0], xs[0], xs[-1], d, corr)


def run_episode(cfg: ScenarioConfig) -> EpisodeResult:
    """Simulate ``cfg.duration`` minutes; deterministic for a fixed ``cfg.seed``."""
    p = cfg.patient_params()
    acfg = cfg.actor_config()
    noise = cfg.noise()
    meals = cfg.meal_schedule()
    # independent streams: process noise, measurement noise, probing
    rng_w, rng_v, rng_probe = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))
    g_target = mgdl_to_mmol(cfg.g_target)
    b = acfg.B[:, 0]

    steps = int(round(cfg.duration / cfg.dt))
    per_T = int(round(cfg.sample_interval_T / cfg.dt))
    state = PlantState(0.0, 0.0, mgdl_to_mmol(cfg.g_init), 0.0)
    policy = actor_mod.Policy(np.array(cfg.K0))
    # last certified gain; basal insulin only until the first certificate
    fallback_policy = actor_mod.Policy(np.zeros_like(policy.K))
    window = _Window()
    samples: list[TransitionSample] = []
    since_update = 0
    updates: list[UpdateEvent] = []
    series = np.empty((steps + 1, len(COLUMNS)))
    window_ok = True
    dv = None

    for k in range(steps + 1):
        t = k * cfg.dt
        ghat = measure(state.g, noise, rng_v)
        x = deviation_state(state, ghat, g_target)
        if k > 0:
            window.push(t, x, dv)

        if k % per_T == 0:
            if k > 0 and window_ok:
                samples.append(window.sample(policy.K, acfg.Q, acfg.R))
                del samples[: -cfg.sample_window]
                since_update += 1
            if since_update >= cfg.update_period:
                since_update = 0
                policy, changed, event = _update(cfg, acfg, samples, policy, x, t)
                updates.append(event)
                if changed:
                    samples.clear()
                    if event.certified:
                        fallback_policy = policy
            window.reset(t, x)
            window_ok = True

        u_pol = float(policy.action(x)[0])
        amp = cfg.probe.at(t)
        u_cmd = u_pol + (amp * rng_probe.uniform(-1.0, 1.0) if amp > 0 else 0.0)
        i_applied = applied_insulin(u_cmd, p)
        series[k] = (
            t,
            state.g,
            state.g * MGDL_PER_MMOL,
            ghat * MGDL_PER_MMOL,
            state.chi,
            state.D1,
            state.D2,
            u_cmd,
            i_applied,
            policy.K[0, 0],
            policy.K[0, 1],
            np.nan if policy.alpha_certified is None else policy.alpha_certified,
        )
        if k == steps:
            break

        state, _ = step(state, meals.rate(t), u_cmd, p, noise, rng_w, cfg.dt)
        # delivered input deviation minus what the policy asked for
        dv = b * (i_applied - p.i_b - u_pol)
        if diverged(state):
            if window_ok:
                updates.append(UpdateEvent(t + cfg.dt, "diverged", "state left the divergence guard; reverting gain"))
            policy = fallback_policy
            samples.clear()
            since_update = 0
            window_ok = False
            state = clip_to_guard(state)

    return EpisodeResult(cfg, series, series_metrics(_round_sig(series), cfg), updates)


def _update(cfg: ScenarioConfig, acfg, samples, policy, x_now, t):
    """Critic then actor; returns ``(policy, changed, event)``."""
    try:
        est = estimate_value(samples, cfg.critic_theta)
    except (InsufficientDataError, EstimateRejected) as exc:
        return policy, False, UpdateEvent(t, "no-estimate", str(exc))
    if cfg.controller == "optimal":
        new = actor_mod.optimal_update(est, acfg, policy.iteration + 1)
        return new, True, UpdateEvent(t, "accepted", "optimal", K=tuple(new.K.ravel()))
    record = actor_mod.UpdateRecord(acfg.mode)
    new = actor_mod.improve_policy(est, policy, x_now, acfg, record)
    if new is policy:
        return policy, False, UpdateEvent(t, "fallback", record.fallback_reason or "")
    return new, True, UpdateEvent(t, "accepted", record.mode, new.alpha_certified, record.gamma1, tuple(new.K.ravel()), True)
