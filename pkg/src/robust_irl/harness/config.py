"""Scenario configuration and its strict JSON form.

The JSON document uses the dataclass field names verbatim. Nested
sections (``probe``, ``actor``, ``patient``) are objects with their own
field names. Unknown keys anywhere are rejected, and so are missing
required top-level fields.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..actor import ActorConfig
from ..matrix_core import sym_basis_dim
from ..plant import MealSchedule, NoiseSpec, PatientParams, default_meals, linearize, mgdl_to_mmol, noise_case


class ConfigError(ValueError):
    """Invalid scenario configuration (CLI exit code 2)."""


# printed initial law u = -0.27 g + 266 chi, i.e. K0 = [0.27, -266]
PRINTED_K0 = ((0.27, -266.0),)
# default initial gain; see README ("Initial gain")
DEFAULT_K0 = ((-0.003, 0.0),)

# episodes start at 06:00, so the default meals fall at t = 60, 360, 720 min
DAY_START_MIN = 360.0

REQUIRED = ("scenario", "noise_case", "controller", "g_init", "g_target")


@dataclass(frozen=True)
class ProbeConfig:
    """Uniform probing added to the command, amplitude decaying linearly to zero."""

    amplitude: float = 0.01  # uIU/ml
    decay: float = 60.0  # min

    def at(self, t: float) -> float:
        if self.decay <= 0:
            return 0.0
        return self.amplitude * max(0.0, 1.0 - t / self.decay)


@dataclass(frozen=True)
class ActorSettings:
    """Actor weights and solver knobs; ``B`` comes from the patient model."""

    Q: tuple = ((1.0, 0.0), (0.0, 1.0))
    R: tuple = ((1e-4,),)
    zeta: float | None = None  # None: 10 * ||K0||_2^2
    # wider than the actor's own default: the useful gamma1 sits near
    # beta / ||B K||, which is large for this plant
    gamma1_grid: tuple = (1e-2, 1.0, 1e2, 1e4, 1e6)
    alpha_max: float = 1.0
    alpha_tol: float = 1e-3
    mode: str = "general"
    eps: float = 1e-6
    iter_cap: int = 500


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float = 240.0  # min
    dt: float = 0.1  # min
    sample_interval_T: float = 1.0  # min
    update_period: int = 10  # samples per policy update
    scenario: str = "fasting"  # fasting | meals
    meals: tuple = ()  # (start_min, duration_min, rate_mmol_per_min); empty -> default schedule
    noise_case: int | dict = 1  # 1..4 or {"sigma_w": .., "sigma_v": ..}
    controller: str = "robust"  # robust | optimal
    g_init: float = 290.0  # mg/dL
    g_target: float = 90.0  # mg/dL
    g_basal: float | None = None  # mg/dL; None -> g_target
    K0: tuple = DEFAULT_K0
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    actor: ActorSettings = field(default_factory=ActorSettings)
    critic_theta: float = 0.05
    seed: int = 0
    patient: PatientParams = field(default_factory=PatientParams)
    sample_window: int = 40  # most recent samples kept for one estimate

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        K0 = np.atleast_2d(np.asarray(self.K0, dtype=float))
        object.__setattr__(self, "K0", tuple(tuple(float(v) for v in row) for row in K0))
        object.__setattr__(self, "meals", tuple(tuple(float(v) for v in m) for m in self.meals))
        if self.patient.g_basal != 0.0:
            raise ConfigError("set g_basal on the scenario (mg/dL), not on patient")
        n = 2
        if K0.shape != (1, n):
            raise ConfigError(f"K0: expected a 1x{n} gain, got shape {K0.shape}")
        if not self.duration > 0:
            raise ConfigError("duration: must be positive")
        if not self.dt > 0:
            raise ConfigError("dt: must be positive")
        if self.dt > self.sample_interval_T:
            raise ConfigError("dt: must not exceed sample_interval_T")
        if self.duration < self.sample_interval_T:
            raise ConfigError("duration: shorter than one sampling interval")
        for name in ("duration", "sample_interval_T"):
            ratio = getattr(self, name) / self.dt
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise ConfigError(f"{name}: must be a whole number of dt steps")
        need = sym_basis_dim(n) + 1
        if int(self.update_period) != self.update_period or self.update_period < need:
            raise ConfigError(f"update_period: need an integer >= {need} samples")
        if self.sample_window < self.update_period:
            raise ConfigError("sample_window: must be at least update_period")
        if self.scenario not in ("fasting", "meals"):
            raise ConfigError(f"scenario: expected 'fasting' or 'meals', got {self.scenario!r}")
        if self.controller not in ("robust", "optimal"):
            raise ConfigError(f"controller: expected 'robust' or 'optimal', got {self.controller!r}")
        if self.actor.mode not in ("general", "frequent"):
            raise ConfigError(f"actor.mode: expected 'general' or 'frequent', got {self.actor.mode!r}")
        if not 0 < self.critic_theta < 1:
            raise ConfigError("critic_theta: must lie in (0, 1)")
        if self.g_init <= 0 or self.g_target <= 0 or (self.g_basal is not None and self.g_basal < 0):
            raise ConfigError("g_init, g_target must be positive and g_basal nonnegative")
        if self.probe.amplitude < 0 or self.probe.decay < 0:
            raise ConfigError("probe: amplitude and decay must be nonnegative")
        self.noise()
        self.meal_schedule()
        self.actor_config()

    # derived objects

    def noise(self) -> NoiseSpec:
        nc = self.noise_case
        if isinstance(nc, dict):
            extra = set(nc) - {"sigma_w", "sigma_v"}
            if extra:
                raise ConfigError(f"noise_case: unknown keys {sorted(extra)}")
            return NoiseSpec(float(nc.get("sigma_w", 0.0)), float(nc.get("sigma_v", 0.0)), self.seed)
        if isinstance(nc, bool) or not isinstance(nc, int):
            raise ConfigError(f"noise_case: expected 1..4 or an object, got {nc!r}")
        try:
            return noise_case(nc, self.seed)
        except ValueError as exc:
            raise ConfigError(f"noise_case: {exc}") from None

    def meal_schedule(self) -> MealSchedule:
        if self.scenario == "fasting":
            return MealSchedule(())
        if not self.meals:
            return default_meals(offset=-DAY_START_MIN)
        return MealSchedule(self.meals)

    def patient_params(self) -> PatientParams:
        gb = self.g_target if self.g_basal is None else self.g_basal
        return replace(self.patient, g_basal=mgdl_to_mmol(gb))

    def actor_config(self) -> ActorConfig:
        a = self.actor
        p = self.patient_params()
        B = linearize(p, mgdl_to_mmol(self.g_target), 0.0).B
        K0 = np.asarray(self.K0)
        zeta = a.zeta if a.zeta is not None else 10.0 * np.linalg.norm(K0, 2) ** 2
        return ActorConfig(
            Q=np.asarray(a.Q, dtype=float),
            R=np.asarray(a.R, dtype=float),
            B=B,
            zeta=float(zeta),
            gamma1_grid=tuple(a.gamma1_grid),
            alpha_max=a.alpha_max,
            alpha_tol=a.alpha_tol,
            mode=a.mode,
            eps=a.eps,
            iter_cap=a.iter_cap,
        )

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with top-level fields replaced; ``mode`` goes to the actor section."""
        mode = kw.pop("mode", None)
        cfg = replace(self, **{k: v for k, v in kw.items() if v is not None})
        if mode is not None:
            cfg = replace(cfg, actor=replace(cfg.actor, mode=mode))
        return cfg


# JSON

_SECTIONS = {"probe": ProbeConfig, "actor": ActorSettings, "patient": PatientParams}
_PATIENT_KEYS = tuple(f.name for f in fields(PatientParams) if f.name != "g_basal")


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _section(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    allowed = _PATIENT_KEYS if cls is PatientParams else tuple(f.name for f in fields(cls))
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {', '.join(unknown)}")
    try:
        return cls(**{k: _tuplify(v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at top level")
    names = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    kw = {}
    for k, v in data.items():
        if k in _SECTIONS:
            kw[k] = _section(k, _SECTIONS[k], v)
        elif k == "noise_case" and isinstance(v, dict):
            kw[k] = dict(v)
        else:
            kw[k] = _tuplify(v)
    try:
        return ScenarioConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def to_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["patient"] = {k: d["patient"][k] for k in _PATIENT_KEYS}

    def listify(v):
        if isinstance(v, (tuple, list)):
            return [listify(x) for x in v]
        if isinstance(v, dict):
            return {k: listify(x) for k, x in v.items()}
        return v

    return listify(d)


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(data)


def dumps(cfg: ScenarioConfig) -> str:
    d = to_dict(cfg)
    for v in _walk(d):
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError("configuration contains a non-finite number")
    return json.dumps(d, indent=2) + "\n"


def _walk(v):
    if isinstance(v, dict):
        for x in v.values():
            yield from _walk(x)
    elif isinstance(v, list):
        for x in v:
            yield from _walk(x)
    else:
        yield v


def load(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)
