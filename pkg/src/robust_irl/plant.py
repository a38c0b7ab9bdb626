"""Glucose-kinetics virtual patient.

States: gut compartments ``D1, D2`` (mmol), plasma glucose ``g`` (mmol/l)
and insulin action ``chi`` (1/min). Inputs: carbohydrate rate ``D``
(mmol/min) and plasma insulin ``i`` (uIU/ml), with ``i >= i_b`` enforced by
:func:`step`.

``g_basal`` adds endogenous production ``p1 * g_basal`` so the fasting,
basal-insulin equilibrium sits at ``g_basal``. With the default of 0 the
glucose equation is ``dg = -p1 g - chi g + D2/tau_D`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix_core import LinearModel

MGDL_PER_MMOL = 18.016

G_FLOOR = 1e-6
DIVERGENCE_G = 100.0  # mmol/l
DIVERGENCE_CHI = 10.0  # 1/min


@dataclass(frozen=True)
class PatientParams:
    p1: float = 0.2
    p2: float = 0.028
    p3: float = 1e-4
    A_G: float = 0.8
    tau_D: float = 10.0
    V_plasma: float = 2730.0
    i_b: float = 7.326
    g_basal: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "A_G", "tau_D", "V_plasma", "i_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.g_basal < 0:
            raise ValueError("g_basal must be nonnegative")

    @property
    def insulin_gain(self) -> float:
        """``p3 * V``: how strongly excess insulin drives ``chi``."""
        return self.p3 * self.V_plasma


@dataclass(frozen=True)
class PlantState:
    D1: float
    D2: float
    g: float
    chi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.D1, self.D2, self.g, self.chi])

    @classmethod
    def from_array(cls, a) -> "PlantState":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class NoiseSpec:
    sigma_w: float = 0.0
    sigma_v: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_w < 0 or self.sigma_v < 0:
            raise ValueError("noise standard deviations must be nonnegative")


# process / measurement noise standard deviations of the four uncertainty cases
NOISE_CASES = {1: (0.0, 0.0), 2: (0.0, 0.002), 3: (0.1, 0.1), 4: (0.1, 1.0)}


def noise_case(case: int, seed: int = 0) -> NoiseSpec:
    try:
        w, v = NOISE_CASES[case]
    except KeyError:
        raise ValueError(f"unknown noise case {case}; expected one of {sorted(NOISE_CASES)}") from None
    return NoiseSpec(w, v, seed)


@dataclass(frozen=True)
class MealSchedule:
    """Square carbohydrate pulses: ``(start_min, duration_min, rate_mmol_per_min)``."""

    meals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        meals = tuple(sorted((float(s), float(d), float(r)) for s, d, r in self.meals))
        for s, d, r in meals:
            if d <= 0 or r < 0:
                raise ValueError(f"bad meal entry {(s, d, r)}")
        for (s0, d0, _), (s1, _, _) in zip(meals, meals[1:]):
            if s0 + d0 > s1:
                raise ValueError("meal entries overlap")
        object.__setattr__(self, "meals", meals)

    def rate(self, t: float) -> float:
        for s, d, r in self.meals:
            if s <= t < s + d:
                return r
        return 0.0

    @property
    def starts(self) -> list:
        return [s for s, _, _ in self.meals]

    def total(self) -> float:
        return sum(d * r for _, d, r in self.meals)


def default_meals(rate: float = 4.0, duration: float = 15.0, offset: float = 0.0) -> MealSchedule:
    """Breakfast, lunch and dinner at 07:00, 12:00 and 18:00 (minutes after ``offset``)."""
    return MealSchedule(tuple((offset + h * 60.0, duration, rate) for h in (7, 12, 18)))


def derivatives(s, D: float, i: float, p: PatientParams) -> np.ndarray:
    """Right-hand side of the noise-free model; ``s`` is a state or ``[D1, D2, g, chi]``."""
    D1, D2, g, chi = s.as_array() if isinstance(s, PlantState) else s
    dD1 = p.A_G * D - D1 / p.tau_D
    dD2 = D1 / p.tau_D - D2 / p.tau_D
    dg = -p.p1 * (g - p.g_basal) - chi * g + D2 / p.tau_D
    dchi = -p.p2 * chi + p.insulin_gain * (i - p.i_b)
    return np.array([dD1, dD2, dg, dchi])


def rk4(f, y, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def applied_insulin(u_command: float, p: PatientParams) -> float:
    return p.i_b + max(0.0, float(u_command))


def step(s: PlantState, D: float, u_command: float, p: PatientParams, noise: NoiseSpec, rng, dt: float):
    """Advance one fixed step; returns ``(new_state, i_applied)``.

    The insulin excess is clamped at zero, the drift is integrated with RK4
    (inputs held over the step), process noise is added to ``g`` as a
    ``sigma_w * sqrt(dt)`` Gaussian increment, and ``g`` is floored at 1e-6.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    i = applied_insulin(u_command, p)
    y = rk4(lambda v: derivatives(v, D, i, p), s.as_array(), dt)
    if noise.sigma_w > 0:
        y[2] += noise.sigma_w * np.sqrt(dt) * rng.standard_normal()
    y[0] = max(y[0], 0.0)
    y[1] = max(y[1], 0.0)
    y[2] = max(y[2], G_FLOOR)
    return PlantState.from_array(y), i


def measure(g: float, noise: NoiseSpec, rng) -> float:
    if noise.sigma_v == 0:
        return float(g)
    return float(g + noise.sigma_v * rng.standard_normal())


def deviation_state(s: PlantState, g_meas: float, g_target: float) -> np.ndarray:
    """Controller view ``[g_meas - g_target, chi]``; ``chi`` is read directly."""
    return np.array([g_meas - g_target, s.chi])


def linearize(p: PatientParams, g_op: float, chi_op: float) -> LinearModel:
    """Jacobian of the ``(g, chi)`` subsystem at an operating point."""
    A = np.array([[-p.p1 - chi_op, -g_op], [0.0, -p.p2]])
    B = np.array([[0.0], [p.insulin_gain]])
    return LinearModel(A, B)


def diverged(s: PlantState) -> bool:
    return abs(s.g) > DIVERGENCE_G or abs(s.chi) > DIVERGENCE_CHI


def clip_to_guard(s: PlantState) -> PlantState:
    """Pull a diverged state back onto the guard box so the run can continue finitely."""
    g = min(max(s.g, G_FLOOR), DIVERGENCE_G) if np.isfinite(s.g) else DIVERGENCE_G
    chi = float(np.clip(s.chi, -DIVERGENCE_CHI, DIVERGENCE_CHI)) if np.isfinite(s.chi) else DIVERGENCE_CHI
    D1 = s.D1 if np.isfinite(s.D1) else 0.0
    D2 = s.D2 if np.isfinite(s.D2) else 0.0
    return PlantState(D1, D2, g, chi)


def mgdl_to_mmol(v: float) -> float:
    if v < 0:
        raise ValueError("glucose must be nonnegative")
    return v / MGDL_PER_MMOL


def mmol_to_mgdl(v: float) -> float:
    if v < 0:
        raise ValueError("glucose must be nonnegative")
    return v * MGDL_PER_MMOL
