"""Robust policy improvement via linear matrix inequalities.

Decision variables are the entries of the next gain ``K'`` (named
``"K[r,c]"``) and the scalar ``gamma2``. For a fixed decay rate ``alpha``
and, in the general mode, a fixed ``gamma1`` every block is affine in
those variables, so the decay rate is maximized by bisection.

Stability block, general mode::

    [[U, K'^T B^T], [B K', -gamma2 I]] <= 0
    U = M + beta^2/gamma1 I - P B K' - K'^T B^T P + alpha (P + (beta^2/2 + 1) I)
    M = -Q - K^T R K + P B K + K^T B^T P + gamma1 K^T B^T B K + beta^2 gamma2 I

Gain bound, both modes: ``[[-zeta I, K'^T], [K', -I]] <= 0``, i.e.
``||K'||_2^2 <= zeta``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import sdp
from .critic import ValueEstimate
from .matrix_core import IntervalMatrix, interval_bilinear, is_nsd, is_pd, maximize_op, sym

log = logging.getLogger(__name__)

GAMMA2 = "gamma2"
GAMMA2_MAX = 1e6
VERIFY_TOL = 1e-8


def gain_var(r: int, c: int) -> str:
    return f"K[{r},{c}]"


@dataclass(frozen=True)
class Policy:
    K: np.ndarray
    iteration: int = 0
    alpha_certified: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))

    def action(self, x) -> np.ndarray:
        return -self.K @ np.asarray(x, dtype=float)


@dataclass
class ActorConfig:
    Q: np.ndarray
    R: np.ndarray
    B: np.ndarray
    zeta: float
    gamma1_grid: Sequence[float] = (0.01, 0.1, 1.0, 10.0)
    alpha_max: float = 1.0
    alpha_tol: float = 1e-3
    mode: str = "general"
    eps: float = sdp.DEFAULT_EPS
    iter_cap: int = sdp.DEFAULT_ITER_CAP

    def __post_init__(self):
        self.Q = sym(self.Q)
        self.R = sym(self.R)
        B = np.asarray(self.B, dtype=float)
        self.B = B.reshape(-1, 1) if B.ndim == 1 else B
        if np.linalg.eigvalsh(self.Q)[0] < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if not is_pd(self.R):
            raise ValueError("R must be positive definite")
        if self.zeta <= 0 or self.alpha_max <= 0 or self.alpha_tol <= 0:
            raise ValueError("zeta, alpha_max and alpha_tol must be positive")
        if self.mode not in ("general", "frequent"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if any(g <= 0 for g in self.gamma1_grid):
            raise ValueError("gamma1 grid entries must be positive")
        n, m = self.B.shape
        if self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise ValueError("Q, R and B dimensions disagree")

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def _gain_coeffs(B, P, n, m, with_lyap=True):
    """Per-entry coefficient blocks of the stability LMI for ``K'``."""
    out = []
    for r in range(m):
        for c in range(n):
            E = np.zeros((m, n))
            E[r, c] = 1.0
            BE = B @ E
            F = np.zeros((2 * n, 2 * n))
            if with_lyap:
                F[:n, :n] = -(P @ BE + BE.T @ P)
            F[n:, :n] = BE
            F[:n, n:] = BE.T
            out.append((gain_var(r, c), F))
    return out


def gain_bound_lmi(cfg: ActorConfig) -> sdp.AffineLMI:
    n, m = cfg.n, cfg.m
    F0 = np.zeros((n + m, n + m))
    F0[:n, :n] = -cfg.zeta * np.eye(n)
    F0[n:, n:] = -np.eye(m)
    coeffs = []
    for r in range(m):
        for c in range(n):
            F = np.zeros((n + m, n + m))
            F[n + r, c] = 1.0
            F[c, n + r] = 1.0
            coeffs.append((gain_var(r, c), F))
    return sdp.AffineLMI(F0, tuple(coeffs), name="gain_bound")


def _stability_lmi(U0, U_gamma2, P, cfg, name):
    n = cfg.n
    F0 = np.zeros((2 * n, 2 * n))
    F0[:n, :n] = U0
    G = np.zeros((2 * n, 2 * n))
    G[:n, :n] = U_gamma2
    G[n:, n:] = -np.eye(n)
    coeffs = tuple(_gain_coeffs(cfg.B, P, n, cfg.m)) + ((GAMMA2, G),)
    return sdp.AffineLMI(F0, coeffs, {GAMMA2: (0.0, GAMMA2_MAX)}, name=name)


def _common_M(est: ValueEstimate, K_i, cfg: ActorConfig):
    P = est.P_hat
    K_i = np.atleast_2d(K_i)
    BK = cfg.B @ K_i
    return -cfg.Q - K_i.T @ cfg.R @ K_i + P @ BK + BK.T @ P


def _check_estimate(est: ValueEstimate):
    if not is_pd(est.P_hat):
        raise ValueError("value kernel estimate must be positive definite")


def build_general_lmi(est: ValueEstimate, K_i, alpha: float, gamma1: float, cfg: ActorConfig):
    """Stability block, gain bound and the ``gamma2`` box for the general update."""
    _check_estimate(est)
    if gamma1 <= 0 or alpha < 0:
        raise ValueError("need gamma1 > 0 and alpha >= 0")
    n = cfg.n
    K_i = np.atleast_2d(K_i)
    P = est.P_hat
    b2 = est.beta**2
    I = np.eye(n)
    BK = cfg.B @ K_i
    M0 = _common_M(est, K_i, cfg) + gamma1 * BK.T @ BK
    H = P + (0.5 * b2 + 1.0) * I
    U0 = M0 + (b2 / gamma1) * I + alpha * H
    return [_stability_lmi(U0, b2 * I, P, cfg, "stability_general"), gain_bound_lmi(cfg)]


def frequent_terms(est: ValueEstimate, K_i, x_now, cfg: ActorConfig):
    """``(H_i, dP_max)`` from the sign pattern of ``x_now``."""
    x = np.asarray(x_now, dtype=float).ravel()
    if np.any(x == 0):
        raise ValueError("x_now has a zero component; sign pattern undefined")
    hw = est.halfwidth
    zero = np.zeros_like(hw)
    BK = cfg.B @ np.atleast_2d(K_i)
    H_i = maximize_op(IntervalMatrix(zero, interval_bilinear(hw, BK)), x)
    dP_max = maximize_op(IntervalMatrix(zero, hw), x)
    return H_i, dP_max


def build_frequent_lmi(est: ValueEstimate, K_i, x_now, alpha: float, cfg: ActorConfig):
    """Stability block, gain bound and ``gamma2`` box for the frequent update."""
    _check_estimate(est)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    n = cfg.n
    P = est.P_hat
    H_i, dP_max = frequent_terms(est, K_i, x_now, cfg)
    DD = dP_max.T @ dP_max
    U0 = _common_M(est, K_i, cfg) + H_i + alpha * (P + 0.5 * DD + np.eye(n))
    return [_stability_lmi(U0, DD, P, cfg, "stability_frequent"), gain_bound_lmi(cfg)]


def gains_from(assignment, m: int, n: int) -> np.ndarray:
    K = np.empty((m, n))
    for r in range(m):
        for c in range(n):
            K[r, c] = assignment[gain_var(r, c)]
    return K


def _start(K_i, gamma2=1.0):
    K_i = np.atleast_2d(K_i)
    z = {gain_var(r, c): float(K_i[r, c]) for r in range(K_i.shape[0]) for c in range(K_i.shape[1])}
    z[GAMMA2] = gamma2
    return z


@dataclass
class UpdateRecord:
    """What happened during one call of :func:`improve_policy`."""

    mode: str
    gamma1: float | None = None
    alpha: float | None = None
    constraints: list = field(default_factory=list)
    assignment: dict | None = None
    fallback_reason: str | None = None


def improve_policy(est: ValueEstimate, current: Policy, x_now, cfg: ActorConfig, record: UpdateRecord | None = None) -> Policy:
    """Next gain with the largest certified decay rate, or ``current`` unchanged.

    In the general mode every ``gamma1`` in the grid is tried; a later grid
    entry only replaces the incumbent when it certifies a strictly larger
    rate, so ties go to the smaller ``gamma1``.
    """
    mode = cfg.mode
    if mode == "frequent" and (x_now is None or np.any(np.asarray(x_now, dtype=float) == 0)):
        mode = "general"
    if record is None:
        record = UpdateRecord(mode)
    record.mode = mode
    K_i = current.K
    if not is_pd(est.P_hat):
        record.fallback_reason = "kernel not positive definite"
        return current

    if mode == "frequent":
        builders = [(None, lambda a: build_frequent_lmi(est, K_i, x_now, a, cfg))]
    else:
        builders = [(g1, (lambda a, g1=g1: build_general_lmi(est, K_i, a, g1, cfg))) for g1 in cfg.gamma1_grid]

    best = None
    for g1, builder in builders:
        lo = 0.0 if best is None else best[1]
        if best is not None:
            # must beat the incumbent strictly
            lo = min(lo + cfg.alpha_tol, cfg.alpha_max)
            if lo >= cfg.alpha_max:
                continue
        try:
            alpha, sol = sdp.maximize_alpha(builder, lo, cfg.alpha_max, cfg.alpha_tol, cfg.eps, cfg.iter_cap, _start(K_i))
        except sdp.Infeasible as exc:
            log.debug("gamma1=%s: %s", g1, exc)
            continue
        best = (g1, alpha, sol, builder)

    if best is None:
        record.fallback_reason = "no certificate at alpha=0"
        log.info("policy update infeasible; keeping current gain")
        return current
    g1, alpha, sol, builder = best
    constraints = builder(alpha)
    if not all(is_nsd(sdp.eval_lmi(c, sol.assignment), VERIFY_TOL) for c in constraints):
        record.fallback_reason = "certificate failed re-verification"
        log.warning("LMI solution failed re-verification; keeping current gain")
        return current
    record.gamma1, record.alpha = g1, alpha
    record.constraints = constraints
    record.assignment = dict(sol.assignment)
    K_new = gains_from(sol.assignment, cfg.m, cfg.n)
    return Policy(K_new, current.iteration + 1, alpha)


def optimal_update(est: ValueEstimate, cfg: ActorConfig, iteration: int = 0) -> Policy:
    """Classic policy-iteration step ``K = R^-1 B^T P``, ignoring the uncertainty."""
    try:
        K = np.linalg.solve(cfg.R, cfg.B.T @ est.P_hat)
    except np.linalg.LinAlgError as exc:
        raise ValueError("R is singular") from exc
    return Policy(K, iteration, None)


def with_iteration(policy: Policy, iteration: int) -> Policy:
    return replace(policy, iteration=iteration)
