"""Feasibility of affine LMIs in a handful of scalar variables.

The solver is a phase-I barrier method: it minimizes the largest
eigenvalue bound ``s`` subject to ``F_k(z) <= s I`` for every constraint,
following the central path of

    t * s - sum_k logdet(s I - F_k(z)) - sum log(box slacks)

with damped Newton steps. It stops as soon as ``s <= -eps/2`` (feasible) or
as soon as the duality-gap lower bound ``s - m/t`` exceeds ``-eps/2``
(certified infeasible at that margin). Problem sizes here are a few
variables and blocks of size <= 8, so dense numpy is plenty.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg.lapack import dposv, dpotrf, dpotrs

from .matrix_core import DimensionError, max_eig, sym

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6
DEFAULT_ITER_CAP = 500
_MU = 30.0  # barrier parameter growth per outer iteration


class AssignmentError(KeyError):
    pass


class Infeasible(Exception):
    """No certificate was found.

    ``status`` is ``"infeasible"`` when the barrier lower bound proves the
    best margin is worse than ``-eps/2``, and ``"undecided"`` when the
    iteration cap ran out first. Callers treat both the same way.
    """

    def __init__(self, status: str, detail: str = ""):
        super().__init__(f"{status}: {detail}" if detail else status)
        self.status = status


@dataclass(frozen=True)
class AffineLMI:
    """``F(z) = F0 + sum_k z_k F_k <= 0`` with per-variable box bounds."""

    F0: np.ndarray
    coeffs: tuple = ()
    box: Mapping[str, tuple] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        F0 = sym(self.F0)
        coeffs = tuple((str(v), sym(Fk)) for v, Fk in self.coeffs)
        for v, Fk in coeffs:
            if Fk.shape != F0.shape:
                raise DimensionError(f"coefficient of {v!r} has shape {Fk.shape}, expected {F0.shape}")
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "box", dict(self.box))

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    @property
    def variables(self) -> tuple:
        return tuple(v for v, _ in self.coeffs)


@dataclass(frozen=True)
class LmiSolution:
    assignment: dict
    certificate: tuple  # max eigenvalue of each constraint at ``assignment``


def eval_lmi(lmi: AffineLMI, z: Mapping[str, float]) -> np.ndarray:
    """``F0 + sum z_k F_k``."""
    out = lmi.F0.copy()
    for v, Fk in lmi.coeffs:
        if v not in z:
            raise AssignmentError(f"variable {v!r} is not assigned")
        out += float(z[v]) * Fk
    return out


def certificate(constraints: Sequence[AffineLMI], z: Mapping[str, float]) -> tuple:
    return tuple(max_eig(eval_lmi(c, z)) for c in constraints)


class _Problem:
    """Constraints flattened onto one ordered variable vector.

    All blocks are stacked into one block-diagonal matrix so each barrier
    evaluation costs a single factorization.
    """

    def __init__(self, constraints: Sequence[AffineLMI]):
        names: list[str] = []
        for c in constraints:
            for v in c.variables:
                if v not in names:
                    names.append(v)
            for v in c.box:
                if v not in names:
                    names.append(v)
        self.names = names
        idx = {v: k for k, v in enumerate(names)}
        nv = len(names)
        self.sizes = [c.size for c in constraints]
        d = sum(self.sizes)
        self.d = d
        F0 = np.zeros((d, d))
        # D[a] is the derivative of G = sI - F(z) w.r.t. (z..., s)[a]
        D = np.zeros((nv + 1, d, d))
        off = 0
        for c in constraints:
            sl = slice(off, off + c.size)
            F0[sl, sl] = c.F0
            for v, Fk in c.coeffs:
                D[idx[v], sl, sl] -= Fk
            off += c.size
        D[nv] = np.eye(d)
        self.F0 = F0
        self.eye = np.eye(d)
        self.D = D
        self.Dflat = D.reshape(nv + 1, d * d)
        lo = np.full(nv, -np.inf)
        hi = np.full(nv, np.inf)
        for c in constraints:
            for v, (a, b) in c.box.items():
                a = -np.inf if a is None else float(a)
                b = np.inf if b is None else float(b)
                k = idx[v]
                lo[k] = max(lo[k], a)
                hi[k] = min(hi[k], b)
        if np.any(lo >= hi):
            bad = [names[k] for k in np.flatnonzero(lo >= hi)]
            raise ValueError(f"empty box for {bad}")
        self.lo, self.hi = lo, hi
        self.has_lo = np.isfinite(lo)
        self.has_hi = np.isfinite(hi)
        self.ilo = np.flatnonzero(self.has_lo)
        self.ihi = np.flatnonzero(self.has_hi)
        self.degree = d + int(self.has_lo.sum() + self.has_hi.sum())

    def start(self, hint: Mapping[str, float] | None) -> np.ndarray:
        z = np.zeros(len(self.names))
        for k, v in enumerate(self.names):
            if hint is not None and v in hint:
                z[k] = float(hint[v])
            lo, hi = self.lo[k], self.hi[k]
            margin = min(1.0, (hi - lo) / 4) if np.isfinite(hi - lo) else 1.0
            if z[k] <= lo:
                z[k] = lo + margin
            if z[k] >= hi:
                z[k] = hi - margin
            # a hint sitting on the boundary is pulled a little inside
            if np.isfinite(lo) and z[k] - lo < 1e-3 * margin:
                z[k] = lo + 1e-3 * margin
            if np.isfinite(hi) and hi - z[k] < 1e-3 * margin:
                z[k] = hi - 1e-3 * margin
        return z

    def G(self, y) -> np.ndarray:
        """``s I - F(z)`` for ``y = (z, s)``."""
        return (y @ self.Dflat).reshape(self.d, self.d) - self.F0

    def max_eigs(self, z) -> list:
        F = -self.G(np.append(z, 0.0))
        out, off = [], 0
        for size in self.sizes:
            out.append(float(np.linalg.eigvalsh(F[off:off + size, off:off + size])[-1]))
            off += size
        return out

    def barrier(self, y, t):
        """``(value, cholesky factor)``; value is ``inf`` outside the domain."""
        z = y[:-1]
        sl = z[self.ilo] - self.lo[self.ilo]
        su = self.hi[self.ihi] - z[self.ihi]
        if (sl <= 0).any() or (su <= 0).any():
            return math.inf, None
        L, info = dpotrf(self.G(y), lower=1)
        if info != 0:
            return math.inf, None
        val = t * y[-1] - 2.0 * np.log(L.diagonal()).sum() - np.log(sl).sum() - np.log(su).sum()
        return val, L

    def newton_system(self, y, t, L):
        z = y[:-1]
        nv = len(z)
        d = self.d
        W, _ = dpotrs(L, self.eye, lower=1)
        WD3 = W @ self.D
        WD = WD3.reshape(nv + 1, d * d)
        g = -WD[:, :: d + 1].sum(axis=1)
        g[nv] += t
        # tr(W D_a W D_b) = <W D_a, (W D_b)^T>
        H = WD @ WD3.transpose(0, 2, 1).reshape(nv + 1, d * d).T
        if self.ilo.size:
            sl = z[self.ilo] - self.lo[self.ilo]
            g[self.ilo] -= 1.0 / sl
            H[self.ilo, self.ilo] += 1.0 / sl**2
        if self.ihi.size:
            su = self.hi[self.ihi] - z[self.ihi]
            g[self.ihi] += 1.0 / su
            H[self.ihi, self.ihi] += 1.0 / su**2
        return g, H


def _newton_direction(H, g):
    _, dy, info = dposv(H, -g, lower=1)
    if info != 0:
        dy = -np.linalg.lstsq(H, g, rcond=None)[0]
    return dy


def feasibility_solve(
    constraints: Sequence[AffineLMI],
    eps: float = DEFAULT_EPS,
    iter_cap: int = DEFAULT_ITER_CAP,
    start: Mapping[str, float] | None = None,
) -> LmiSolution:
    """Find ``z`` in the box with ``lambda_max(F_k(z)) <= -eps/2`` for all ``k``.

    Raises :class:`Infeasible` otherwise. ``iter_cap`` bounds the total
    number of Newton steps. The result depends only on the inputs.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not constraints:
        raise ValueError("no constraints given")
    prob = _Problem(constraints)
    target = -0.5 * eps
    z = prob.start(start)
    lam = prob.max_eigs(z)
    if max(lam) <= target:
        return _solution(prob, constraints, z)
    nv = len(z)
    scale = max(1.0, max(abs(x) for x in lam))
    y = np.append(z, max(lam) + scale)
    t = 1.0 / scale
    steps = 0
    while steps < iter_cap:
        f0, L = prob.barrier(y, t)
        # centering
        for _ in range(50):
            if steps >= iter_cap:
                break
            g, H = prob.newton_system(y, t, L)
            dy = _newton_direction(H, g)
            dec2 = float(-g @ dy)
            steps += 1
            step = 1.0
            while step > 1e-12:
                f1, L1 = prob.barrier(y + step * dy, t)
                if f1 <= f0 - 0.25 * step * dec2:
                    break
                step *= 0.5
            else:
                break
            y = y + step * dy
            f0, L = f1, L1
            if y[-1] <= target:
                lam = prob.max_eigs(y[:nv])
                if max(lam) <= target:
                    return _solution(prob, constraints, y[:nv])
            if dec2 < 1e-9:
                break
        lower = y[-1] - prob.degree / t
        if lower > target:
            raise Infeasible("infeasible", f"margin lower bound {lower:.3e} > {target:.3e}")
        t *= _MU
    log.debug("feasibility_solve hit iteration cap (%d steps)", steps)
    raise Infeasible("undecided", f"iteration cap {iter_cap} reached")


def _solution(prob: _Problem, constraints, z) -> LmiSolution:
    assignment = {v: float(z[k]) for k, v in enumerate(prob.names)}
    return LmiSolution(assignment, certificate(constraints, assignment))


def maximize_alpha(
    builder: Callable[[float], Sequence[AffineLMI]],
    alpha_lo: float,
    alpha_hi: float,
    tol: float,
    eps: float = DEFAULT_EPS,
    iter_cap: int = DEFAULT_ITER_CAP,
    start: Mapping[str, float] | None = None,
):
    """Largest ``alpha`` in ``[alpha_lo, alpha_hi]`` (to ``tol``) with a feasible LMI system.

    Feasibility is assumed to shrink as ``alpha`` grows. Returns
    ``(alpha, solution)``; raises :class:`Infeasible` when ``alpha_lo``
    itself has no certificate.
    """
    if alpha_lo < 0 or not alpha_hi > alpha_lo or tol <= 0:
        raise ValueError("need 0 <= alpha_lo < alpha_hi and tol > 0")
    best = feasibility_solve(builder(alpha_lo), eps, iter_cap, start)
    lo = alpha_lo
    try:
        sol = feasibility_solve(builder(alpha_hi), eps, iter_cap, best.assignment)
        return alpha_hi, sol
    except Infeasible:
        pass
    hi = alpha_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        try:
            best = feasibility_solve(builder(mid), eps, iter_cap, best.assignment)
            lo = mid
        except Infeasible:
            hi = mid
    return lo, best
