"""Value-kernel estimation from sampled trajectory windows.

Each sampling window ``[t, t+T]`` contributes one row to a batch least
squares problem built from the integral Bellman identity

    x(t)' P x(t) - x(t+T)' P x(t+T) = int_t^{t+T} (x'Qx + u'Ru) dtau,

which never touches the unknown state matrix. Coefficient confidence
intervals become an elementwise interval on ``P``.
"""
from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .matrix_core import (
    IntervalMatrix,
    is_pd,
    pack_upper,
    spectral_norm,
    sym,
    sym_basis,
    sym_basis_dim,
    unpack_upper,
)

COND_LIMIT = 1e12


class InsufficientDataError(ValueError):
    pass


class ExcitationError(InsufficientDataError):
    """Too few samples or a rank-deficient regressor; collect more (probed) data."""


class EstimateRejected(ValueError):
    """The fitted kernel is not positive definite."""

    def __init__(self, msg, estimate=None):
        super().__init__(msg)
        self.estimate = estimate


@dataclass(frozen=True)
class TransitionSample:
    """One sampling window.

    ``correction`` is the integral of the regressor contribution of
    ``2 x' P B (u_applied - u_policy)`` (see :func:`input_mismatch_terms`);
    it is zero when the applied input followed the policy exactly.
    """

    t: float
    x_start: np.ndarray
    x_end: np.ndarray
    d: float
    correction: np.ndarray | None = None

    def __post_init__(self):
        xs = np.asarray(self.x_start, dtype=float).ravel()
        xe = np.asarray(self.x_end, dtype=float).ravel()
        if xs.shape != xe.shape:
            raise ValueError("x_start and x_end differ in dimension")
        if self.d < 0:
            raise ValueError(f"accumulated cost must be nonnegative, got {self.d}")
        object.__setattr__(self, "x_start", xs)
        object.__setattr__(self, "x_end", xe)
        object.__setattr__(self, "d", float(self.d))
        if self.correction is not None:
            c = np.asarray(self.correction, dtype=float).ravel()
            if c.size != sym_basis_dim(xs.size):
                raise ValueError("correction has the wrong length")
            object.__setattr__(self, "correction", c)


@dataclass(frozen=True)
class ValueEstimate:
    w_hat: np.ndarray  # upper-triangle packing, pairs with sym_basis
    delta_w: np.ndarray
    P_hat: np.ndarray
    delta_P: IntervalMatrix  # centered on P_hat
    beta: float
    sigma2_hat: float
    sample_count: int
    confidence_theta: float

    @property
    def n(self) -> int:
        return self.P_hat.shape[0]

    @property
    def halfwidth(self) -> np.ndarray:
        return self.delta_P.halfwidth


def accumulate_cost(times, xs, us, Q, R) -> float:
    """Trapezoidal integral of ``x'Qx + u'Ru`` over the given records."""
    times = np.asarray(times, dtype=float).ravel()
    if times.size < 2:
        raise InsufficientDataError("need at least two records to integrate")
    xs = np.asarray(xs, dtype=float).reshape(times.size, -1)
    us = np.asarray(us, dtype=float).reshape(times.size, -1)
    Q = sym(Q)
    R = sym(R)
    r = np.einsum("ti,ij,tj->t", xs, Q, xs) + np.einsum("ti,ij,tj->t", us, R, us)
    val = float(np.sum(0.5 * (r[1:] + r[:-1]) * np.diff(times)))
    # r >= 0 for PSD weights; clip round-off
    return max(val, 0.0)


def input_mismatch_terms(times, xs, v) -> np.ndarray:
    """Regressor terms for ``int 2 x' P v dtau`` with ``v = B (u_applied - u_policy)``.

    ``v`` is held constant on each interval between consecutive records
    (one row per interval); ``x`` is averaged over the interval's ends.
    ``x' P v = sum_i P_ii x_i v_i + sum_{i<j} P_ij (x_i v_j + x_j v_i)``, so
    the result pairs with the upper-triangle packing of ``P``.
    """
    times = np.asarray(times, dtype=float).ravel()
    xs = np.asarray(xs, dtype=float).reshape(times.size, -1)
    v = np.asarray(v, dtype=float).reshape(times.size - 1, -1)
    xm = 0.5 * (xs[1:] + xs[:-1])
    i, j = np.triu_indices(xs.shape[1])
    # diagonal: 2 x_i v_i; off-diagonal: 2 (x_i v_j + x_j v_i)
    terms = np.where(i == j, 1.0, 2.0) * (xm[:, i] * v[:, j] + xm[:, j] * v[:, i])
    return terms.T @ np.diff(times)


def build_regression(samples: Sequence[TransitionSample]):
    """Stack ``sym_basis(x_start) - sym_basis(x_end)`` rows against costs.

    A sample's input-mismatch correction, if any, is added to its row.
    """
    if not samples:
        raise InsufficientDataError("no samples")
    n = samples[0].x_start.size
    X = np.empty((len(samples), sym_basis_dim(n)))
    Y = np.empty(len(samples))
    for k, s in enumerate(samples):
        if s.x_start.size != n:
            raise ValueError("samples disagree on the state dimension")
        X[k] = sym_basis(s.x_start) - sym_basis(s.x_end)
        if s.correction is not None:
            X[k] += s.correction
        Y[k] = s.d
    return X, Y


def least_squares(X, Y):
    """QR least squares.

    Returns ``(w_hat, sigma2_hat, tau)`` where ``tau`` is the diagonal of
    ``(X'X)^-1``. Requires ``N >= p + 1`` so the residual variance has at
    least one degree of freedom.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).ravel()
    N, p = X.shape
    if Y.size != N:
        raise ValueError("X and Y disagree on the number of rows")
    if N < p + 1:
        raise ExcitationError(f"{N} samples for {p} coefficients; need at least {p + 1}")
    # column scaling keeps the conditioning test about excitation, not units
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        raise ExcitationError("a basis direction is never excited")
    Xs = X / scale
    q, r = np.linalg.qr(Xs)
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > COND_LIMIT:
        raise ExcitationError("regressor is rank deficient (condition number above 1e12)")
    w = np.linalg.solve(r, q.T @ Y) / scale
    resid = Y - X @ w
    sigma2 = float(resid @ resid) / (N - p)
    rinv = np.linalg.inv(r)
    tau = np.sum(rinv**2, axis=1) / scale**2
    return w, sigma2, tau


def normal_quantile(prob: float) -> float:
    if not 0.0 < prob < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {prob}")
    return NormalDist().inv_cdf(prob)


def beta_bound(delta_P: IntervalMatrix) -> float:
    """Spectral norm of the halfwidth matrix.

    For ``|D_ij| <= H_ij`` we have ``||D||_2 <= || |D| ||_2 <= ||H||_2``
    (the spectral norm is monotone on nonnegative matrices).
    """
    return spectral_norm(delta_P.halfwidth)


def estimate_value(samples: Sequence[TransitionSample], theta: float = 0.05) -> ValueEstimate:
    """Fit the value kernel and its ``1 - theta`` confidence box.

    Raises :class:`ExcitationError` on poor data and
    :class:`EstimateRejected` if the fitted kernel is not positive definite.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    X, Y = build_regression(samples)
    w, sigma2, tau = least_squares(X, Y)
    q = normal_quantile(1.0 - theta / 2.0)
    dw = q * np.sqrt(tau * sigma2)
    # basis carries the factor 2 on cross terms, so coefficients are the
    # matrix entries themselves
    P_hat = unpack_upper(w)
    hw = unpack_upper(dw)
    delta_P = IntervalMatrix(P_hat, hw)
    est = ValueEstimate(
        w_hat=w,
        delta_w=dw,
        P_hat=P_hat,
        delta_P=delta_P,
        beta=beta_bound(delta_P),
        sigma2_hat=sigma2,
        sample_count=len(samples),
        confidence_theta=theta,
    )
    if not is_pd(P_hat):
        raise EstimateRejected("estimated value kernel is not positive definite", est)
    return est


def estimate_from_matrices(P_hat, halfwidth=None, theta: float = 0.05) -> ValueEstimate:
    """Wrap a known kernel (and optional halfwidths) as a :class:`ValueEstimate`.

    Used by oracles and randomized checks that bypass the regression.
    """
    P_hat = sym(P_hat)
    hw = np.zeros_like(P_hat) if halfwidth is None else np.asarray(halfwidth, dtype=float)
    hw = 0.5 * (hw + hw.T)
    delta_P = IntervalMatrix(P_hat, hw)
    return ValueEstimate(
        w_hat=pack_upper(P_hat),
        delta_w=pack_upper(hw),
        P_hat=P_hat,
        delta_P=delta_P,
        beta=beta_bound(delta_P),
        sigma2_hat=0.0,
        sample_count=0,
        confidence_theta=theta,
    )
