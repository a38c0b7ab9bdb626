"""Dense symmetric linear algebra used by the critic and the actor.

Everything here works on small numpy arrays (n <= ~10). Symmetric matrices
are plain ``ndarray`` objects; :func:`sym` is the single place where
symmetry is enforced.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


class LyapunovError(np.linalg.LinAlgError):
    pass


def sym(M) -> np.ndarray:
    """Return ``(M + M.T) / 2`` as a float array."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class IntervalMatrix:
    """Elementwise interval ``[center - halfwidth, center + halfwidth]``."""

    center: np.ndarray
    halfwidth: np.ndarray

    def __post_init__(self):
        c = sym(self.center)
        h = np.asarray(self.halfwidth, dtype=float)
        if h.shape != c.shape:
            raise DimensionError(f"halfwidth shape {h.shape} != center shape {c.shape}")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise ValueError("halfwidth must be finite and nonnegative")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "halfwidth", h)

    @property
    def n(self) -> int:
        return self.center.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.halfwidth

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.halfwidth

    def contains(self, M, atol: float = 0.0) -> bool:
        M = np.asarray(M, dtype=float)
        return bool(np.all(M >= self.lower - atol) and np.all(M <= self.upper + atol))


@dataclass(frozen=True)
class LinearModel:
    """``xdot = A x + B u``. Only test oracles and linearization build these."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError(f"inconsistent shapes A{A.shape} B{B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def closed_loop(self, K) -> np.ndarray:
        return self.A - self.B @ np.atleast_2d(K)


# -- bases and packings -------------------------------------------------------

def kron_basis(x) -> np.ndarray:
    """``x (x) x``; entry ``i*n + j`` is ``x[i] * x[j]``."""
    x = np.asarray(x, dtype=float).ravel()
    return np.kron(x, x)


def _triu(n: int):
    return np.triu_indices(n)


def sym_basis(x) -> np.ndarray:
    """Reduced quadratic basis, row-major over the upper triangle.

    Entry for ``(i, i)`` is ``x_i**2`` and for ``(i, j), i < j`` is
    ``2 x_i x_j``, so ``pack_upper(P) @ sym_basis(x) == x @ P @ x``.
    For n=2 the order is ``(x1^2, 2 x1 x2, x2^2)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    i, j = _triu(x.size)
    return np.where(i == j, 1.0, 2.0) * x[i] * x[j]


def sym_basis_dim(n: int) -> int:
    return n * (n + 1) // 2


def dim_from_packed(length: int) -> int:
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if n < 1 or sym_basis_dim(n) != length:
        raise DimensionError(f"length {length} is not n(n+1)/2 for any n")
    return n


def pack_upper(P) -> np.ndarray:
    """Upper triangle of ``P`` row-major; pairs with :func:`sym_basis`."""
    P = sym(P)
    return P[_triu(P.shape[0])].copy()


def unpack_upper(w) -> np.ndarray:
    """Inverse of :func:`pack_upper`."""
    w = np.asarray(w, dtype=float).ravel()
    n = dim_from_packed(w.size)
    P = np.zeros((n, n))
    P[_triu(n)] = w
    return P + np.triu(P, 1).T


def pack_monomial(P) -> np.ndarray:
    """Monomial coefficients of ``x'Px``: diagonal entries, then ``2 P_ij``."""
    P = sym(P)
    i, j = _triu(P.shape[0])
    return np.where(i == j, 1.0, 2.0) * P[i, j]


def vec_to_sym(w, n: int | None = None) -> np.ndarray:
    """Rebuild a symmetric matrix from a parameter vector.

    A length ``n**2`` vector is read as ``vec(P)`` (column-major) and
    symmetrized. A length ``n(n+1)/2`` vector is read as monomial
    coefficients (see :func:`pack_monomial`), so off-diagonals are halved.
    Lengths that fit both packings (36, 1225, ...) are read as ``vec(P)``
    unless ``n`` says otherwise.
    """
    w = np.asarray(w, dtype=float).ravel()
    if n is None:
        root = int(round(np.sqrt(w.size)))
        full = root >= 1 and root * root == w.size
        n = root if full else dim_from_packed(w.size)
    if w.size == n * n:
        return sym(w.reshape((n, n), order="F"))
    if w.size != sym_basis_dim(n):
        raise DimensionError(f"length {w.size} matches neither packing for n={n}")
    i, j = _triu(n)
    P = np.zeros((n, n))
    P[i, j] = np.where(i == j, 1.0, 0.5) * w
    return P + np.triu(P, 1).T


# -- spectra ------------------------------------------------------------------

def eig_sym(M):
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix."""
    return np.linalg.eigh(sym(M))


def max_eig(M) -> float:
    return float(np.linalg.eigvalsh(sym(M))[-1])


def is_nsd(M, tol: float = 0.0) -> bool:
    return max_eig(M) <= tol


def is_pd(M, tol: float = 0.0) -> bool:
    return float(np.linalg.eigvalsh(sym(M))[0]) > tol


def spectral_norm(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(np.linalg.norm(M, 2))


# -- Lyapunov -----------------------------------------------------------------

def solve_lyapunov(Acl, Qeff) -> np.ndarray:
    """Solve ``P Acl + Acl' P = -Qeff`` through the vectorized linear system.

    ``vec(P Acl + Acl' P) = (Acl' (x) I + I (x) Acl') vec(P)``.
    """
    Acl = np.atleast_2d(np.asarray(Acl, dtype=float))
    Qeff = sym(Qeff)
    n = Acl.shape[0]
    if Acl.shape != (n, n) or Qeff.shape != (n, n):
        raise DimensionError(f"shape mismatch: Acl{Acl.shape} Qeff{Qeff.shape}")
    lam = np.linalg.eigvals(Acl)
    if np.any(lam.real >= 0):
        raise LyapunovError(f"closed loop is not Hurwitz (eigenvalues {lam})")
    eye = np.eye(n)
    L = np.kron(Acl.T, eye) + np.kron(eye, Acl.T)
    # eigenvalues of L are lam_i + lam_j; all have negative real part here
    try:
        p = np.linalg.solve(L, -Qeff.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise LyapunovError(str(exc)) from exc
    return sym(p.reshape((n, n), order="F"))


# -- interval machinery -------------------------------------------------------

def maximize_op(interval: IntervalMatrix, x) -> np.ndarray:
    """Sign-pattern worst case of an interval matrix for the quadratic form at ``x``.

    Entry ``(i, j)`` takes the upper end when ``x_i x_j >= 0`` and the lower
    end otherwise, so ``x' A x <= x' C x`` for every ``A`` in the interval.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != interval.n:
        raise DimensionError(f"x has {x.size} entries, interval is {interval.n}x{interval.n}")
    outer = np.outer(x, x)
    return np.where(outer >= 0, interval.upper, interval.lower)


def interval_bilinear(halfwidth, G) -> np.ndarray:
    """Exact halfwidths of ``D G + G' D`` over symmetric ``D`` with ``|D| <= halfwidth``.

    ``D`` is symmetric, so ``D_ab`` and ``D_ba`` are one variable; their
    coefficients are combined before taking absolute values.
    """
    h = np.asarray(halfwidth, dtype=float)
    G = np.asarray(G, dtype=float)
    n = h.shape[0]
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            if h[a, b] == 0.0:
                continue
            E = np.zeros((n, n))
            E[a, b] = 1.0
            E[b, a] = 1.0
            coef = E @ G + G.T @ E
            out += h[a, b] * np.abs(coef)
    return out
