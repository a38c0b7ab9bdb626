"""Known-model helpers for checks: simulate ``xdot = A x + B u`` and collect samples.

The controller code never imports this module; tests and the acceptance
suite use it to compare learned quantities against model-based answers.
"""
from __future__ import annotations

import numpy as np

from .critic import TransitionSample, accumulate_cost, input_mismatch_terms
from .matrix_core import LinearModel, sym
from .plant import rk4


def collect_linear_samples(
    model: LinearModel,
    K,
    x0,
    Q,
    R,
    n_samples: int,
    T: float = 1.0,
    dt: float = 0.01,
    probe: float = 0.0,
    rng=None,
    reset_every: int = 0,
):
    """Run the closed loop ``u = -K x + probe`` and cut it into windows of length ``T``.

    The probe is uniform in ``[-probe, probe]`` and held for one ``dt``. When
    ``reset_every`` is positive the state jumps to a fresh random point every
    that many windows (keeps the regression excited without a large probe).
    Returns ``(samples, trajectory)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Q, R = sym(Q), sym(R)
    x = np.asarray(x0, dtype=float).copy()
    steps = int(round(T / dt))
    samples = []
    traj = []
    t = 0.0
    for k in range(n_samples):
        if reset_every and k and k % reset_every == 0:
            x = rng.uniform(-1, 1, size=x.size) * np.abs(np.asarray(x0, dtype=float)).max()
        ts, xs, us_pol, dus = [t], [x.copy()], [], []
        for _ in range(steps):
            u_pol = -K @ x
            du = rng.uniform(-probe, probe, size=u_pol.size) if probe > 0 else np.zeros_like(u_pol)
            u = u_pol + du
            us_pol.append(u_pol)
            dus.append(du)
            x = rk4(lambda v: model.A @ v + model.B @ u, x, dt)
            t += dt
            ts.append(t)
            xs.append(x.copy())
        xs = np.array(xs)
        # the policy action at the window's last record closes the quadrature
        us_pol.append(-K @ xs[-1])
        d = accumulate_cost(ts, xs, np.array(us_pol), Q, R)
        corr = input_mismatch_terms(ts, xs, np.array(dus) @ model.B.T) if probe > 0 else None
        samples.append(TransitionSample(ts[0], xs[0], xs[-1], d, corr))
        traj.append((np.array(ts), xs))
    return samples, traj
