"""Acceptance checks 1-9.

Each check prints one ``criterion N: PASS|FAIL`` line (run pytest with
``-s`` to see them, or execute this file directly for a summary).
"""
import contextlib
import filecmp
import io
import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from robust_irl import sdp
from robust_irl.actor import ActorConfig, Policy, UpdateRecord, improve_policy
from robust_irl.critic import estimate_from_matrices, estimate_value, normal_quantile
from robust_irl.harness import ScenarioConfig, run_episode
from robust_irl.harness.cli import main as cli_main
from robust_irl.harness.suite import MEAL_DURATION
from robust_irl.matrix_core import IntervalMatrix, eig_sym, max_eig, maximize_op, solve_lyapunov, sym
from robust_irl.oracle import collect_linear_samples
from robust_irl.plant import NoiseSpec, PatientParams, PlantState, linearize, step

LIN = linearize(PatientParams(), 5.0, 0.0)
K_STAB = np.array([[-0.5, 2.0]])
Q, R = np.eye(2), 1e-4 * np.eye(1)


LINES = []  # collected for the terminal summary (see conftest.py)


def report(n, ok, detail, elapsed=None):
    took = "" if elapsed is None else f" [{elapsed:.2f} s]"
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}{took}"
    LINES.append(line)
    print(line)
    return ok


def _oracle_estimate():
    samples, _ = collect_linear_samples(LIN, K_STAB, [11.1, 0.0], Q, R, 40, T=1.0, dt=0.005, probe=0.5, rng=np.random.default_rng(3))
    return estimate_value(samples)


def criterion_1():
    t0 = time.perf_counter()
    est = _oracle_estimate()
    P = solve_lyapunov(LIN.closed_loop(K_STAB), Q + K_STAB.T @ R @ K_STAB)
    err = np.linalg.norm(est.P_hat - P) / np.linalg.norm(P)
    dt = time.perf_counter() - t0
    return report(1, err <= 1e-3 and dt < 1.0, f"relative Frobenius error {err:.2e} (<= 1e-3)", dt)


def criterion_2():
    t0 = time.perf_counter()
    accepted = fallback = 0
    worst = -math.inf
    bad = []
    for seed in range(200):
        r = np.random.default_rng(seed)
        L = r.standard_normal((2, 2))
        est = estimate_from_matrices(L @ L.T + 0.5 * np.eye(2), np.abs(r.standard_normal((2, 2))) * r.choice([1e-3, 1e-2, 1e-1, 1.0]))
        K = r.standard_normal((1, 2))
        mode = str(r.choice(["general", "frequent"]))
        cfg = ActorConfig(Q=np.eye(2), R=r.uniform(0.1, 2) * np.eye(1), B=r.standard_normal((2, 1)),
                          zeta=10 * (1 + np.linalg.norm(K) ** 2), mode=mode, alpha_tol=1e-2)
        cur = Policy(K)
        rec = UpdateRecord(mode)
        new = improve_policy(est, cur, r.standard_normal(2), cfg, rec)
        if new is cur:
            fallback += 1
            if not np.array_equal(new.K, K):
                bad.append(seed)
            continue
        accepted += 1
        lam = max(max_eig(sdp.eval_lmi(c, rec.assignment)) for c in rec.constraints)
        worst = max(worst, lam)
        if lam > 1e-8:
            bad.append(seed)
    dt = time.perf_counter() - t0
    ok = not bad and accepted > 0 and dt < 10.0
    return report(2, ok, f"{accepted} accepted (worst lambda_max {worst:.1e}), {fallback} fallbacks unchanged, {len(bad)} violations", dt)


def criterion_3():
    t0 = time.perf_counter()
    est = _oracle_estimate()
    x_now = np.array([1.0, 0.1])
    worst = {}
    for mode in ("general", "frequent"):
        cfg = ActorConfig(Q=Q, R=R, B=LIN.B, zeta=10 * np.linalg.norm(K_STAB, 2) ** 2, mode=mode)
        pol = improve_policy(est, Policy(K_STAB), x_now, cfg)
        if pol.alpha_certified is None:
            worst[mode] = math.inf
            continue
        Acl = LIN.closed_loop(pol.K)
        P, a = est.P_hat, pol.alpha_certified
        W = Acl.T @ P + P @ Acl + a * P  # d/dt V + a V = x' W x
        r = np.random.default_rng(7)
        w = -math.inf
        checked = 0
        for _ in range(100):
            x = r.uniform(-1, 1, 2) * [10.0, 0.1]
            if mode == "frequent":
                # trajectories in the orthant pair that shares x_now's sign pattern
                x = np.abs(x) * np.sign(x_now) * r.choice([-1.0, 1.0])
            for _ in range(200):
                if mode == "general" or np.all(np.sign(x) * np.sign(x_now) == np.sign(x[0] * x_now[0])):
                    w = max(w, x @ W @ x - 1e-6 * (x @ x))
                    checked += 1
                x = step_linear(Acl, x, 0.05)
        worst[mode] = w
    dt = time.perf_counter() - t0
    ok = all(v <= 0 for v in worst.values()) and dt < 5.0
    return report(3, ok, "max of Vdot + alpha V - 1e-6|x|^2: " + ", ".join(f"{m} {v:.2e}" for m, v in worst.items()), dt)


def step_linear(A, x, h):
    k1 = A @ x
    k2 = A @ (x + 0.5 * h * k1)
    k3 = A @ (x + 0.5 * h * k2)
    k4 = A @ (x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def criterion_4():
    t0 = time.perf_counter()
    r = np.random.default_rng(4)
    v2 = v3 = 0
    for _ in range(1000):
        n, m = r.integers(1, 6, size=2)
        E, F = r.standard_normal((n, m)), r.standard_normal((n, m))
        if eig_sym(E @ E.T + F @ F.T - E @ F.T - F @ E.T)[0][0] < -1e-10:
            v2 += 1
    for _ in range(1000):
        n = int(r.integers(1, 6))
        iv = IntervalMatrix(sym(r.standard_normal((n, n))), np.abs(r.standard_normal((n, n))))
        x = r.standard_normal(n)
        x[r.random(n) < 0.2] = 0.0
        bound = x @ maximize_op(iv, x) @ x
        draws = iv.center + r.uniform(-1, 1, (50, n, n)) * iv.halfwidth
        if np.any(np.einsum("i,kij,j->k", x, draws, x) > bound + 1e-12):
            v3 += 1
    dt = time.perf_counter() - t0
    return report(4, v2 == 0 and v3 == 0, f"product-inequality violations {v2}/1000, maximize-bound violations {v3}/1000", dt)


def criterion_5():
    t0 = time.perf_counter()
    m = run_episode(ScenarioConfig()).metrics
    dt = time.perf_counter() - t0
    ok = 20.0 <= m.settling_time_min <= 90.0 and m.min_g_mgdl >= 70.0 and dt < 5.0
    return report(5, ok, f"settling {m.settling_time_min:.1f} min (in [20, 90]), min glucose {m.min_g_mgdl:.1f} mg/dL", dt)


def criterion_6():
    t0 = time.perf_counter()
    base = replace(ScenarioConfig(), scenario="meals", duration=MEAL_DURATION)
    ms = {c: run_episode(replace(base, noise_case=c)).metrics for c in (1, 2, 3, 4)}
    dt = time.perf_counter() - t0
    safe = all(m.hypo_events == 0 and not m.unstable_flag for m in ms.values())
    monotone = ms[4].max_postprandial_g >= ms[1].max_postprandial_g
    peaks = ", ".join(f"case {c} {m.max_postprandial_g:.1f}" for c, m in ms.items())
    detail = f"hypo/unstable free: {safe}; peak case4 >= case1: {monotone} ({peaks} mg/dL)"
    return report(6, safe and monotone and dt < 30.0, detail, dt)


def criterion_7():
    t0 = time.perf_counter()
    opt = run_episode(replace(ScenarioConfig(), controller="optimal")).metrics
    rob = run_episode(ScenarioConfig()).metrics
    dt = time.perf_counter() - t0

    def degraded(m):
        return m.unstable_flag or (m.deep_clamp_fraction >= 0.5)

    ok = degraded(opt) and not degraded(rob)
    detail = (
        f"optimal unstable={opt.unstable_flag} clamp={opt.deep_clamp_fraction:.2f}; "
        f"robust unstable={rob.unstable_flag} clamp={rob.deep_clamp_fraction:.2f}"
    )
    return report(7, ok, detail, dt)


def criterion_8():
    z = normal_quantile(0.975)
    s = PlantState(0.0, 0.0, 10.0, 0.0)
    p = PatientParams()
    for _ in range(100):
        s, _ = step(s, 0.0, 0.0, p, NoiseSpec(), None, 0.1)
    rk = abs(s.g - 10.0 * math.exp(-p.p1 * 10.0)) / (10.0 * math.exp(-p.p1 * 10.0))
    r = np.random.default_rng(8)
    res = 0.0
    for _ in range(100):
        M = sym(r.standard_normal((8, 8)))
        lam, V = eig_sym(M)
        res = max(res, np.abs(V @ np.diag(lam) @ V.T - M).max())
    ok = abs(z - 1.95996398) <= 1e-6 and rk <= 1e-8 and res <= 1e-10
    return report(8, ok, f"quantile error {abs(z - 1.95996398):.1e}, RK4 rel error {rk:.1e}, eig residual {res:.1e}")


def criterion_9(tmp_dir):
    t0 = time.perf_counter()
    a, b = tmp_dir / "a", tmp_dir / "b"
    with contextlib.redirect_stdout(io.StringIO()):
        codes = [cli_main(["suite", "--seed", "42", "--out", str(d)]) for d in (a, b)]
    names = sorted(p.name for p in a.iterdir())
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    dt = time.perf_counter() - t0
    ok = len(names) == 10 and not mismatch and not errors and codes[0] == codes[1] != 2
    return report(9, ok, f"{len(names)} CSV files, {len(mismatch) + len(errors)} differ", dt)


@pytest.mark.parametrize("n", range(1, 9))
def test_criterion(n):
    assert globals()[f"criterion_{n}"]()


def test_criterion_9(tmp_path):
    assert criterion_9(tmp_path)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    results = [globals()[f"criterion_{n}"]() for n in range(1, 9)]
    with tempfile.TemporaryDirectory() as d:
        results.append(criterion_9(Path(d)))
    sys.exit(0 if all(results) else 1)
