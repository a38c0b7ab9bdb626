import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_irl.critic import (
    EstimateRejected,
    ExcitationError,
    InsufficientDataError,
    TransitionSample,
    accumulate_cost,
    beta_bound,
    build_regression,
    estimate_from_matrices,
    estimate_value,
    input_mismatch_terms,
    least_squares,
    normal_quantile,
)
from robust_irl.matrix_core import IntervalMatrix, LinearModel, pack_upper, solve_lyapunov, spectral_norm, sym, sym_basis
from robust_irl.oracle import collect_linear_samples
from robust_irl.plant import PatientParams, linearize


def test_accumulate_cost_examples():
    ts = np.linspace(0, 1, 11)
    xs = np.tile([1.0, 0.0], (11, 1))
    assert accumulate_cost(ts, xs, np.zeros((11, 1)), np.eye(2), [[1.0]]) == pytest.approx(1.0)
    assert accumulate_cost(ts, np.zeros((11, 2)), np.zeros((11, 1)), np.eye(2), [[1.0]]) == 0.0
    ts = np.arange(0, 1.0005, 0.001)
    val = accumulate_cost(ts, np.exp(-ts)[:, None], np.zeros((ts.size, 1)), [[1.0]], [[0.0]])
    assert val == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-5)


def test_accumulate_cost_needs_two_records():
    with pytest.raises(InsufficientDataError):
        accumulate_cost([0.0], [[1.0]], [[0.0]], [[1.0]], [[1.0]])


def test_accumulate_cost_includes_control():
    ts = np.linspace(0, 2, 5)
    val = accumulate_cost(ts, np.zeros((5, 1)), np.full((5, 1), 3.0), [[1.0]], [[0.5]])
    assert val == pytest.approx(0.5 * 9 * 2)


def test_build_regression_examples():
    X, Y = build_regression([TransitionSample(0.0, [1, 0], [0, 0], 0.7)])
    np.testing.assert_array_equal(X, [[1, 0, 0]])
    np.testing.assert_array_equal(Y, [0.7])
    X, _ = build_regression([TransitionSample(0.0, [2, 3], [2, 3], 0.0)])
    np.testing.assert_array_equal(X, [[0, 0, 0]])


def test_build_regression_matches_kron_contraction(rng):
    samples = [TransitionSample(k, rng.standard_normal(2), rng.standard_normal(2), 1.0) for k in range(3)]
    X, _ = build_regression(samples)
    for row, s in zip(X, samples):
        full = np.kron(s.x_start, s.x_start) - np.kron(s.x_end, s.x_end)
        # contract (i,j) and (j,i) into the upper-triangle slot
        np.testing.assert_allclose(row, [full[0], full[1] + full[2], full[3]])


def test_build_regression_empty():
    with pytest.raises(InsufficientDataError):
        build_regression([])


def test_sample_validation():
    with pytest.raises(ValueError):
        TransitionSample(0.0, [1, 2], [1], 0.0)
    with pytest.raises(ValueError):
        TransitionSample(0.0, [1], [1], -0.1)
    with pytest.raises(ValueError):
        TransitionSample(0.0, [1, 2], [1, 2], 0.0, correction=[1.0])


def test_least_squares_examples(rng):
    w, s2, tau = least_squares([[1.0], [1.0]], [2.0, 2.0])
    np.testing.assert_allclose(w, [2.0])
    assert s2 == pytest.approx(0.0, abs=1e-30)
    np.testing.assert_allclose(tau, [0.5])
    with pytest.raises(ExcitationError):
        least_squares(np.eye(2), [3.0, 4.0])
    X = rng.standard_normal((40, 3))
    w_true = np.array([1.5, -2.0, 0.25])
    w, s2, tau = least_squares(X, X @ w_true)
    np.testing.assert_allclose(w, w_true, atol=1e-9)
    np.testing.assert_allclose(tau, np.diag(np.linalg.inv(X.T @ X)), rtol=1e-10)


def test_least_squares_rank_deficient(rng):
    X = rng.standard_normal((10, 2))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])
    with pytest.raises(ExcitationError):
        least_squares(X, rng.standard_normal(10))
    with pytest.raises(ExcitationError):
        least_squares(np.column_stack([X[:, :2], np.zeros(10)]), rng.standard_normal(10))


def test_normal_quantile_examples():
    assert normal_quantile(0.5) == 0.0
    assert abs(normal_quantile(0.975) - 1.95996398) <= 1e-6
    assert abs(normal_quantile(0.84134474) - 1.0) <= 1e-6
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            normal_quantile(bad)


@given(st.floats(1e-9, 1 - 1e-9))
def test_normal_quantile_inverts_cdf(p):
    q = normal_quantile(p)
    assert abs(0.5 * math.erfc(-q / math.sqrt(2)) - p) <= 1e-8


def test_estimate_value_scalar_plant():
    # xdot = -x, q_eff = 2: P = 1
    samples = []
    for x0 in (1.0, -2.0, 0.5, 3.0):
        ts = np.linspace(0, 1, 1001)
        xs = x0 * np.exp(-ts)
        d = 2 * x0**2 * (1 - math.exp(-2)) / 2
        samples.append(TransitionSample(0.0, [x0], [xs[-1]], d))
    est = estimate_value(samples)
    np.testing.assert_allclose(est.P_hat, [[1.0]], rtol=1e-12)
    assert est.delta_w[0] <= 1e-6
    assert est.beta <= 1e-6


def test_estimate_value_halfwidth_formula():
    # four rows with X = 1: tau = 1/4; residuals +-sqrt(3): sigma2 = 12 / 3 = 4
    r3 = math.sqrt(3.0)
    samples = [TransitionSample(0.0, [1.0], [0.0], 5.0 + s * r3) for s in (1, -1, 1, -1)]
    est = estimate_value(samples)
    assert est.sigma2_hat == pytest.approx(4.0)
    assert est.delta_w[0] == pytest.approx(1.959963985, abs=1e-6)
    np.testing.assert_allclose(est.P_hat, [[5.0]])


def test_estimate_value_rejects_indefinite():
    # exact data for P = diag(1, -1)
    pts = ((1, 0), (2, 1), (3, 1), (2, 0.5), (3, 2))
    samples = [TransitionSample(0.0, [x, y], [0.0, 0.0], x * x - y * y) for x, y in pts]
    with pytest.raises(EstimateRejected) as info:
        estimate_value(samples)
    np.testing.assert_allclose(info.value.estimate.P_hat, np.diag([1.0, -1.0]), atol=1e-9)


def test_estimate_value_theta_range():
    with pytest.raises(ValueError):
        estimate_value([TransitionSample(0.0, [1.0], [0.0], 1.0)] * 3, theta=1.0)


def test_beta_bound_examples(rng):
    assert beta_bound(IntervalMatrix(np.zeros((2, 2)), np.full((2, 2), 0.1))) == pytest.approx(0.2)
    assert beta_bound(IntervalMatrix(np.eye(2), np.zeros((2, 2)))) == 0.0
    h = np.abs(sym(rng.standard_normal((3, 3))))
    b = beta_bound(IntervalMatrix(np.zeros((3, 3)), h))
    worst = 0.0
    for _ in range(10_000):
        S = rng.choice([-1.0, 1.0], size=(3, 3))
        S = np.triu(S) + np.triu(S, 1).T
        worst = max(worst, spectral_norm(S * h))
    assert worst <= b + 1e-12


def test_estimate_from_matrices():
    est = estimate_from_matrices(np.diag([2.0, 3.0]), np.full((2, 2), 0.1))
    assert est.beta == pytest.approx(0.2)
    np.testing.assert_allclose(est.w_hat, pack_upper(np.diag([2.0, 3.0])))
    np.testing.assert_allclose(est.halfwidth, np.full((2, 2), 0.1))


def test_input_mismatch_terms_match_quadratic_form(rng):
    ts = np.linspace(0.0, 1.0, 6)
    xs = rng.standard_normal((6, 2))
    v = rng.standard_normal((5, 2))
    P = sym(rng.standard_normal((2, 2)))
    xm = 0.5 * (xs[1:] + xs[:-1])
    direct = sum(2 * xm[k] @ P @ v[k] * 0.2 for k in range(5))
    assert pack_upper(P) @ input_mismatch_terms(ts, xs, v) == pytest.approx(direct)


LIN = linearize(PatientParams(), 5.0, 0.0)
K_STAB = np.array([[-0.5, 2.0]])


def _lyap(model, K, Q, R):
    return solve_lyapunov(model.closed_loop(K), Q + K.T @ R @ K)


def test_lyapunov_oracle_equivalence():
    Q, R = np.eye(2), 1e-4 * np.eye(1)
    samples, _ = collect_linear_samples(LIN, K_STAB, [11.1, 0.0], Q, R, 40, T=1.0, dt=0.005, probe=0.5, rng=np.random.default_rng(3))
    est = estimate_value(samples)
    P = _lyap(LIN, K_STAB, Q, R)
    assert np.linalg.norm(est.P_hat - P) / np.linalg.norm(P) <= 1e-3


def test_bellman_residual_on_held_out_samples():
    Q, R = np.eye(2), 1e-4 * np.eye(1)
    rng = np.random.default_rng(5)
    samples, _ = collect_linear_samples(LIN, K_STAB, [11.1, 0.0], Q, R, 60, T=1.0, dt=0.005, probe=0.5, rng=rng)
    est = estimate_value(samples[:40])
    # held-out windows without probing satisfy the plain Bellman identity
    held, _ = collect_linear_samples(LIN, K_STAB, [-4.0, 0.3], Q, R, 10, T=1.0, dt=0.005, rng=rng)
    P = est.P_hat
    for s in held:
        res = s.x_start @ P @ s.x_start - s.d - s.x_end @ P @ s.x_end
        assert abs(res) <= 1e-3 * max(1.0, s.d)


def test_probing_without_correction_is_biased():
    Q, R = np.eye(2), 1e-4 * np.eye(1)
    samples, _ = collect_linear_samples(LIN, K_STAB, [11.1, 0.0], Q, R, 40, T=1.0, dt=0.005, probe=0.5, rng=np.random.default_rng(3))
    plain = [TransitionSample(s.t, s.x_start, s.x_end, s.d) for s in samples]
    P = _lyap(LIN, K_STAB, Q, R)
    err_plain = np.linalg.norm(estimate_value(plain).P_hat - P) / np.linalg.norm(P)
    err_corr = np.linalg.norm(estimate_value(samples).P_hat - P) / np.linalg.norm(P)
    assert err_corr < 1e-3 < err_plain


@settings(max_examples=3)
@given(st.integers(0, 2**32 - 1))
def test_ci_shrinks_with_more_data(seed):
    # 20 seeded trials per example; the average ratio should be about 1/2
    r = np.random.default_rng(seed)
    model = LinearModel([[-1.0, 0.5], [0.0, -2.0]], [[0.0], [1.0]])
    K = np.zeros((1, 2))
    Q, R = np.eye(2), np.eye(1)
    ratios = []
    for _ in range(20):
        xs0 = r.uniform(-1, 1, (4 * 12, 2))
        samples = []
        for x0 in xs0:
            s, _ = collect_linear_samples(model, K, x0, Q, R, 1, T=0.5, dt=0.05)
            s = s[0]
            samples.append(TransitionSample(s.t, s.x_start + 0.01 * r.standard_normal(2), s.x_end + 0.01 * r.standard_normal(2), s.d))
        small = estimate_from_samples(samples[:12])
        big = estimate_from_samples(samples)
        if small is None or big is None:
            continue
        ratios.append(np.mean(big.delta_w / small.delta_w))
    assert ratios and np.mean(ratios) <= 0.75


def estimate_from_samples(samples):
    try:
        return estimate_value(samples)
    except EstimateRejected:
        return None


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 10)), min_size=4, max_size=12))
def test_nonnegativity(rows):
    samples = [TransitionSample(0.0, [a, b], [c, d], e) for a, b, c, d, e in rows]
    assert all(s.d >= 0 for s in samples)
    try:
        est = estimate_value(samples)
    except (ExcitationError, EstimateRejected):
        return
    assert est.beta >= 0
    assert np.all(est.delta_w >= 0)
