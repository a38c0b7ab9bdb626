"""Critic accuracy on the linearized plant against the Lyapunov solution.

Sweeps the integration step and reports the relative Frobenius error of
the learned kernel, with and without the input-mismatch correction.
"""
import numpy as np

from robust_irl.critic import TransitionSample, estimate_value
from robust_irl.matrix_core import solve_lyapunov
from robust_irl.oracle import collect_linear_samples
from robust_irl.plant import PatientParams, linearize

LIN = linearize(PatientParams(), 5.0, 0.0)
K = np.array([[-0.5, 2.0]])
Q, R = np.eye(2), 1e-4 * np.eye(1)


def main():
    P = solve_lyapunov(LIN.closed_loop(K), Q + K.T @ R @ K)
    print("dt      corrected   uncorrected")
    for dt in (0.1, 0.05, 0.01, 0.005):
        samples, _ = collect_linear_samples(LIN, K, [11.1, 0.0], Q, R, 40, dt=dt, probe=0.5, rng=np.random.default_rng(3))
        plain = [TransitionSample(s.t, s.x_start, s.x_end, s.d) for s in samples]
        errs = []
        for ss in (samples, plain):
            try:
                errs.append(f"{np.linalg.norm(estimate_value(ss).P_hat - P) / np.linalg.norm(P):.2e}")
            except ValueError as exc:
                errs.append(type(exc).__name__)
        print(f"{dt:<7g} {errs[0]:<11} {errs[1]}")


if __name__ == "__main__":
    main()
