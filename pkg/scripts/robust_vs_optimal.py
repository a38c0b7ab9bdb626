"""Fasting case 1 with the robust and the optimal (certainty-equivalence) updates."""
import argparse
from dataclasses import replace

import numpy as np

from robust_irl.harness import ScenarioConfig, run_episode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for ctrl in ("robust", "optimal"):
        r = run_episode(replace(ScenarioConfig(seed=args.seed), controller=ctrl))
        m = r.metrics
        K = r.series[-1, [9, 10]]
        u = r.column("u_command")
        print(
            f"{ctrl:<8} final K={np.array2string(K, precision=4)}  min u_command={u.min():.4g}  "
            f"deep_clamp={m.deep_clamp_fraction:.2f}  unstable={m.unstable_flag}  settling={m.settling_time_min:.1f}"
        )


if __name__ == "__main__":
    main()
