"""Show that the printed initial gain K0 = [0.27, -266] destabilizes the plant.

Runs a short fasting episode from that gain and reports when the state
first leaves the divergence guard, then the same episode from the
default initial gain.
"""
import argparse
from dataclasses import replace

from robust_irl.harness import ScenarioConfig, run_episode
from robust_irl.harness.config import PRINTED_K0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=120.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    base = ScenarioConfig(duration=args.duration, seed=args.seed)
    for label, cfg in (("printed K0", replace(base, K0=PRINTED_K0)), ("default K0", base)):
        r = run_episode(cfg)
        div = [e.t for e in r.updates if e.outcome == "diverged"]
        m = r.metrics
        first = f"{div[0]:.1f} min" if div else "never"
        print(f"{label:<11} K0={cfg.K0[0]}  first divergence: {first:<10} unstable={m.unstable_flag}  min_g={m.min_g_mgdl:.1f}")


if __name__ == "__main__":
    main()
