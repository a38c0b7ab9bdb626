"""Sweep the probing amplitude and count hypoglycemia events in the fasting scenario."""
import argparse
from dataclasses import replace

from robust_irl.harness import ScenarioConfig, run_episode
from robust_irl.harness.config import ProbeConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.0, 0.01, 0.05, 0.1, 0.5])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("amplitude  hypo_events  min_g_mgdl  settling_min  accepted_updates")
    for a in args.amplitudes:
        cfg = replace(ScenarioConfig(seed=args.seed), probe=ProbeConfig(amplitude=a))
        r = run_episode(cfg)
        m = r.metrics
        acc = sum(e.outcome == "accepted" for e in r.updates)
        print(f"{a:<10g} {m.hypo_events:<12d} {m.min_g_mgdl:<11.1f} {m.settling_time_min:<13.1f} {acc}")


if __name__ == "__main__":
    main()
