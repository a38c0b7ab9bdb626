"""Fasting settling time and meal-day peaks across seeds.

Prints, per seed, the fasting settling time (case 1) and the postprandial
peak for each noise case of the meal day.
"""
import argparse
from dataclasses import replace

from robust_irl.harness import ScenarioConfig, run_episode
from robust_irl.harness.suite import MEAL_DURATION


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 7, 42])
    ap.add_argument("--skip-meals", action="store_true")
    args = ap.parse_args()
    print("seed  fasting_settling  min_g   " + ("" if args.skip_meals else "peak_case1..4"))
    for s in args.seeds:
        m = run_episode(ScenarioConfig(seed=s)).metrics
        line = f"{s:<5d} {m.settling_time_min:<17.1f} {m.min_g_mgdl:<7.1f} "
        if not args.skip_meals:
            base = replace(ScenarioConfig(seed=s), scenario="meals", duration=MEAL_DURATION)
            peaks = [run_episode(replace(base, noise_case=c)).metrics.max_postprandial_g for c in (1, 2, 3, 4)]
            line += " ".join(f"{p:.1f}" for p in peaks)
        print(line)


if __name__ == "__main__":
    main()
