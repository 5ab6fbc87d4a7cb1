"""One-round success rates in violating mode over seeds, fractions and rating scales."""

import argparse

from sumd.harness.experiments import ExperimentConfig, SyntheticParams, run_replay, success_rates, synthetic_seed
from sumd.platform import PlatformConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.2, 0.5])
    ap.add_argument("--rating-levels", type=int, nargs="+", default=[5, 1])
    ap.add_argument("--zipf", type=float, default=1.1)
    args = ap.parse_args()
    print("levels  fraction  victims  mean    pooled")
    for levels in args.rating_levels:
        for frac in args.fractions:
            params = SyntheticParams(rating_levels=levels, zipf_exponent=args.zipf)
            base = ExperimentConfig(synthetic=params, fractions=[frac], platform=PlatformConfig(mode="violating"))
            weighted, victims, M, N = 0.0, 0, 0, 0
            for seed in range(args.seeds):
                sr = success_rates(rep := run_replay(synthetic_seed(base, seed)), rep.community.group_one_members())
                if sr["victims"]:
                    weighted += sr["mean_rate"] * sr["victims"]
                    victims += sr["victims"]
                M, N = M + sr["M"], N + sr["N"]
            mean = f"{weighted / victims:.3f}" if victims else "n/a"
            print(f"{levels:<6}  {frac:<8g}  {victims:<7}  {mean:<6}  {M}/{N}")


if __name__ == "__main__":
    main()
