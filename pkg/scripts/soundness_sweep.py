"""Run many honest replays end to end and count violation verdicts (expected: none)."""

import argparse
from collections import Counter

from sumd.harness.experiments import ExperimentConfig, end_to_end, synthetic_seed


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="base config; the synthetic defaults when omitted")
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--fraction", type=float, default=0.2)
    args = ap.parse_args()
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig(fractions=[args.fraction])
    base = base.with_mode("honest")
    counts: Counter[str] = Counter()
    for seed in range(args.seeds):
        case = end_to_end(synthetic_seed(base, seed), args.fraction, seed=seed)
        counts["no victim" if case.verdict is None else case.verdict.decision] += 1
    print(dict(counts))


if __name__ == "__main__":
    main()
