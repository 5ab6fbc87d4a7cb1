"""Time plaintext against secret-shared similarity construction."""

import argparse

from sumd.harness.experiments import ExperimentConfig, bench_mpc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/bench_mpc.json")
    args = ap.parse_args()
    config = ExperimentConfig.load(args.config)
    if config.similarity_backend != "shared":
        config = ExperimentConfig.from_dict({**config.to_dict(), "similarity_backend": "shared"})
    print(bench_mpc(config).to_text())


if __name__ == "__main__":
    main()
