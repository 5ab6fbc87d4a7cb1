"""Write every evaluation table for one config into its output directory."""

import argparse
from pathlib import Path

from sumd.harness import experiments as ex


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", help="defaults to the config's out_dir")
    args = ap.parse_args()
    config = ex.ExperimentConfig.load(args.config)
    out = Path(args.out or config.out_dir)
    records = ex.load_records(config)
    print(ex.dataset_stats_json(records))
    for build in (ex.table_cluster_agreement, ex.table_group_proportions, ex.table_success_rate,
                  ex.table_disjointness, ex.bench_mpc):
        table = build(config, records)
        table.write(out)
        print(table.to_text())


if __name__ == "__main__":
    main()
