"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error. ``judge verify`` exits
0 (not proven), 10 (violation) or 2 (integrity failure).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..ingest import DataError, dump_records, sparsity_stats, synthesize_dataset
from ..judge import adjudicate, verify_evidence
from ..ledger import EntryStore, Ledger, LedgerError
from ..probing import Evidence, select_target_items
from . import experiments as ex

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

REPORTS = {
    "cluster-agreement": ex.table_cluster_agreement,
    "groups": ex.table_group_proportions,
    "success-rate": ex.table_success_rate,
    "disjointness": ex.table_disjointness,
    "bench-mpc": ex.bench_mpc,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sumd", description="Replay, probe and judge stop-using-my-data requests.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("replay", help="replay a dataset and probe each victim")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (defaults to the config's out_dir)")

    rep = sub.add_parser("report", help="emit one evaluation table")
    rep.add_argument("name", choices=sorted(REPORTS))
    rep.add_argument("--config", required=True)
    rep.add_argument("--out", required=True)

    j = sub.add_parser("judge", help="independent verification")
    jsub = j.add_subparsers(dest="judge_command", required=True, parser_class=_Parser)
    v = jsub.add_parser("verify", help="verify evidence against a ledger")
    v.add_argument("--evidence", required=True)
    v.add_argument("--chain", required=True)
    v.add_argument("--entries", required=True)
    v.add_argument("--metadata-s", type=int, required=True, dest="metadata_s")
    v.add_argument("--head", help="externally held head digest (hex)")

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--users", type=int, required=True)
    s.add_argument("--items", type=int, required=True)
    s.add_argument("--records", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    s.add_argument("--rating-levels", type=int, default=5)
    s.add_argument("--zipf", type=float, default=1.1)
    return p


def _cmd_replay(args) -> int:
    config = ex.ExperimentConfig.load(args.config)
    out = Path(args.out or config.out_dir)
    records = ex.load_records(config)
    summary = {"dataset": json.loads(sparsity_stats(records).to_json()), "fractions": []}
    for f in config.fractions:
        rep = ex.run_replay(config, f, records)
        victims = [v for v in ex.victims_for(config, rep.community) if select_target_items(rep.community, v)]
        fdir = out / f"community_{f:g}"
        col = {"fraction": f, "members": len(rep.members), "group_one": len(rep.community.group_one_members()),
               "victims": []}
        for v in victims:
            # each victim runs on its own copy of the platform and ledger
            fork = ex.ReplayResult(rep.records, rep.members, rep.platform.fork(), rep.community,
                                   rep.ledger.fork())
            det = ex.run_detection(fork, v, config.max_probe_rounds, config.probe_seed)
            vdir = fdir / v
            vdir.mkdir(parents=True, exist_ok=True)
            (vdir / "chain.json").write_text(fork.ledger.chain_json())
            (vdir / "entries.jsonl").write_text(fork.ledger.store.to_jsonl())
            (vdir / "evidence.json").write_text(
                json.dumps([e.to_dict() for e in det.outcome.evidences], sort_keys=True, indent=1))
            (vdir / "export.json").write_bytes(det.export)
            (vdir / "head.txt").write_text(fork.ledger.head.hex() + "\n")
            col["victims"].append({"victim": v, "status": det.outcome.status,
                                   "rounds": det.outcome.rounds_used, "export_ref": det.export_ref})
        summary["fractions"].append(col)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    for col in summary["fractions"]:
        proven = sum(v["status"] == "violation_proven" for v in col["victims"])
        print(f"fraction {col['fraction']:g}: {col['members']} members, {col['group_one']} group one, "
              f"{len(col['victims'])} probed, {proven} violation proven")
    return EXIT_OK


def _cmd_report(args) -> int:
    config = ex.ExperimentConfig.load(args.config)
    table = REPORTS[args.name](config)
    table.write(args.out)
    print(table.to_text(), end="")
    return EXIT_OK


def _cmd_judge(args) -> int:
    raw = json.loads(Path(args.evidence).read_text())
    evidences = [Evidence.from_dict(d) for d in (raw if isinstance(raw, list) else [raw])]
    chain = Ledger.load_chain(Path(args.chain).read_text())
    store = EntryStore.from_jsonl(Path(args.entries).read_text())
    head = bytes.fromhex(args.head) if args.head else None
    results = [verify_evidence(ev, chain, store, args.metadata_s, head) for ev in evidences]
    verdict = adjudicate(results, args.metadata_s)
    print(verdict.to_json())
    return verdict.exit_code


def _cmd_synth(args) -> int:
    records = synthesize_dataset(args.users, args.items, args.records, args.rating_levels, args.seed, args.zipf)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_records(records, args.format))
    print(sparsity_stats(records).to_json())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sumd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    handler = {"replay": _cmd_replay, "report": _cmd_report, "judge": _cmd_judge, "synth": _cmd_synth}
    try:
        return handler[args.command](args)
    except (DataError, LedgerError, OSError, KeyError, TypeError, ValueError) as exc:
        # json.JSONDecodeError is a ValueError
        print(f"sumd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
