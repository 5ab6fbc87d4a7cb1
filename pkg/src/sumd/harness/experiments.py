"""Replay driver and the evaluation protocol behind the report tables."""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..community import CommunityState, OracleCommunity
from ..ingest import (RatingRecord, dedupe_records, parse_records, sample_community, sparsity_stats,
                      synthesize_dataset)
from ..judge import Verdict, adjudicate, verify_evidence
from ..ledger import Ledger
from ..mpc import PlaintextBackend, SharedBackend, backend_from_config
from ..platform import HONEST, Platform, PlatformConfig
from ..probing import (ProbeOutcome, TargetItem, probe_until_success, select_target_items,
                       trial_evidences)
from .reports import ReportTable, pct


@dataclass
class SyntheticParams:
    n_users: int = 500
    n_items: int = 5000
    n_records: int = 2000
    rating_levels: int = 5
    seed: int = 0
    zipf_exponent: float = 1.1
    user_exponent: float = 0.0


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    dataset_format: str = "jsonl"
    raw_max: float = 5.0
    synthetic: SyntheticParams | None = field(default_factory=SyntheticParams)
    fractions: list[float] = field(default_factory=lambda: [0.02, 0.05, 0.10, 0.20])
    community_seed: int = 0
    platform: PlatformConfig = field(default_factory=PlatformConfig)
    similarity_backend: str = "plaintext"
    n_parties: int = 3
    mpc_seed: int = 0
    victim_policy: str = "all_group_one"
    max_probe_rounds: int = 3
    probe_seed: int = 0
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if not self.fractions or any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("community fractions must lie in (0, 1]")
        if self.dataset is None and self.synthetic is None:
            raise ValueError("config needs either a dataset path or synthetic parameters")
        if not (self.victim_policy == "all_group_one" or self.victim_policy.startswith("single:")):
            raise ValueError("victim_policy must be 'all_group_one' or 'single:<user>'")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        if isinstance(d.get("synthetic"), Mapping):
            d["synthetic"] = SyntheticParams(**d["synthetic"])
        if isinstance(d.get("platform"), Mapping):
            d["platform"] = PlatformConfig.from_dict(d["platform"])
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if d.get("dataset") is not None and "synthetic" not in d:
            d["synthetic"] = None
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_mode(self, mode: str) -> "ExperimentConfig":
        d = self.to_dict()
        d["platform"]["mode"] = mode
        return ExperimentConfig.from_dict(d)


def load_records(config: ExperimentConfig) -> list[RatingRecord]:
    if config.dataset is not None:
        data = Path(config.dataset).read_bytes()
        return dedupe_records(parse_records(data, config.dataset_format, config.raw_max))
    s = config.synthetic
    return synthesize_dataset(s.n_users, s.n_items, s.n_records, s.rating_levels, s.seed,
                              s.zipf_exponent, s.user_exponent)


@dataclass
class ReplayResult:
    records: list[RatingRecord]
    members: frozenset[str]
    platform: Platform
    community: CommunityState
    ledger: Ledger
    oracle: OracleCommunity | None = None


def run_replay(config: ExperimentConfig, fraction: float | None = None, records: list[RatingRecord] | None = None,
               members: Iterable[str] | None = None, with_oracle: bool = False) -> ReplayResult:
    """Replay every record through the platform; members' events also feed
    the community and the ledger."""
    if records is None:
        records = load_records(config)
    if members is None:
        frac = config.fractions[0] if fraction is None else fraction
        members = sample_community(records, frac, config.community_seed).members if records else frozenset()
    members = frozenset(members)
    platform = Platform(config.platform)
    backend = backend_from_config({"similarity_backend": config.similarity_backend,
                                   "n_parties": config.n_parties, "seed": config.mpc_seed})
    community = CommunityState(members, backend)
    oracle = OracleCommunity(members, platform.real_map) if with_oracle else None
    ledger = Ledger()
    for r in sorted(records, key=lambda r: r.seq):
        member = r.user in members
        disclosure = platform.record_purchase(r.user, r.item, r.rating, seq=r.seq, respond=member)
        if member:
            community.on_member_purchase(r.user, r.item, r.rating, disclosure)
            if oracle is not None:
                oracle.on_member_purchase(r.user, r.item, r.rating, disclosure)
            ledger.record_purchase(r.user, r.item, r.rating, disclosure)
    return ReplayResult(list(records), members, platform, community, ledger, oracle)


def victims_for(config: ExperimentConfig, community: CommunityState) -> list[str]:
    if config.victim_policy.startswith("single:"):
        return [config.victim_policy.split(":", 1)[1]]
    return community.group_one_members()


@dataclass
class Detection:
    victim: str
    export: bytes
    export_ref: int
    targets: list[str]
    outcome: ProbeOutcome


def run_detection(replay: ReplayResult, victim: str, max_rounds: int, seed: int) -> Detection:
    """Commit the community export, issue the victim's stop-request, then probe.

    Mutates the replay's platform and ledger.
    """
    platform, ledger, community = replay.platform, replay.ledger, replay.community
    export = community.export_bytes()
    export_ref = ledger.record_export(victim, export, platform.clock)
    stop_seq = platform.stop_request(victim)
    ledger.record_stop(victim, stop_seq)
    targets = [t.item for t in select_target_items(community, victim)]
    outcome = probe_until_success(platform, community, victim, max_rounds, random.Random(seed), ledger)
    return Detection(victim, export, export_ref, targets, outcome)


@dataclass
class CaseVerdict:
    seed: int
    victim: str | None
    detection: Detection | None
    verdict: Verdict | None


def end_to_end(config: ExperimentConfig, fraction: float | None = None, seed: int = 0,
               records: list[RatingRecord] | None = None) -> CaseVerdict:
    """Replay, pick one group-one victim with targets, probe, then let the judge decide."""
    rep = run_replay(config, fraction, records)
    candidates = [v for v in victims_for(config, rep.community) if select_target_items(rep.community, v)]
    if not candidates:
        return CaseVerdict(seed, None, None, None)
    victim = random.Random(seed).choice(candidates)
    det = run_detection(rep, victim, config.max_probe_rounds, config.probe_seed + seed)
    S = rep.platform.metadata()["cluster_size_S"]
    checks = [verify_evidence(ev, rep.ledger.chain, rep.ledger.store, S, rep.ledger.head)
              for ev in det.outcome.evidences]
    return CaseVerdict(seed, victim, det, adjudicate(checks, S))


def synthetic_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Same config with the dataset, community, platform and probe seeds all set to ``seed``."""
    d = config.to_dict()
    d["synthetic"]["seed"] = seed
    d["community_seed"] = seed
    d["platform"]["seed"] = seed
    d["probe_seed"] = seed
    return ExperimentConfig.from_dict(d)


# -- evaluation tables ------------------------------------------------------

def cluster_agreement(aux: CommunityState, oracle: CommunityState) -> dict:
    targets = select_target_items(aux, None)
    n = len(targets)
    same = [t for t in targets if set(aux.clusters[t.item].members) == set(_members(oracle, t.item))]
    aux_sizes = [len(aux.clusters[t.item]) for t in targets]
    real_sizes = [len(_members(oracle, t.item)) for t in targets]
    same_sizes = [len(aux.clusters[t.item]) for t in same]
    avg = lambda xs: sum(xs) / len(xs) if xs else float("nan")  # noqa: E731
    return {"targets": n, "same": len(same), "same_pct": 100.0 * len(same) / n if n else float("nan"),
            "avg_aux": avg(aux_sizes), "avg_real": avg(real_sizes), "avg_same": avg(same_sizes)}


def _members(state: CommunityState, item: str) -> dict:
    c = state.clusters.get(item)
    return c.members if c is not None else {}


def group_proportions(community: CommunityState) -> dict:
    observed_users = sorted({o.user for o in community.observed})
    g1 = community.group_one_members()
    lengths = [len(community.histories[u]) for u in g1]
    return {
        "members_observed": len(observed_users),
        "group_one": len(g1),
        "group_one_pct": 100.0 * len(g1) / len(observed_users) if observed_users else float("nan"),
        "min_len": min(lengths) if lengths else None,
        "max_len": max(lengths) if lengths else None,
        "avg_len": sum(lengths) / len(lengths) if lengths else None,
    }


def success_rates(replay: ReplayResult, victims: Sequence[str]) -> dict:
    """Per-victim mean and pooled M/N over victims that have target items."""
    per_victim: list[Fraction] = []
    m_total = n_total = 0
    for v in victims:
        evs = trial_evidences(replay.platform, replay.community, v)
        if not evs:
            continue
        m = sum(e.lemma_triggered for e in evs)
        per_victim.append(Fraction(m, len(evs)))
        m_total += m
        n_total += len(evs)
    return {
        "victims": len(per_victim),
        "mean_rate": float(sum(per_victim) / len(per_victim)) if per_victim else None,
        "pooled_rate": m_total / n_total if n_total else None,
        "M": m_total,
        "N": n_total,
    }


def disjointness(community: CommunityState, probes: Iterable[tuple[str, str]]) -> dict:
    """Share of (victim, probe item) pairs whose cluster snapshot avoids the victim's history cluster.

    The probe item itself may sit in that cluster; only its cluster members count.
    """
    total = disjoint = 0
    flagged = []
    for victim, item in probes:
        total += 1
        hc = community.history_cluster(victim)
        if not (set(_members(community, item)) & hc):
            disjoint += 1
        else:
            flagged.append((victim, item))
    return {"probes": total, "disjoint": disjoint,
            "pct": 100.0 * disjoint / total if total else float("nan"), "flagged": flagged}


def default_probes(community: CommunityState, victims: Sequence[str]) -> list[tuple[str, str]]:
    return [(v, t.item) for v in victims for t in select_target_items(community, v)]


def _fraction_label(f: float) -> str:
    return f"{f * 100:g}% User"


def table_cluster_agreement(config: ExperimentConfig, records=None) -> ReportTable:
    records = load_records(config) if records is None else records
    cols = {}
    for f in config.fractions:
        rep = run_replay(config, f, records, with_oracle=True)
        cols[f] = cluster_agreement(rep.community, rep.oracle)
    rows = [
        ["Target Item Number", *[str(cols[f]["targets"]) for f in config.fractions]],
        ["Target Item with Same Clusters",
         *[f"{cols[f]['same']} ({pct(cols[f]['same_pct'])})" for f in config.fractions]],
        ["Average Size (Auxiliary)", *[_num(cols[f]["avg_aux"]) for f in config.fractions]],
        ["Average Size (Real)", *[_num(cols[f]["avg_real"]) for f in config.fractions]],
        ["Average Size of Same Clusters", *[_num(cols[f]["avg_same"]) for f in config.fractions]],
    ]
    return ReportTable("cluster_agreement", ["Size of Web3 Community", *map(_fraction_label, config.fractions)], rows)


def table_group_proportions(config: ExperimentConfig, records=None) -> ReportTable:
    records = load_records(config) if records is None else records
    cols = {f: group_proportions(run_replay(config, f, records).community) for f in config.fractions}
    rows = [
        ["Group One User", *[pct(cols[f]["group_one_pct"]) for f in config.fractions]],
        ["Minimum Length", *[_num(cols[f]["min_len"], 0) for f in config.fractions]],
        ["Maximum Length", *[_num(cols[f]["max_len"], 0) for f in config.fractions]],
        ["Average Length", *[_num(cols[f]["avg_len"]) for f in config.fractions]],
    ]
    return ReportTable("group_proportions", ["Size of Web3 Community", *map(_fraction_label, config.fractions)], rows)


def table_success_rate(config: ExperimentConfig, records=None) -> ReportTable:
    records = load_records(config) if records is None else records
    cols = {}
    for f in config.fractions:
        rep = run_replay(config, f, records)
        cols[f] = success_rates(rep, victims_for(config, rep.community))
    label = f"Successful Rate ({config.platform.mode})"
    rows = [
        [f"{label}, mean over victims",
         *[pct(100 * cols[f]["mean_rate"]) if cols[f]["victims"] else "n/a" for f in config.fractions]],
        [f"{label}, pooled M/N",
         *[f"{cols[f]['M']}/{cols[f]['N']}" if cols[f]["N"] else "n/a" for f in config.fractions]],
        ["Victims with targets", *[str(cols[f]["victims"]) for f in config.fractions]],
    ]
    return ReportTable("success_rate", ["Size of Web3 Community", *map(_fraction_label, config.fractions)], rows)


def table_disjointness(config: ExperimentConfig, records=None) -> ReportTable:
    records = load_records(config) if records is None else records
    cols = {}
    for f in config.fractions:
        rep = run_replay(config, f, records)
        victims = victims_for(config, rep.community)
        cols[f] = disjointness(rep.community, default_probes(rep.community, victims))
    rows = [
        ["Disjoint probing items", *[pct(cols[f]["pct"]) for f in config.fractions]],
        ["Probing items evaluated", *[str(cols[f]["probes"]) for f in config.fractions]],
    ]
    return ReportTable("disjointness", ["Size of Web3 Community", *map(_fraction_label, config.fractions)], rows)


def bench_mpc(config: ExperimentConfig, records=None) -> ReportTable:
    """Time plaintext and shared construction of the aux map of the first community."""
    records = load_records(config) if records is None else records
    members = sample_community(records, config.fractions[0], config.community_seed).members if records else set()
    by_item: dict[str, dict[str, float]] = {}
    for r in records:
        if r.user in members:
            by_item.setdefault(r.item, {})[r.user] = r.rating
    t0 = time.perf_counter()
    plain = PlaintextBackend().build(by_item)
    t_plain = time.perf_counter() - t0
    rows = [["plaintext", f"{t_plain:.4f}", str(len(plain)), "0"]]
    if config.similarity_backend == "shared":
        t0 = time.perf_counter()
        shared = SharedBackend(config.n_parties, config.mpc_seed).build(by_item)
        t_shared = time.perf_counter() - t0
        rows.append(["shared", f"{t_shared:.4f}", str(len(shared)), f"{plain.max_deviation(shared):.3e}"])
        rows.append(["ratio shared/plaintext", f"{t_shared / t_plain:.2f}" if t_plain else "inf", "", ""])
    return ReportTable("bench_mpc", ["backend", "seconds", "pairs", "max deviation"], rows, timing=True)


def _num(x, digits: int = 1) -> str:
    if x is None or x != x:
        return "n/a"
    return f"{x:.{digits}f}"


def dataset_stats_json(records: Sequence[RatingRecord]) -> str:
    return sparsity_stats(records).to_json()


__all__ = [
    "ExperimentConfig", "SyntheticParams", "ReplayResult", "Detection", "CaseVerdict", "run_replay",
    "run_detection", "end_to_end", "synthetic_seed",
    "load_records", "victims_for", "cluster_agreement", "group_proportions", "success_rates",
    "disjointness", "default_probes", "table_cluster_agreement", "table_group_proportions",
    "table_success_rate", "table_disjointness", "bench_mpc", "TargetItem", "HONEST",
]
