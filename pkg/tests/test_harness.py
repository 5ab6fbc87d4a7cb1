import pytest

from sumd.harness.experiments import (ExperimentConfig, SyntheticParams, bench_mpc, cluster_agreement, default_probes,
                                      disjointness, end_to_end, load_records, run_replay, synthetic_seed,
                                      table_cluster_agreement, table_disjointness, table_group_proportions,
                                      table_success_rate)
from sumd.harness.reports import ReportTable, pct
from sumd.judge import NOT_PROVEN
from sumd.ledger import GENESIS_PREV
from sumd.platform import PlatformConfig

SMALL = SyntheticParams(seed=4)


def _cfg(mode="honest", fractions=(0.5,), **kw):
    return ExperimentConfig(synthetic=SMALL, fractions=list(fractions), platform=PlatformConfig(mode=mode), **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(fractions=[0.0])
    with pytest.raises(ValueError):
        ExperimentConfig(fractions=[1.5])
    with pytest.raises(ValueError):
        ExperimentConfig(synthetic=None)
    with pytest.raises(ValueError):
        ExperimentConfig(victim_policy="everyone")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"fractoins": [0.1]})
    cfg = ExperimentConfig.from_dict({"dataset": "x.jsonl"})
    assert cfg.synthetic is None
    assert ExperimentConfig.from_dict(_cfg().to_dict()) == _cfg()


def test_synthetic_seed_sets_every_seed():
    d = synthetic_seed(_cfg(), 17).to_dict()
    assert d["synthetic"]["seed"] == d["community_seed"] == d["platform"]["seed"] == d["probe_seed"] == 17


def test_empty_dataset_gives_empty_states():
    rep = run_replay(_cfg(), records=[])
    assert not rep.members and not rep.community.clusters
    assert len(rep.ledger) == 0 and rep.ledger.head == GENESIS_PREV


def test_single_member_aux_map_covers_only_that_member():
    records = load_records(_cfg())
    user = records[0].user
    rep = run_replay(_cfg(), records=records, members={user})
    bought = {r.item for r in records if r.user == user}
    for a, b, _ in rep.community.aux_map.pairs():
        assert a in bought and b in bought


def test_replay_is_deterministic():
    assert run_replay(_cfg()).ledger.head == run_replay(_cfg()).ledger.head


def test_every_member_event_is_committed():
    rep = run_replay(_cfg())
    n_member = sum(r.user in rep.members for r in rep.records)
    purchases = [e for e in rep.ledger.store.entries if e.kind == "purchase"]
    assert len(purchases) == n_member


def test_full_community_agrees_with_oracle():
    rep = run_replay(_cfg(fractions=(1.0,)), with_oracle=True)
    stats = cluster_agreement(rep.community, rep.oracle)
    assert stats["targets"] > 0 and stats["same_pct"] == 100.0
    table = table_cluster_agreement(_cfg(fractions=(1.0,)))
    assert "(100.0%)" in table.rows[1][1]


def test_honest_success_rate_is_zero():
    table = table_success_rate(_cfg(fractions=(0.2, 0.5)))
    victims = table.rows[2][1:]
    assert any(int(v) > 0 for v in victims)
    for cell, n in zip(table.rows[0][1:], victims):
        assert cell == ("0.0%" if int(n) else "n/a")


def test_disjointness_is_total_on_aux_map_and_flags_injected_overlap():
    rep = run_replay(_cfg())
    victims = rep.community.group_one_members()
    probes = default_probes(rep.community, victims)
    assert probes and disjointness(rep.community, probes)["pct"] == 100.0
    # a victim's own history item whose cluster is non-empty overlaps by definition
    v, own = next((v, h) for v in victims for h in rep.community.history_items(v) if rep.community.clusters.get(h))
    res = disjointness(rep.community, [*probes, (v, own)])
    assert res["pct"] < 100.0 and res["flagged"] == [(v, own)]
    assert table_disjointness(_cfg()).rows[0][1] == "100.0%"


def test_group_proportions_table_shape():
    table = table_group_proportions(_cfg(fractions=(0.2, 0.5)))
    assert table.headers == ["Size of Web3 Community", "20% User", "50% User"]
    assert [r[0] for r in table.rows] == ["Group One User", "Minimum Length", "Maximum Length", "Average Length"]


def test_reports_are_byte_identical_across_reruns(tmp_path):
    a = table_success_rate(_cfg("violating"))
    b = table_success_rate(_cfg("violating"))
    assert a.to_csv() == b.to_csv() and a.to_text() == b.to_text()
    csv_path, txt_path = a.write(tmp_path)
    assert csv_path.read_text() == a.to_csv() and txt_path.read_text() == a.to_text()


def test_bench_mpc_rows():
    plain = bench_mpc(_cfg(fractions=(0.1,)))
    assert [r[0] for r in plain.rows] == ["plaintext"] and plain.timing
    shared = bench_mpc(_cfg(fractions=(0.1,), similarity_backend="shared"))
    assert [r[0] for r in shared.rows] == ["plaintext", "shared", "ratio shared/plaintext"]
    assert float(shared.rows[1][3]) <= 1e-4
    assert shared.rows[0][2] == shared.rows[1][2]


def test_end_to_end_honest_not_proven():
    case = end_to_end(synthetic_seed(_cfg(), 1), seed=1)
    assert case.victim is not None
    assert case.verdict.decision == NOT_PROVEN


def test_report_table_text_alignment():
    t = ReportTable("t", ["a", "long header"], [["xyz", "1"]])
    assert t.to_text() == "t\na    long header\n---  -----------\nxyz  1\n"
    assert t.to_csv() == "a,long header\nxyz,1\n"
    assert pct(None) == "n/a" and pct(float("nan")) == "n/a" and pct(12.345) == "12.3%"
