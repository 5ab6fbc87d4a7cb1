"""Target-item selection and probing rounds against the platform."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .community import GROWN, CommunityError, CommunityState
from .platform import Platform

PROBE_RATING = 1.0

VIOLATION_PROVEN = "violation_proven"
INCONCLUSIVE = "inconclusive"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class TargetItem:
    item: str
    owner: str
    cluster_at_selection: frozenset[str]


@dataclass
class Evidence:
    victim: str
    probe: str
    A: list[str]
    B: list[str]
    S: int
    undisclosed: int
    lemma_triggered: bool
    overlap: list[str]
    ledger_refs: list[int] = field(default_factory=list)
    round: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Evidence":
        return cls(d["victim"], d["probe"], list(d["A"]), list(d["B"]), int(d["S"]), int(d["undisclosed"]),
                   bool(d["lemma_triggered"]), list(d["overlap"]), list(d.get("ledger_refs", [])),
                   int(d.get("round", 1)))


@dataclass
class ProbeOutcome:
    status: str
    rounds_used: int
    evidences: list[Evidence]


# -- criteria ---------------------------------------------------------------

def c1_candidates(community: CommunityState, victim: str | None) -> dict[str, str]:
    """item -> owner, for first purchases of non-victim members."""
    owners: dict[str, str] = {}
    for user, item in sorted(community.first_purchase.items()):
        if user != victim:
            owners.setdefault(item, user)
    return owners


def passes_c4(community: CommunityState, item: str, victim_history: list[str], victim_cluster: set[str]) -> bool:
    if item in victim_history:
        return False
    if any(community.aux_map.get(item, h) != 0.0 for h in victim_history):
        return False
    members = community.clusters[item].members if item in community.clusters else {}
    return not (set(members) & victim_cluster)


def passes_c3(community: CommunityState, item: str) -> bool:
    c = community.clusters.get(item)
    return c is None or GROWN not in c.members.values()


def passes_c2(community: CommunityState, item: str) -> bool:
    return all(not o.novel for o in community.observed if o.item == item)


def criteria_report(community: CommunityState, victim: str | None, item: str) -> dict[str, bool]:
    """Each criterion evaluated independently for one item."""
    history = community.history_items(victim) if victim else []
    vcluster = community.history_cluster(victim) if victim else set()
    return {
        "C1": item in c1_candidates(community, victim),
        "C2": passes_c2(community, item),
        "C3": passes_c3(community, item),
        "C4": passes_c4(community, item, history, vcluster),
    }


def select_target_items(community: CommunityState, victim: str | None) -> list[TargetItem]:
    """Filter candidates in the order C1, C4, C3, C2.

    With ``victim=None`` the victim-specific parts (C4 and excluding the
    victim's own first purchase) are skipped; the evaluation tables use this.
    """
    if victim is not None and victim not in community.members:
        raise CommunityError(f"victim {victim!r} is not a community member")
    owners = c1_candidates(community, victim)
    items = sorted(owners)
    if victim is not None:
        history = community.history_items(victim)
        vcluster = community.history_cluster(victim)
        items = [x for x in items if passes_c4(community, x, history, vcluster)]
    items = [x for x in items if passes_c3(community, x)]
    items = [x for x in items if passes_c2(community, x)]
    return [
        TargetItem(x, owners[x], frozenset(community.clusters[x].members) if x in community.clusters else frozenset())
        for x in items
    ]


# -- checks -----------------------------------------------------------------

def lemma_check(A: Iterable[str], B: Iterable[str], S: int) -> bool:
    """True when more cluster items went undisclosed than the platform could hide."""
    A, B = set(A), set(B)
    if len(B) > S:
        raise ValueError(f"disclosure of {len(B)} items exceeds the declared cluster size {S}")
    return len(A - B) > S - len(B)


def overlap_check(B: Iterable[str], victim_history: Iterable[str]) -> set[str]:
    return set(B) & set(victim_history)


# -- probing ----------------------------------------------------------------

def probe_round(platform: Platform, community: CommunityState, victim: str, target: str, round: int = 1,
                ledger=None, context: Iterable[str] = ()) -> Evidence:
    """Buy ``target`` as the victim and package the platform's response.

    ``context`` names earlier probe items still in the victim's post-request
    history; their clusters join A because an honest platform may draw on
    them too.
    """
    if victim not in platform.stopped:
        raise ValueError(f"victim {victim!r} has not issued a stop-request")
    if any(h[0] == target for h in platform.histories.get(victim, [])):
        raise ValueError(f"victim {victim!r} already purchased {target!r}")
    A = set(community.cluster_snapshot(target).members) if target in community.clusters else set()
    for prev in context:
        if prev in community.clusters:
            A |= community.clusters[prev].members.keys()
    A -= set(context)
    A.discard(target)
    refs: list[int] = []
    if ledger is not None:
        refs.append(ledger.stop_position(victim))
        refs.append(ledger.record_snapshot(victim, target, sorted(A), platform.clock))
    disclosure = platform.record_purchase(victim, target, PROBE_RATING)
    if ledger is not None:
        refs.extend(ledger.record_purchase(victim, target, PROBE_RATING, disclosure))
    B = list(disclosure.items)
    S = platform.metadata()["cluster_size_S"]
    history = community.history_items(victim)
    return Evidence(
        victim=victim,
        probe=target,
        A=sorted(A),
        B=B,
        S=S,
        undisclosed=S - len(B),
        lemma_triggered=lemma_check(A, B, S),
        overlap=sorted(overlap_check(B, history)),
        ledger_refs=refs,
        round=round,
    )


def probe_until_success(platform: Platform, community: CommunityState, victim: str, max_rounds: int,
                        rng: random.Random, ledger=None) -> ProbeOutcome:
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    targets = [t.item for t in select_target_items(community, victim)]
    order = rng.sample(targets, len(targets))
    evidences: list[Evidence] = []
    for n, target in enumerate(order[:max_rounds], start=1):
        ev = probe_round(platform, community, victim, target, n, ledger, context=order[: n - 1])
        evidences.append(ev)
        if ev.lemma_triggered:
            return ProbeOutcome(VIOLATION_PROVEN, n, evidences)
    status = INCONCLUSIVE if len(evidences) == max_rounds else EXHAUSTED
    return ProbeOutcome(status, len(evidences), evidences)


def trial_evidences(platform: Platform, community: CommunityState, victim: str) -> list[Evidence]:
    """Probe every target once, each on its own fork of the platform."""
    base = platform.fork()
    if victim not in base.stopped:
        base.stop_request(victim)
    return [
        probe_round(base.fork(), community, victim, t.item)
        for t in select_target_items(community, victim)
    ]


def one_round_success_rate(platform: Platform, community: CommunityState, victim: str) -> Fraction:
    evidences = trial_evidences(platform, community, victim)
    if not evidences:
        raise ValueError(f"no target items for victim {victim!r}")
    return Fraction(sum(e.lemma_triggered for e in evidences), len(evidences))
