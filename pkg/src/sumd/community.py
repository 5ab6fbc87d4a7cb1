"""Web3 community state: auxiliary similarity map and per-item clusters.

Clusters only ever grow. Every member carries the provenance tag it was first
inserted under (``init``, ``update`` or ``grown``); later insertions never
overwrite an earlier tag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .mpc import PlaintextBackend
from .platform import Disclosure, SimilarityMap

INIT = "init"
UPDATE = "update"
GROWN = "grown"
TAGS = (INIT, UPDATE, GROWN)

GROUP_ONE = "group_one"
GROUP_TWO = "group_two"


class CommunityError(ValueError):
    pass


@dataclass
class PerItemCluster:
    anchor: str
    members: dict[str, str] = field(default_factory=dict)

    def add(self, item: str, tag: str) -> bool:
        """Insert ``item``; returns True when it was not already a member."""
        if item == self.anchor or item in self.members:
            return False
        self.members[item] = tag
        return True

    def __contains__(self, item: str) -> bool:
        return item in self.members

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ClusterSnapshot:
    anchor: str
    members: frozenset[str]
    by_tag: Mapping[str, frozenset[str]]


@dataclass(frozen=True)
class Observation:
    """One platform response seen by the community.

    ``novel`` lists the disclosed items that were not yet in the purchased
    item's cluster when the response arrived.
    """

    user: str
    item: str
    seq: int
    disclosed: tuple[str, ...]
    novel: tuple[str, ...]


class CommunityState:
    def __init__(self, members: Iterable[str], backend=None):
        self.members = frozenset(members)
        # anything with build(by_item) and pair(a, b, ratings_a, ratings_b)
        self.backend = backend if backend is not None else PlaintextBackend()
        self.aux_map = SimilarityMap()
        self.by_item: dict[str, dict[str, float]] = {}
        self.clusters: dict[str, PerItemCluster] = {}
        self.histories: dict[str, list[tuple[str, float, int]]] = {}
        self.observed: list[Observation] = []
        self.first_purchase: dict[str, str] = {}
        # item -> anchors whose cluster holds it; drives the growing operation
        self._holders: dict[str, set[str]] = {}

    # -- construction -------------------------------------------------

    @classmethod
    def init_from_histories(cls, records: Iterable, members: Iterable[str] | None = None,
                            backend=None) -> "CommunityState":
        records = sorted(records, key=lambda r: r.seq)
        if members is None:
            members = {r.user for r in records}
        state = cls(members, backend)
        for r in records:
            if r.user not in state.members:
                raise CommunityError(f"record of non-member {r.user!r} in initial histories")
            state.histories.setdefault(r.user, []).append((r.item, r.rating, r.seq))
            state.first_purchase.setdefault(r.user, r.item)
            state.by_item.setdefault(r.item, {})[r.user] = r.rating
        state.aux_map = state.backend.build(state.by_item)
        for x in sorted(state.by_item):
            state.aux_map.add_item(x)
            state._cluster(x)
            for y in sorted(state.aux_map.neighbors(x)):
                state._add(x, y, INIT)
        return state

    def _cluster(self, item: str) -> PerItemCluster:
        c = self.clusters.get(item)
        if c is None:
            c = self.clusters[item] = PerItemCluster(item)
        return c

    def _add(self, anchor: str, item: str, tag: str) -> None:
        if self._cluster(anchor).add(item, tag):
            self._holders.setdefault(item, set()).add(anchor)

    # -- replay -------------------------------------------------------

    def _similarity(self, a: str, b: str) -> float:
        return self.backend.pair(a, b, self.by_item[a], self.by_item[b])

    def on_member_purchase(self, user: str, item: str, rating: float, disclosure: Disclosure,
                           seq: int | None = None) -> None:
        if user not in self.members:
            raise CommunityError(f"{user!r} is not a community member")
        if seq is None:
            seq = disclosure.trigger_seq
        hist = self.histories.setdefault(user, [])
        prior = [h[0] for h in hist]
        if item in prior:
            raise CommunityError(f"duplicate purchase of {item!r} by {user!r}")
        cluster_a = self._cluster(item)
        novel = tuple(x for x in disclosure.items if x != item and x not in cluster_a)
        self.observed.append(Observation(user, item, seq, tuple(disclosure.items), novel))

        self.by_item.setdefault(item, {})[user] = rating
        self.aux_map.add_item(item)
        if not prior:
            self.first_purchase[user] = item
        else:
            for p in prior:
                self.aux_map.set(item, p, self._similarity(item, p))
            for p in prior:
                self._add(item, p, UPDATE)
            for p in prior:
                self._add(p, item, UPDATE)
                for q in prior:
                    self._add(p, q, UPDATE)
        for x in disclosure.items:
            self._add(item, x, UPDATE)
        for anchor in sorted(self._holders.get(item, ())):
            if anchor == item:
                continue
            for x in disclosure.items:
                self._add(anchor, x, GROWN)
        hist.append((item, rating, seq))
        self._after_purchase(user, item, prior)

    def _after_purchase(self, user: str, item: str, prior: list[str]) -> None:
        """Hook for subclasses that consult extra similarity sources."""

    # -- queries ------------------------------------------------------

    def history_items(self, user: str) -> list[str]:
        return [h[0] for h in self.histories.get(user, [])]

    def observations_of(self, user: str) -> list[Observation]:
        return [o for o in self.observed if o.user == user]

    def classify_user(self, user: str) -> str:
        if user not in self.members:
            raise CommunityError(f"{user!r} is not a community member")
        obs = self.observations_of(user)
        if not obs:
            raise CommunityError(f"no observed recommendations for {user!r}")
        return GROUP_ONE if all(not o.novel for o in obs) else GROUP_TWO

    def group_one_members(self) -> list[str]:
        novel_seen: dict[str, bool] = {}
        for o in self.observed:
            novel_seen[o.user] = novel_seen.get(o.user, False) or bool(o.novel)
        return sorted(u for u, bad in novel_seen.items() if not bad)

    def history_cluster(self, user: str) -> set[str]:
        if user not in self.members:
            raise CommunityError(f"{user!r} is not a community member")
        out: set[str] = set()
        for x in self.history_items(user):
            out.add(x)
            c = self.clusters.get(x)
            if c is not None:
                out.update(c.members)
        return out

    def cluster_snapshot(self, item: str) -> ClusterSnapshot:
        c = self.clusters.get(item)
        if c is None:
            raise KeyError(f"no per-item cluster for {item!r}")
        by_tag = {t: frozenset(x for x, tag in c.members.items() if tag == t) for t in TAGS}
        return ClusterSnapshot(item, frozenset(c.members), by_tag)

    # -- export / import ----------------------------------------------

    def export(self) -> dict:
        return {
            "members": sorted(self.members),
            "aux_map": [[a, b, v] for a, b, v in self.aux_map.pairs()],
            "histories": {u: [[i, r, s] for i, r, s in h] for u, h in sorted(self.histories.items())},
            "first_purchase": dict(sorted(self.first_purchase.items())),
            "clusters": [
                {"item": a, "members": [{"item": x, "tag": c.members[x]} for x in sorted(c.members)]}
                for a, c in sorted(self.clusters.items())
            ],
            "observed": [
                {"user": o.user, "item": o.item, "seq": o.seq, "disclosed": list(o.disclosed), "novel": list(o.novel)}
                for o in self.observed
            ],
        }

    def export_bytes(self) -> bytes:
        """Canonical JSON encoding; the form that gets committed to the ledger."""
        return json.dumps(self.export(), sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_export(cls, data: Mapping | bytes | str) -> "CommunityState":
        if isinstance(data, (bytes, str)):
            data = json.loads(data)
        state = cls(data["members"])
        for a, b, v in data["aux_map"]:
            state.aux_map.set(a, b, v)
        for u, hist in data["histories"].items():
            state.histories[u] = [(i, r, s) for i, r, s in hist]
            for i, r, _ in hist:
                state.by_item.setdefault(i, {})[u] = r
                state.aux_map.add_item(i)
        state.first_purchase = dict(data["first_purchase"])
        for entry in data["clusters"]:
            state._cluster(entry["item"])
            for m in entry["members"]:
                if m["tag"] not in TAGS:
                    raise CommunityError(f"unknown provenance tag {m['tag']!r}")
                state._add(entry["item"], m["item"], m["tag"])
        state.observed = [
            Observation(o["user"], o["item"], o["seq"], tuple(o["disclosed"]), tuple(o["novel"]))
            for o in data["observed"]
        ]
        return state


class OracleCommunity(CommunityState):
    """Evaluation-only community that can read the platform's real map.

    Runs the same cluster maintenance, but similarities come from the real
    map and every touched cluster absorbs the item's current real neighbors.
    """

    def __init__(self, members: Iterable[str], real_map: SimilarityMap):
        super().__init__(members)
        self.real_map = real_map
        self.aux_map = real_map

    def _similarity(self, a: str, b: str) -> float:
        return self.real_map.get(a, b)

    def on_member_purchase(self, user, item, rating, disclosure, seq=None) -> None:
        # the real map is shared with the platform and already up to date
        aux, self.aux_map = self.aux_map, SimilarityMap()
        try:
            super().on_member_purchase(user, item, rating, disclosure, seq)
        finally:
            self.aux_map = aux

    def _after_purchase(self, user: str, item: str, prior: list[str]) -> None:
        for x in [item, *prior]:
            for y in sorted(self.real_map.neighbors(x)):
                self._add(x, y, UPDATE)
