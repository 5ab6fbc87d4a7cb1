"""Simulated item-based collaborative-filtering platform.

The platform keeps the real similarity map up to date after every purchase,
answers each purchase with a random partial view of the top-S recommendation
cluster, and either honors or ignores stop-requests.
"""

from __future__ import annotations

import copy
import json
import math
import random
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Mapping

HONEST = "honest"
VIOLATING = "violating"


def _key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


class SimilarityMap:
    """Sparse symmetric item-pair similarity store. Absent pairs read as 0."""

    def __init__(self) -> None:
        self._adj: dict[str, dict[str, float]] = {}
        self.item_universe: set[str] = set()

    def add_item(self, item: str) -> None:
        self.item_universe.add(item)

    def get(self, a: str, b: str) -> float:
        return self._adj.get(a, {}).get(b, 0.0)

    def set(self, a: str, b: str, value: float) -> None:
        if a == b:
            raise ValueError("self-pairs are not stored")
        if not 0.0 <= value <= 1.0 + 1e-12:
            raise ValueError(f"similarity {value} outside [0, 1]")
        self.item_universe.update((a, b))
        if value == 0.0:
            self.discard(a, b)
            return
        self._adj.setdefault(a, {})[b] = value
        self._adj.setdefault(b, {})[a] = value

    def discard(self, a: str, b: str) -> None:
        for x, y in ((a, b), (b, a)):
            row = self._adj.get(x)
            if row is not None:
                row.pop(y, None)
                if not row:
                    del self._adj[x]

    def neighbors(self, item: str) -> Mapping[str, float]:
        return self._adj.get(item, {})

    def pairs(self) -> Iterator[tuple[str, str, float]]:
        for a in sorted(self._adj):
            for b in sorted(self._adj[a]):
                if a < b:
                    yield a, b, self._adj[a][b]

    def as_dict(self) -> dict[tuple[str, str], float]:
        return {(a, b): v for a, b, v in self.pairs()}

    def max_deviation(self, other: "SimilarityMap") -> float:
        """Largest entrywise absolute difference, treating absent pairs as 0."""
        mine, theirs = self.as_dict(), other.as_dict()
        worst = 0.0
        for k in mine.keys() | theirs.keys():
            worst = max(worst, abs(mine.get(k, 0.0) - theirs.get(k, 0.0)))
        return worst

    def copy(self) -> "SimilarityMap":
        new = SimilarityMap()
        new._adj = {k: dict(v) for k, v in self._adj.items()}
        new.item_universe = set(self.item_universe)
        return new

    def __len__(self) -> int:
        return sum(len(v) for v in self._adj.values()) // 2

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SimilarityMap):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        return f"SimilarityMap({len(self)} pairs, {len(self.item_universe)} items)"


def pair_cosine(ratings_a: Mapping[str, float], ratings_b: Mapping[str, float]) -> float:
    """Cosine similarity with every sum restricted to the common raters.

    Common raters are visited in sorted order so batch and incremental
    computation give bit-identical results.
    """
    if len(ratings_a) > len(ratings_b):
        ratings_a, ratings_b = ratings_b, ratings_a
    common = sorted(u for u in ratings_a if u in ratings_b)
    if not common:
        return 0.0
    dot = norm_a = norm_b = 0.0
    for u in common:
        ra, rb = ratings_a[u], ratings_b[u]
        dot += ra * rb
        norm_a += ra * ra
        norm_b += rb * rb
    return min(1.0, dot / (math.sqrt(norm_a) * math.sqrt(norm_b)))


def ratings_by_item(records: Iterable) -> dict[str, dict[str, float]]:
    """Group (user, item, rating, ...) rows into item -> {user: rating}."""
    out: dict[str, dict[str, float]] = {}
    for r in records:
        user, item, rating = (r.user, r.item, r.rating) if hasattr(r, "user") else r[:3]
        out.setdefault(item, {})[user] = rating
    return out


def build_similarity(by_item: Mapping[str, Mapping[str, float]]) -> SimilarityMap:
    """Batch cosine similarity map over every co-rated item pair."""
    sim = SimilarityMap()
    by_user: dict[str, list[str]] = {}
    for item, raters in by_item.items():
        sim.add_item(item)
        for u in raters:
            by_user.setdefault(u, []).append(item)
    pairs = set()
    for items in by_user.values():
        items = sorted(items)
        for i, a in enumerate(items):
            for b in items[i + 1:]:
                pairs.add((a, b))
    for a, b in sorted(pairs):
        sim.set(a, b, pair_cosine(by_item[a], by_item[b]))
    return sim


def score_item(history: Iterable[tuple[str, float]], sim: SimilarityMap, candidate: str) -> float:
    history = list(history)
    if any(item == candidate for item, _ in history):
        raise ValueError(f"candidate {candidate!r} is already in the history")
    num = den = 0.0
    for item, rating in history:
        s = sim.get(item, candidate)
        num += s * rating
        den += abs(s)
    return num / den if den else 0.0


def rank_candidates(history: list[tuple[str, float]], sim: SimilarityMap) -> list[tuple[str, float]]:
    """Every candidate with positive score, best first, ties by item id."""
    owned = {item for item, _ in history}
    num: dict[str, float] = {}
    den: dict[str, float] = {}
    for item, rating in history:
        for cand, s in sim.neighbors(item).items():
            if cand in owned:
                continue
            num[cand] = num.get(cand, 0.0) + s * rating
            den[cand] = den.get(cand, 0.0) + abs(s)
    scored = [(c, num[c] / den[c]) for c in num if den[c] > 0 and num[c] > 0]
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    return scored


@dataclass(frozen=True)
class Disclosure:
    user: str
    trigger_seq: int
    items: tuple[str, ...]


def disclose(cluster: list[str], k: int, rng: random.Random, user: str = "", trigger_seq: int = -1) -> Disclosure:
    """Uniform k-subset of the cluster, kept in cluster ranking order."""
    if k >= len(cluster):
        picked = tuple(cluster)
    else:
        picked = tuple(cluster[i] for i in sorted(rng.sample(range(len(cluster)), k)))
    return Disclosure(user, trigger_seq, picked)


@dataclass
class PlatformConfig:
    mode: str = HONEST
    cluster_size_S: int = 10
    disclose_k: int = 7
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (HONEST, VIOLATING):
            raise ValueError(f"mode must be {HONEST!r} or {VIOLATING!r}, got {self.mode!r}")
        if self.cluster_size_S < 1 or not 1 <= self.disclose_k <= self.cluster_size_S:
            raise ValueError("need 1 <= disclose_k <= cluster_size_S")

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlatformConfig":
        return cls(**{k: d[k] for k in ("mode", "cluster_size_S", "disclose_k", "seed") if k in d})

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class Platform:
    """Mutable platform state driven by the replay loop."""

    config: PlatformConfig = field(default_factory=PlatformConfig)

    def __post_init__(self) -> None:
        self.histories: dict[str, list[tuple[str, float, int]]] = {}
        # ratings that currently feed the real map
        self.by_item: dict[str, dict[str, float]] = {}
        self.real_map = SimilarityMap()
        self.stopped: dict[str, int] = {}
        self.stop_log: list[tuple[str, int]] = []
        self.clock = 0
        self.rng = random.Random(self.config.seed)

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def cluster_size_S(self) -> int:
        return self.config.cluster_size_S

    def metadata(self) -> dict:
        """What the platform hands to a judge on request."""
        return {"cluster_size_S": self.config.cluster_size_S}

    def _next_seq(self, seq: int | None) -> int:
        if seq is None:
            seq = self.clock
        elif seq < self.clock:
            raise ValueError(f"seq {seq} is older than the platform clock {self.clock}")
        self.clock = seq + 1
        return seq

    def effective_history(self, user: str) -> list[tuple[str, float]]:
        return [(item, r) for item, r, _ in self._effective(user)]

    def _effective(self, user: str) -> list[tuple[str, float, int]]:
        hist = self.histories.get(user, [])
        if self.mode == VIOLATING or user not in self.stopped:
            return list(hist)
        cut = self.stopped[user]
        return [h for h in hist if h[2] > cut]

    def effective_records(self) -> list[tuple[str, str, float]]:
        """(user, item, rating) rows the real map is supposed to reflect."""
        return [(u, item, r) for u in sorted(self.histories) for item, r, _ in self._effective(u)]

    def full_recommendation_cluster(self, user: str) -> list[str]:
        history = self.effective_history(user)
        if not history:
            raise ValueError(f"user {user!r} has an empty effective history")
        ranked = rank_candidates(history, self.real_map)
        return [c for c, _ in ranked[: self.config.cluster_size_S]]

    def record_purchase(self, user: str, item: str, rating: float, seq: int | None = None,
                        respond: bool = True) -> Disclosure:
        if not 0 < rating <= 1:
            raise ValueError(f"rating {rating} outside (0, 1]")
        hist = self.histories.setdefault(user, [])
        if any(h[0] == item for h in hist):
            raise ValueError(f"duplicate purchase of {item!r} by {user!r}")
        prior = [h[0] for h in self._effective(user)]
        seq = self._next_seq(seq)
        hist.append((item, rating, seq))
        self.real_map.add_item(item)
        raters = self.by_item.setdefault(item, {})
        raters[user] = rating
        for p in prior:
            self.real_map.set(item, p, pair_cosine(raters, self.by_item[p]))
        if not respond:
            return Disclosure(user, seq, ())
        cluster = self.full_recommendation_cluster(user)
        return disclose(cluster, self.config.disclose_k, self.rng, user, seq)

    def stop_request(self, user: str, seq: int | None = None) -> int:
        """Register a stop-request; returns its sequence number."""
        if user not in self.histories:
            raise KeyError(f"unknown user {user!r}")
        seq = self._next_seq(seq)
        self.stop_log.append((user, seq))
        self.stopped[user] = seq
        if self.mode == VIOLATING:
            return seq
        removed = [h[0] for h in self.histories[user] if h[2] < seq]
        for item in removed:
            raters = self.by_item.get(item)
            if raters is not None:
                raters.pop(user, None)
        touched = sorted(set(removed) | {h[0] for h in self.histories[user]})
        for i, a in enumerate(touched):
            for b in touched[i + 1:]:
                self.real_map.set(a, b, pair_cosine(self.by_item.get(a, {}), self.by_item.get(b, {})))
        return seq

    def fork(self) -> "Platform":
        """Independent copy; mutations of the fork never reach the original."""
        return copy.deepcopy(self)
