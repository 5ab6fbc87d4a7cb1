"""Additive secret sharing backend for the auxiliary similarity map.

Ratings are fixed-point encoded and additively shared over GF(p). Parties
multiply shared values with dealer-provided Beaver triples and only ever open
the masked differences and the three per-pair aggregates; division and square
roots happen in the clear after reconstruction.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .platform import SimilarityMap, build_similarity, pair_cosine

PRIME = (1 << 61) - 1
FRAC_BITS = 16
SCALE = 1 << FRAC_BITS
# products of two encodings carry scale 2^32; keep sums below p/2
MAX_PRODUCTS = (PRIME // 2) // (SCALE * SCALE)


class MPCError(ValueError):
    pass


def encode_fixed(x: float) -> int:
    if not 0.0 <= x <= 1.0:
        raise MPCError(f"fixed-point input {x} outside [0, 1]")
    return round(x * SCALE)


def decode_fixed(raw: int, scale: int = SCALE) -> float:
    raw %= PRIME
    if raw > PRIME // 2:
        raw -= PRIME
    return raw / scale


@dataclass(frozen=True)
class ShareVector:
    shares: tuple[int, ...]

    @property
    def n_parties(self) -> int:
        return len(self.shares)

    def __add__(self, other: "ShareVector") -> "ShareVector":
        return ShareVector(tuple((a + b) % PRIME for a, b in zip(self.shares, other.shares)))

    def __sub__(self, other: "ShareVector") -> "ShareVector":
        return ShareVector(tuple((a - b) % PRIME for a, b in zip(self.shares, other.shares)))

    def add_public(self, c: int) -> "ShareVector":
        # a public constant is added by party 0 only
        return ShareVector(((self.shares[0] + c) % PRIME, *self.shares[1:]))

    def scale(self, c: int) -> "ShareVector":
        return ShareVector(tuple(s * c % PRIME for s in self.shares))


def share(secret: int, n_parties: int, rng: random.Random) -> ShareVector:
    if n_parties < 2:
        raise MPCError("secret sharing needs at least 2 parties")
    head = [rng.randrange(PRIME) for _ in range(n_parties - 1)]
    last = (secret - sum(head)) % PRIME
    return ShareVector((*head, last))


def reconstruct(sv: ShareVector) -> int:
    return sum(sv.shares) % PRIME


class Dealer:
    """Trusted triple dealer with a seeded stream."""

    def __init__(self, n_parties: int, rng: random.Random):
        self.n_parties = n_parties
        self.rng = rng

    def triple(self) -> tuple[ShareVector, ShareVector, ShareVector]:
        a = self.rng.randrange(PRIME)
        b = self.rng.randrange(PRIME)
        return (share(a, self.n_parties, self.rng), share(b, self.n_parties, self.rng),
                share(a * b % PRIME, self.n_parties, self.rng))


def beaver_multiply(x: ShareVector, y: ShareVector, dealer: Dealer) -> ShareVector:
    """Shares of x*y. Only d = x - a and e = y - b are opened."""
    a, b, c = dealer.triple()
    d = reconstruct(x - a)
    e = reconstruct(y - b)
    # xy = c + d*b + e*a + d*e
    return (c + b.scale(d) + a.scale(e)).add_public(d * e % PRIME)


@dataclass(frozen=True)
class PairAggregates:
    dot: float
    norm_a: float
    norm_b: float


def _stream(seed: int, *labels: str) -> random.Random:
    h = hashlib.sha256(repr((seed, *labels)).encode("utf-8")).digest()
    return random.Random(int.from_bytes(h[:16], "big"))


def share_ratings(by_item: Mapping[str, Mapping[str, float]], n_parties: int, seed: int
                  ) -> dict[str, dict[str, ShareVector]]:
    """Each user shares each rating once, from a per-(user, item) stream."""
    return {
        item: {u: share(encode_fixed(r), n_parties, _stream(seed, "rating", u, item)) for u, r in raters.items()}
        for item, raters in by_item.items()
    }


def secure_pair_aggregates(shared_a: Mapping[str, ShareVector], shared_b: Mapping[str, ShareVector],
                           common: Iterable[str], dealer: Dealer) -> PairAggregates:
    common = sorted(common)
    if len(common) > MAX_PRODUCTS:
        raise MPCError(f"{len(common)} common raters would overflow the field")
    n = dealer.n_parties
    zero = ShareVector((0,) * n)
    dot = na = nb = zero
    for u in common:
        x, y = shared_a[u], shared_b[u]
        dot = dot + beaver_multiply(x, y, dealer)
        na = na + beaver_multiply(x, x, dealer)
        nb = nb + beaver_multiply(y, y, dealer)
    s2 = SCALE * SCALE
    return PairAggregates(decode_fixed(reconstruct(dot), s2), decode_fixed(reconstruct(na), s2),
                          decode_fixed(reconstruct(nb), s2))


def finalize_similarity(agg: PairAggregates) -> float:
    if agg.norm_a <= 0 or agg.norm_b <= 0 or agg.dot <= 0:
        return 0.0
    return min(1.0, agg.dot / (math.sqrt(agg.norm_a) * math.sqrt(agg.norm_b)))


def mpc_build_similarity(records: Iterable, n_parties: int = 3, seed: int = 0) -> SimilarityMap:
    """Similarity map over all co-rated pairs, computed under sharing."""
    if n_parties < 2:
        raise MPCError("secret sharing needs at least 2 parties")
    by_item: dict[str, dict[str, float]] = {}
    for r in records:
        user, item, rating = (r.user, r.item, r.rating) if hasattr(r, "user") else r[:3]
        by_item.setdefault(item, {})[user] = rating
    return SharedBackend(n_parties, seed).build(by_item)


class PlaintextBackend:
    name = "plaintext"

    def build(self, by_item: Mapping[str, Mapping[str, float]]) -> SimilarityMap:
        return build_similarity(by_item)

    def pair(self, a: str, b: str, ratings_a: Mapping[str, float], ratings_b: Mapping[str, float]) -> float:
        return pair_cosine(ratings_a, ratings_b)


class SharedBackend:
    """Secret-shared similarity. Triples for each pair come from a stream
    derived from (seed, pair), so results do not depend on pair order."""

    name = "shared"

    def __init__(self, n_parties: int = 3, seed: int = 0):
        if n_parties < 2:
            raise MPCError("secret sharing needs at least 2 parties")
        self.n_parties = n_parties
        self.seed = seed

    def _pair_shared(self, a: str, b: str, ratings_a: Mapping[str, float], ratings_b: Mapping[str, float]) -> float:
        common = [u for u in ratings_a if u in ratings_b]
        if not common:
            return 0.0
        sa = {u: share(encode_fixed(ratings_a[u]), self.n_parties, _stream(self.seed, "rating", u, a)) for u in common}
        sb = {u: share(encode_fixed(ratings_b[u]), self.n_parties, _stream(self.seed, "rating", u, b)) for u in common}
        lo, hi = sorted((a, b))
        dealer = Dealer(self.n_parties, _stream(self.seed, "triples", lo, hi))
        return finalize_similarity(secure_pair_aggregates(sa, sb, common, dealer))

    def build(self, by_item: Mapping[str, Mapping[str, float]]) -> SimilarityMap:
        shared = share_ratings(by_item, self.n_parties, self.seed)
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
            common = [u for u in by_item[a] if u in by_item[b]]
            dealer = Dealer(self.n_parties, _stream(self.seed, "triples", a, b))
            value = finalize_similarity(secure_pair_aggregates(shared[a], shared[b], common, dealer))
            if value > 0:
                sim.set(a, b, value)
        return sim

    def pair(self, a: str, b: str, ratings_a: Mapping[str, float], ratings_b: Mapping[str, float]) -> float:
        return self._pair_shared(a, b, ratings_a, ratings_b)


def backend_from_config(cfg: Mapping) -> PlaintextBackend | SharedBackend:
    name = cfg.get("similarity_backend", "plaintext")
    if name == "plaintext":
        return PlaintextBackend()
    if name == "shared":
        return SharedBackend(int(cfg.get("n_parties", 3)), int(cfg.get("seed", 0)))
    raise ValueError(f"unknown similarity backend {name!r}")


def aggregates_in_clear(ratings_a: Sequence[float], ratings_b: Sequence[float]) -> PairAggregates:
    """Plaintext oracle for the three aggregates."""
    return PairAggregates(sum(x * y for x, y in zip(ratings_a, ratings_b)),
                          sum(x * x for x in ratings_a), sum(y * y for y in ratings_b))
