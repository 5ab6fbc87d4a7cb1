"""Dataset ingestion: parsing, normalization, sparsity statistics, community
sampling and a seeded synthetic generator."""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import asdict, dataclass
from typing import IO, Iterable

import numpy as np


class DataError(ValueError):
    """Raised for malformed or out-of-range input data."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class RatingRecord:
    user: str
    item: str
    rating: float
    seq: int


@dataclass(frozen=True)
class DatasetStats:
    n_users: int
    n_items: int
    n_records: int
    sparsity: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class CommunitySample:
    members: frozenset[str]
    fraction: float
    seed: int


# Amazon review dumps use these keys; accepted as aliases in JSON Lines input.
_JSON_ALIASES = {
    "user": ("user", "reviewerID", "user_id"),
    "item": ("item", "asin", "item_id", "parent_asin"),
    "rating": ("rating", "overall"),
    "ts": ("ts", "unixReviewTime", "timestamp"),
}


def _pick(obj: dict, field: str, row: int):
    for key in _JSON_ALIASES[field]:
        if key in obj:
            return obj[key]
    raise DataError(f"missing field {field!r}", row)


def _read_text(source: bytes | str | IO) -> str:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, str):
        return source
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"source is not valid UTF-8: {exc}") from None


def _raw_rows(text: str, fmt: str) -> Iterable[tuple[int, str, str, float, int]]:
    if fmt == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise DataError("expected a JSON object", lineno)
            yield (lineno, _pick(obj, "user", lineno), _pick(obj, "item", lineno),
                   _pick(obj, "rating", lineno), _pick(obj, "ts", lineno))
    elif fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None:
            return
        header = [h.strip() for h in header]
        if header != ["user", "item", "rating", "ts"]:
            raise DataError(f"expected header user,item,rating,ts, got {','.join(header)}", 1)
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 4:
                raise DataError(f"expected 4 fields, got {len(fields)}", lineno)
            yield (lineno, *fields)
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'jsonl' or 'csv'")


def parse_records(source: bytes | str | IO, fmt: str = "jsonl", raw_max: float = 5.0) -> list[RatingRecord]:
    """Parse a purchase dataset and return records in replay order.

    Records are ordered by timestamp, ties broken by (user, item), and
    ratings are normalized to (0, 1] by ``raw_max``.
    """
    text = _read_text(source)
    rows = []
    for lineno, user, item, rating, ts in _raw_rows(text, fmt):
        try:
            rating = float(rating)
            ts = int(ts)
        except (TypeError, ValueError):
            raise DataError("rating must be a number and ts an integer", lineno) from None
        if not math.isfinite(rating) or rating <= 0 or rating > raw_max:
            raise DataError(f"rating {rating} outside (0, {raw_max}]", lineno)
        rows.append((ts, str(user), str(item), rating))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return [RatingRecord(u, i, r / raw_max, seq) for seq, (_, u, i, r) in enumerate(rows)]


def dump_records(records: Iterable[RatingRecord], fmt: str = "jsonl") -> str:
    """Serialize records with ``ts`` set to the replay sequence number."""
    if fmt == "jsonl":
        return "".join(
            json.dumps({"user": r.user, "item": r.item, "rating": r.rating, "ts": r.seq}) + "\n"
            for r in records
        )
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["user", "item", "rating", "ts"])
        for r in records:
            writer.writerow([r.user, r.item, repr(r.rating), r.seq])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def normalize_ratings(records: Iterable[RatingRecord], raw_max: float) -> list[RatingRecord]:
    if raw_max <= 0:
        raise DataError("raw_max must be positive")
    out = []
    for r in records:
        if r.rating <= 0 or r.rating > raw_max:
            raise DataError(f"rating {r.rating} outside (0, {raw_max}] for ({r.user}, {r.item})")
        out.append(RatingRecord(r.user, r.item, r.rating / raw_max, r.seq))
    return out


def dedupe_records(records: Iterable[RatingRecord]) -> list[RatingRecord]:
    """Keep the earliest record of every (user, item) pair and renumber seq."""
    seen = set()
    kept = []
    for r in sorted(records, key=lambda r: r.seq):
        if (r.user, r.item) in seen:
            continue
        seen.add((r.user, r.item))
        kept.append(r)
    return [RatingRecord(r.user, r.item, r.rating, seq) for seq, r in enumerate(kept)]


def sparsity_stats(records: Iterable[RatingRecord]) -> DatasetStats:
    records = list(records)
    if not records:
        raise DataError("cannot compute statistics of an empty dataset")
    users = {r.user for r in records}
    items = {r.item for r in records}
    cells = len(users) * len(items)
    return DatasetStats(len(users), len(items), len(records), 1.0 - len(records) / cells)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_community(records: Iterable[RatingRecord], fraction: float, seed: int) -> CommunitySample:
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    users = sorted({r.user for r in records})
    size = _round_half_up(fraction * len(users))
    members = random.Random(seed).sample(users, size)
    return CommunitySample(frozenset(members), fraction, seed)


def synthesize_dataset(
    n_users: int,
    n_items: int,
    n_records: int,
    rating_levels: int = 5,
    seed: int = 0,
    zipf_exponent: float = 1.1,
    user_exponent: float = 0.0,
) -> list[RatingRecord]:
    """Generate a sparse purchase dataset with Zipf-distributed item popularity.

    Every (user, item) pair appears at most once. Pair selection is a weighted
    sample without replacement (Gumbel top-k) over user weight times item
    weight, so sparse and fully dense requests use the same path. Item ids are
    assigned independently of popularity rank. ``user_exponent`` > 0 makes
    user activity heavy-tailed as well.
    """
    if min(n_users, n_items) <= 0 or n_records < 0:
        raise DataError("n_users and n_items must be positive and n_records non-negative")
    if n_records > n_users * n_items:
        raise DataError(f"{n_records} records cannot fit in {n_users}x{n_items} distinct pairs")
    if rating_levels < 1:
        raise DataError("rating_levels must be >= 1")
    rng = np.random.default_rng(seed)
    item_w = 1.0 / np.arange(1, n_items + 1) ** zipf_exponent
    item_w = item_w[rng.permutation(n_items)]
    user_w = 1.0 / np.arange(1, n_users + 1) ** user_exponent
    user_w = user_w[rng.permutation(n_users)]
    log_w = (np.log(user_w)[:, None] + np.log(item_w)[None, :]).ravel()
    keys = log_w + rng.gumbel(size=log_w.size)
    if n_records == log_w.size:
        chosen = np.arange(log_w.size)
    else:
        chosen = np.argpartition(-keys, n_records)[:n_records] if n_records else np.array([], dtype=int)
    chosen = chosen[rng.permutation(len(chosen))]
    # star-rating style skew: level j has weight j
    levels = np.arange(1, rating_levels + 1)
    ratings = rng.choice(levels, size=len(chosen), p=levels / levels.sum()) / rating_levels
    uw = len(str(n_users - 1))
    iw = len(str(n_items - 1))
    return [
        RatingRecord(f"u{int(c) // n_items:0{uw}d}", f"i{int(c) % n_items:0{iw}d}", float(r), seq)
        for seq, (c, r) in enumerate(zip(chosen, ratings))
    ]
