"""Hash-chained append-only ledger of commitments.

Only SHA-256 commitments go on the chain; cleartext entries stay with their
owners (modelled by :class:`EntryStore`) and are checked against the chain on
read.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

KINDS = {"purchase": 1, "disclosure": 2, "stop_request": 3, "snapshot": 4, "community_export": 5}
_KIND_NAMES = {v: k for k, v in KINDS.items()}
RATE_SCALE = 1 << 16
GENESIS_PREV = bytes(32)


class LedgerError(ValueError):
    pass


class IntegrityError(LedgerError):
    """Cleartext does not match what the chain committed to."""


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def encode_items(items: Iterable[str]) -> bytes:
    """Ordered, length-prefixed item list used as a disclosure payload."""
    items = list(items)
    return struct.pack(">I", len(items)) + b"".join(_lp(i.encode("utf-8")) for i in items)


def decode_items(payload: bytes) -> list[str]:
    try:
        (n,) = struct.unpack_from(">I", payload, 0)
        pos, out = 4, []
        for _ in range(n):
            (ln,) = struct.unpack_from(">I", payload, pos)
            pos += 4
            if pos + ln > len(payload):
                raise LedgerError("item list truncated")
            out.append(payload[pos:pos + ln].decode("utf-8"))
            pos += ln
    except (struct.error, UnicodeDecodeError) as exc:
        raise LedgerError(f"malformed item list: {exc}") from None
    if pos != len(payload):
        raise LedgerError("trailing bytes after item list")
    return out


@dataclass(frozen=True)
class TransactionEntry:
    buyer: str
    itemID: str
    rate: float
    transactionTime: int
    kind: str = "purchase"
    payload: bytes = b""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LedgerError(f"unknown entry kind {self.kind!r}")
        if not 0 <= self.rate <= 1:
            raise LedgerError(f"rate {self.rate} outside [0, 1]")
        if self.transactionTime < 0:
            raise LedgerError("transactionTime must be non-negative")

    @property
    def rate_fixed(self) -> int:
        return round(self.rate * RATE_SCALE)

    def canonical(self) -> bytes:
        return b"".join([
            bytes([KINDS[self.kind]]),
            _lp(self.buyer.encode("utf-8")),
            _lp(self.itemID.encode("utf-8")),
            struct.pack(">QQ", self.rate_fixed, self.transactionTime),
            _lp(self.payload),
        ])

    @classmethod
    def from_canonical(cls, data: bytes) -> "TransactionEntry":
        try:
            kind = _KIND_NAMES[data[0]]
            pos = 1
            fields = []
            for _ in range(2):
                (ln,) = struct.unpack_from(">I", data, pos)
                pos += 4
                if pos + ln > len(data):
                    raise LedgerError("field truncated")
                fields.append(data[pos:pos + ln].decode("utf-8"))
                pos += ln
            rate_fixed, seq = struct.unpack_from(">QQ", data, pos)
            pos += 16
            (ln,) = struct.unpack_from(">I", data, pos)
            pos += 4
            payload = data[pos:pos + ln]
            if pos + ln != len(data):
                raise LedgerError("length mismatch")
        except (IndexError, KeyError, struct.error, UnicodeDecodeError) as exc:
            raise LedgerError(f"malformed entry encoding: {exc!r}") from None
        return cls(fields[0], fields[1], rate_fixed / RATE_SCALE, seq, kind, payload)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "buyer": self.buyer, "itemID": self.itemID, "rate": self.rate,
                "transactionTime": self.transactionTime, "payload": self.payload.hex()}

    @classmethod
    def from_dict(cls, d) -> "TransactionEntry":
        return cls(d["buyer"], d["itemID"], float(d["rate"]), int(d["transactionTime"]), d["kind"],
                   bytes.fromhex(d["payload"]))


def commit(entry: TransactionEntry) -> bytes:
    return hashlib.sha256(entry.canonical()).digest()


def verify_disclosure(entry: TransactionEntry, commitment: bytes) -> bool:
    return commit(entry) == commitment


def block_hash(index: int, prev_hash: bytes, commitments: Sequence[bytes]) -> bytes:
    h = hashlib.sha256()
    h.update(struct.pack(">Q", index))
    h.update(prev_hash)
    h.update(struct.pack(">I", len(commitments)))
    for c in commitments:
        h.update(c)
    return h.digest()


@dataclass(frozen=True)
class LedgerBlock:
    index: int
    prev_hash: bytes
    commitments: tuple[bytes, ...]
    block_hash: bytes

    def to_bytes(self) -> bytes:
        return (struct.pack(">Q", self.index) + self.prev_hash + struct.pack(">I", len(self.commitments))
                + b"".join(self.commitments) + self.block_hash)

    @classmethod
    def from_bytes(cls, data: bytes) -> "LedgerBlock":
        if len(data) < 8 + 32 + 4 + 32:
            raise LedgerError("block encoding too short")
        (index,) = struct.unpack_from(">Q", data, 0)
        prev = data[8:40]
        (n,) = struct.unpack_from(">I", data, 40)
        if len(data) != 44 + 32 * n + 32:
            raise LedgerError("block length does not match commitment count")
        commits = tuple(data[44 + 32 * i: 76 + 32 * i] for i in range(n))
        return cls(index, prev, commits, data[-32:])

    def to_dict(self) -> dict:
        return {"index": self.index, "prev_hash": self.prev_hash.hex(),
                "commitments": [c.hex() for c in self.commitments], "block_hash": self.block_hash.hex()}

    @classmethod
    def from_dict(cls, d) -> "LedgerBlock":
        return cls(int(d["index"]), bytes.fromhex(d["prev_hash"]),
                   tuple(bytes.fromhex(c) for c in d["commitments"]), bytes.fromhex(d["block_hash"]))


def _block_ok(block: LedgerBlock, position: int, prev: bytes) -> bool:
    return (block.index == position and block.prev_hash == prev
            and all(len(c) == 32 for c in block.commitments)
            and block.block_hash == block_hash(block.index, block.prev_hash, block.commitments))


def append_block(chain: list[LedgerBlock], entries: Iterable[TransactionEntry]) -> list[LedgerBlock]:
    """Return ``chain`` extended by one block committing ``entries``.

    Only the current head is re-verified; full audits use :func:`verify_chain`.
    """
    if chain:
        prev_prev = chain[-2].block_hash if len(chain) > 1 else GENESIS_PREV
        if not _block_ok(chain[-1], len(chain) - 1, prev_prev):
            raise LedgerError(f"cannot append: head block {len(chain) - 1} is invalid")
        prev = chain[-1].block_hash
    else:
        prev = GENESIS_PREV
    commits = tuple(commit(e) for e in entries)
    index = len(chain)
    return [*chain, LedgerBlock(index, prev, commits, block_hash(index, prev, commits))]


@dataclass(frozen=True)
class ChainReport:
    valid: bool
    first_bad_index: int | None = None
    head_mismatch: bool = False


def verify_chain(chain: Sequence[LedgerBlock], head: bytes | None = None) -> ChainReport:
    """Recompute every block hash and link.

    A truncated chain is internally valid; pass the externally held ``head``
    digest to detect it.
    """
    prev = GENESIS_PREV
    for position, block in enumerate(chain):
        if not _block_ok(block, position, prev):
            return ChainReport(False, position)
        prev = block.block_hash
    if head is not None and prev != head:
        return ChainReport(False, None, head_mismatch=True)
    return ChainReport(True)


def flat_commitments(chain: Sequence[LedgerBlock]) -> list[bytes]:
    return [c for b in chain for c in b.commitments]


class EntryStore:
    """Owner-held cleartext, indexed by ledger position."""

    def __init__(self, entries: Iterable[TransactionEntry] = ()):
        self.entries: list[TransactionEntry] = list(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"position": i, **e.to_dict()}, sort_keys=True) + "\n"
                       for i, e in enumerate(self.entries))

    @classmethod
    def from_jsonl(cls, text: str) -> "EntryStore":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        rows.sort(key=lambda r: r["position"])
        if [r["position"] for r in rows] != list(range(len(rows))):
            raise LedgerError("entry store positions are not contiguous")
        return cls(TransactionEntry.from_dict(r) for r in rows)


def get_transaction(chain: Sequence[LedgerBlock], store: EntryStore, index: int,
                    commitments: Sequence[bytes] | None = None) -> TransactionEntry:
    if commitments is None:
        commitments = flat_commitments(chain)
    if not 0 <= index < len(commitments):
        raise IndexError(f"ledger position {index} out of range (0..{len(commitments) - 1})")
    if index >= len(store):
        raise IntegrityError(f"no cleartext supplied for ledger position {index}")
    entry = store.entries[index]
    if not verify_disclosure(entry, commitments[index]):
        raise IntegrityError(f"cleartext at position {index} does not match its commitment")
    return entry


class Ledger:
    """A community ledger: the chain plus the cleartext entry store."""

    def __init__(self) -> None:
        self.chain: list[LedgerBlock] = []
        self.store = EntryStore()
        self._stop_positions: dict[str, int] = {}

    @property
    def head(self) -> bytes:
        return self.chain[-1].block_hash if self.chain else GENESIS_PREV

    def __len__(self) -> int:
        return len(self.store)

    def append(self, entries: Sequence[TransactionEntry]) -> list[int]:
        start = len(self.store)
        self.chain = append_block(self.chain, entries)
        self.store.entries.extend(entries)
        return list(range(start, start + len(entries)))

    def record_purchase(self, user: str, item: str, rating: float, disclosure) -> list[int]:
        seq = disclosure.trigger_seq
        return self.append([
            TransactionEntry(user, item, rating, seq, "purchase"),
            TransactionEntry(user, item, 0.0, seq, "disclosure", encode_items(disclosure.items)),
        ])

    def record_stop(self, user: str, seq: int) -> int:
        (pos,) = self.append([TransactionEntry(user, "", 0.0, seq, "stop_request")])
        self._stop_positions[user] = pos
        return pos

    def stop_position(self, user: str) -> int:
        if user not in self._stop_positions:
            raise LedgerError(f"no stop-request of {user!r} on the ledger")
        return self._stop_positions[user]

    def record_snapshot(self, user: str, item: str, members: Sequence[str], seq: int) -> int:
        (pos,) = self.append([TransactionEntry(user, item, 0.0, seq, "snapshot", encode_items(sorted(members)))])
        return pos

    def record_export(self, owner: str, export: bytes, seq: int) -> int:
        digest = hashlib.sha256(export).digest()
        (pos,) = self.append([TransactionEntry(owner, "", 0.0, seq, "community_export", digest)])
        return pos

    def fork(self) -> "Ledger":
        new = Ledger()
        new.chain = list(self.chain)
        new.store = EntryStore(self.store.entries)
        new._stop_positions = dict(self._stop_positions)
        return new

    def chain_json(self) -> str:
        return json.dumps([b.to_dict() for b in self.chain], indent=1)

    @staticmethod
    def load_chain(text: str) -> list[LedgerBlock]:
        return [LedgerBlock.from_dict(d) for d in json.loads(text)]
