"""Independent verification of submitted evidence."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .community import CommunityState
from .ledger import (EntryStore, IntegrityError, LedgerBlock, LedgerError, decode_items, flat_commitments,
                     get_transaction, verify_chain)
from .probing import Evidence, criteria_report, lemma_check, select_target_items

VIOLATION = "violation"
NOT_PROVEN = "not_proven"

CHECKS = ("chain", "references", "lemma", "ordering")
INTEGRITY_CHECKS = ("chain", "references")

EXIT_NOT_PROVEN = 0
EXIT_VIOLATION = 10
EXIT_INTEGRITY = 2


@dataclass
class EvidenceCheck:
    evidence_id: str
    results: dict[str, bool]
    failed: str | None
    detail: str = ""
    lemma: bool = False
    overlap: list[str] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return self.failed is None

    def to_dict(self) -> dict:
        return {"evidence_id": self.evidence_id, "checks": self.results, "failed": self.failed,
                "detail": self.detail, "lemma": self.lemma, "overlap": self.overlap}


@dataclass
class Verdict:
    decision: str
    basis: list[dict]
    metadata_S: int

    def to_json(self) -> str:
        return json.dumps({"decision": self.decision, "basis": self.basis, "metadata_S": self.metadata_S},
                          sort_keys=True, indent=1)

    @property
    def exit_code(self) -> int:
        if any(b["failed"] in INTEGRITY_CHECKS for b in self.basis):
            return EXIT_INTEGRITY
        return EXIT_VIOLATION if self.decision == VIOLATION else EXIT_NOT_PROVEN


def evidence_id(ev: Evidence) -> str:
    return f"{ev.victim}/{ev.probe}/r{ev.round}"


def verify_evidence(ev: Evidence, chain: Sequence[LedgerBlock], store: EntryStore, metadata_S: int | None,
                    head: bytes | None = None) -> EvidenceCheck:
    """Run the four checks in order and stop at the first failure."""
    if metadata_S is None:
        raise ValueError("the platform's cluster size S is required; refusing to estimate it")
    eid = evidence_id(ev)
    results = {c: False for c in CHECKS}

    def fail(check: str, detail: str) -> EvidenceCheck:
        return EvidenceCheck(eid, results, check, detail)

    report = verify_chain(chain, head)
    if not report.valid:
        where = "head digest mismatch" if report.head_mismatch else f"block {report.first_bad_index}"
        return fail("chain", f"chain verification failed at {where}")
    results["chain"] = True

    commitments = flat_commitments(chain)
    found: dict[str, tuple[int, object]] = {}
    for pos in ev.ledger_refs:
        try:
            entry = get_transaction(chain, store, pos, commitments)
        except (IndexError, IntegrityError) as exc:
            return fail("references", str(exc))
        found.setdefault(entry.kind, (pos, entry))
    for kind in ("stop_request", "snapshot", "purchase", "disclosure"):
        if kind not in found:
            return fail("references", f"no {kind} entry among the ledger references")
        pos, entry = found[kind]
        if entry.buyer != ev.victim or (kind != "stop_request" and entry.itemID != ev.probe):
            return fail("references", f"{kind} entry at {pos} belongs to another user or item")
    if found["purchase"][1].rate != 1.0:
        return fail("references", "probe purchase was not rated 1.0")
    if found["stop_request"][0] > found["purchase"][0]:
        return fail("references", "stop-request is recorded after the probe purchase")
    results["references"] = True

    try:
        committed_A = set(decode_items(found["snapshot"][1].payload))
        committed_B = decode_items(found["disclosure"][1].payload)
    except LedgerError as exc:
        return fail("lemma", str(exc))
    if committed_A != set(ev.A):
        return fail("lemma", "cluster snapshot A differs from the committed snapshot")
    if committed_B != list(ev.B):
        return fail("lemma", "disclosed set B differs from the committed disclosure")
    if ev.S != metadata_S:
        return fail("lemma", f"evidence uses S={ev.S} but the platform reports S={metadata_S}")
    try:
        lemma = lemma_check(committed_A, committed_B, metadata_S)
    except ValueError as exc:
        return fail("lemma", str(exc))
    if lemma != ev.lemma_triggered:
        return fail("lemma", f"recomputed lemma result {lemma} contradicts the claim {ev.lemma_triggered}")
    results["lemma"] = True

    if not found["snapshot"][0] < found["purchase"][0]:
        return fail("ordering", "cluster snapshot was committed after the probe purchase")
    results["ordering"] = True

    # the victim's pre-request history, read from committed purchase entries
    stop_pos = found["stop_request"][0]
    history = set()
    for pos in range(min(stop_pos, len(store))):
        e = store.entries[pos]
        if e.kind == "purchase" and e.buyer == ev.victim:
            try:
                history.add(get_transaction(chain, store, pos, commitments).itemID)
            except IntegrityError as exc:
                results["lemma"] = results["ordering"] = False
                results["references"] = False
                return fail("references", f"victim history entry: {exc}")
    return EvidenceCheck(eid, results, None, "", lemma, sorted(set(committed_B) & history))


@dataclass
class DetectorReplay:
    victim: str
    targets: list[str]
    lemma: list[bool]
    criteria: dict[str, dict[str, bool]]

    def to_json(self) -> str:
        return json.dumps({"victim": self.victim, "targets": self.targets, "lemma": self.lemma,
                           "criteria": self.criteria}, sort_keys=True)


def re_execute_detector(export: bytes, chain: Sequence[LedgerBlock], store: EntryStore, export_ref: int,
                        victim: str, evidences: Iterable[Evidence], S: int) -> DetectorReplay:
    """Recompute target selection and lemma results from a committed community export."""
    entry = get_transaction(chain, store, export_ref)
    if entry.kind != "community_export":
        raise IntegrityError(f"ledger position {export_ref} is not a community export")
    if hashlib.sha256(export).digest() != entry.payload:
        raise IntegrityError("community export does not match its ledger commitment")
    community = CommunityState.from_export(export)
    targets = [t.item for t in select_target_items(community, victim)]
    lemma, criteria = [], {}
    for ev in evidences:
        lemma.append(lemma_check(ev.A, ev.B, S))
        criteria[ev.probe] = criteria_report(community, victim, ev.probe)
    return DetectorReplay(victim, targets, lemma, criteria)


def adjudicate(results: Sequence[EvidenceCheck], metadata_S: int) -> Verdict:
    basis = []
    decision = NOT_PROVEN
    for r in results:
        row = r.to_dict()
        if r.verified and r.lemma:
            decision = VIOLATION
        elif r.verified and r.overlap:
            row["note"] = "corroborating only: disclosure overlaps the victim's purchase history"
        basis.append(row)
    return Verdict(decision, basis, metadata_S)
