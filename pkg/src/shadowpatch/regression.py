"""Live regression testing of candidate patches against mirrored traffic.

Every successful production request is replayed, per candidate patch, in a
sandbox restored from the latest production snapshot; the patched output is
compared (statuses, then normalized bodies — never headers) against the
production output. One mismatch permanently invalidates the record and the
full reproducing triple is retained.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .envelopes import TO_REGRESSION, ShadowEnvelope
from .lang.ast import Program
from .messages import Request, Response
from .metrics import Metrics
from .patch_engine import CandidatePatch, UnresolvableSite, apply_patch_tracked
from .sandboxes import LeaseTimeout, SandboxPool, leased
from .store import KeyValueStore, SnapshotRegistry, StateSnapshot

log = logging.getLogger(__name__)


class RecordState(str, Enum):
    VALIDATING = "Validating"
    INVALIDATED = "Invalidated"
    REPORTED = "Reported"
    APPROVED = "Approved"
    REJECTED = "Rejected"


TERMINAL_STATES = {RecordState.INVALIDATED, RecordState.APPROVED, RecordState.REJECTED}


class UnknownPatch(Exception):
    pass


class NotReportable(Exception):
    pass


# --- output normalization -------------------------------------------------------

class RuleError(Exception):
    pass


@dataclass(frozen=True)
class NormalizationRule:
    """strip-header(name) | mask-regex(pattern -> placeholder) | ignore-json-field(path).

    Rules are pure transforms on the compared body; strip-header is accepted
    for config compatibility but has nothing to do on a body (headers are
    excluded from comparison altogether).
    """

    kind: str
    params: tuple[tuple[str, str], ...]

    def param(self, name: str) -> str:
        for k, v in self.params:
            if k == name:
                return v
        raise KeyError(name)

    def apply(self, body: bytes) -> bytes:
        if self.kind == "strip-header":
            return body
        if self.kind == "mask-regex":
            text = body.decode("utf-8", errors="surrogateescape")
            masked = re.sub(self.param("pattern"), self.param("placeholder"), text)
            return masked.encode("utf-8", errors="surrogateescape")
        if self.kind == "ignore-json-field":
            try:
                doc = json.loads(body.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                return body
            node = doc
            path = self.param("path").split(".")
            for part in path[:-1]:
                if not isinstance(node, dict) or part not in node:
                    node = None
                    break
                node = node[part]
            if isinstance(node, dict):
                node.pop(path[-1], None)
            return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        raise RuleError(f"unknown rule kind {self.kind!r}")


def build_rules(specs: list[dict]) -> list[NormalizationRule]:
    """Validate rule specs at config load; invalid regexes are rejected here."""
    rules: list[NormalizationRule] = []
    for spec in specs:
        kind = spec.get("kind")
        params = {k: v for k, v in spec.items() if k != "kind"}
        if kind == "strip-header":
            if not isinstance(params.get("name"), str):
                raise RuleError("strip-header requires a string 'name'")
        elif kind == "mask-regex":
            pattern = params.get("pattern")
            if not isinstance(pattern, str) or not isinstance(params.get("placeholder"), str):
                raise RuleError("mask-regex requires string 'pattern' and 'placeholder'")
            try:
                re.compile(pattern)
            except re.error as e:
                raise RuleError(f"mask-regex: invalid pattern: {e}") from e
        elif kind == "ignore-json-field":
            if not isinstance(params.get("path"), str) or not params["path"]:
                raise RuleError("ignore-json-field requires a non-empty string 'path'")
        else:
            raise RuleError(f"unknown rule kind {kind!r}")
        rules.append(NormalizationRule(kind, tuple(sorted(params.items()))))
    return rules


def normalize(body: bytes, rules: list[NormalizationRule]) -> bytes:
    for rule in rules:
        body = rule.apply(body)
    return body


@dataclass(frozen=True)
class CompareResult:
    match: bool
    detail: str = ""


def compare(
    production: Response, patched: Response, rules: list[NormalizationRule]
) -> CompareResult:
    """Match iff statuses are equal and normalized bodies are byte-equal."""
    if production.status != patched.status:
        return CompareResult(False, f"status {production.status} != {patched.status}")
    a = normalize(production.body, rules)
    b = normalize(patched.body, rules)
    if a != b:
        return CompareResult(
            False,
            f"body mismatch: production {a[:120]!r} vs patched {b[:120]!r}",
        )
    return CompareResult(True)


# --- patch records ----------------------------------------------------------------

@dataclass
class MismatchEvidence:
    """Reproducing triple stored when a record is invalidated."""

    request: Request
    production_response: Response
    patched_response: Response
    detail: str
    snapshot: Optional[StateSnapshot] = field(default=None, repr=False)
    at: float = 0.0

    def to_json(self) -> dict[str, Any]:
        return {
            "request": self.request.to_json(),
            "production_response": self.production_response.to_json(),
            "patched_response": self.patched_response.to_json(),
            "detail": self.detail,
            "snapshot_version": self.snapshot.version if self.snapshot else -1,
            "at": self.at,
        }


@dataclass
class PatchRecord:
    candidate: CandidatePatch
    state: RecordState = RecordState.VALIDATING
    fixes: int = 1
    executions: int = 0
    patched_line_executions: int = 0
    created_at: float = 0.0
    reported_at: Optional[float] = None
    mismatch: Optional[MismatchEvidence] = None
    decided_by: Optional[str] = None
    decided_at: Optional[float] = None
    decision: Optional[str] = None

    @property
    def patch_id(self) -> str:
        return self.candidate.patch.patch_id

    def to_json(self) -> dict[str, Any]:
        p = self.candidate.patch
        return {
            "id": p.patch_id,
            "state": self.state.value,
            "kind": p.kind,
            "site": p.site.to_json(),
            "args": dict(p.args),
            "diff": p.diff,
            "fixes": self.fixes,
            "executions": self.executions,
            "patched_line_executions": self.patched_line_executions,
            "triggering_request_id": self.candidate.request_id,
            "created_at": self.created_at,
            "reported_at": self.reported_at,
            "mismatch": self.mismatch.to_json() if self.mismatch else None,
            "decided_by": self.decided_by,
            "decided_at": self.decided_at,
            "decision": self.decision,
        }


class PatchRegistry:
    """Synchronized record table; state transitions are atomic per record."""

    def __init__(
        self,
        promote_patched_line: int = 10,
        promote_executions: int = 50,
        on_promote: Optional[Callable[[PatchRecord], None]] = None,
    ):
        self._lock = threading.RLock()
        self._records: dict[str, PatchRecord] = {}
        self.promote_patched_line = promote_patched_line
        self.promote_executions = promote_executions
        self.on_promote = on_promote

    def register(self, candidate: CandidatePatch) -> PatchRecord:
        """New candidates enter Validating; duplicates merge (fix count +1)."""
        with self._lock:
            record = self._records.get(candidate.patch.patch_id)
            if record is None:
                record = PatchRecord(candidate=candidate, created_at=time.time(), fixes=candidate.fixes)
                self._records[record.patch_id] = record
            else:
                record.fixes += candidate.fixes
            return record

    def get(self, patch_id: str) -> Optional[PatchRecord]:
        with self._lock:
            return self._records.get(patch_id)

    def all_records(self) -> list[PatchRecord]:
        with self._lock:
            return list(self._records.values())

    def validating(self) -> list[PatchRecord]:
        with self._lock:
            return [r for r in self._records.values() if r.state is RecordState.VALIDATING]

    def invalidate(self, patch_id: str, evidence: MismatchEvidence) -> None:
        with self._lock:
            record = self._records.get(patch_id)
            if record is None or record.state is not RecordState.VALIDATING:
                return
            record.state = RecordState.INVALIDATED
            record.mismatch = evidence

    def record_match(self, patch_id: str, patched_ran: bool) -> None:
        promoted: Optional[PatchRecord] = None
        with self._lock:
            record = self._records.get(patch_id)
            if record is None or record.state is not RecordState.VALIDATING:
                return
            record.executions += 1
            if patched_ran:
                record.patched_line_executions += 1
            if (
                record.patched_line_executions >= self.promote_patched_line
                and record.executions >= self.promote_executions
            ):
                record.state = RecordState.REPORTED
                record.reported_at = time.time()
                promoted = record
        if promoted is not None and self.on_promote is not None:
            try:
                self.on_promote(promoted)
            except Exception:
                log.warning("on_promote hook failed", exc_info=True)

    def decide(self, patch_id: str, decision: str, actor: str) -> PatchRecord:
        """Approve or Reject a Reported record; decisions are final."""
        if decision not in ("Approve", "Reject"):
            raise ValueError(f"decision must be Approve or Reject, got {decision!r}")
        with self._lock:
            record = self._records.get(patch_id)
            if record is None:
                raise UnknownPatch(patch_id)
            if record.state is not RecordState.REPORTED:
                raise NotReportable(f"record {patch_id} is {record.state.value}")
            record.state = RecordState.APPROVED if decision == "Approve" else RecordState.REJECTED
            record.decision = decision
            record.decided_by = actor
            record.decided_at = time.time()
            return record


# --- the regression service -------------------------------------------------------

class RegressionService:
    """Validates every live candidate against each successful production request."""

    def __init__(
        self,
        registry: PatchRegistry,
        pool: SandboxPool,
        program: Program,
        production_store: KeyValueStore,
        snapshots: SnapshotRegistry,
        rules: Optional[list[NormalizationRule]] = None,
        metrics: Optional[Metrics] = None,
    ):
        self.registry = registry
        self.pool = pool
        self.program = program
        self.production_store = production_store
        self.snapshots = snapshots
        self.rules = rules or []
        self.metrics = metrics or Metrics()

    def register(self, candidate: CandidatePatch) -> PatchRecord:
        return self.registry.register(candidate)

    def check(self, envelope: ShadowEnvelope) -> None:
        """Replay one successful request against every Validating record."""
        if envelope.kind != TO_REGRESSION or envelope.response is None:
            return
        records = self.registry.validating()
        if not records:
            return
        snapshot = self.snapshots.take(self.production_store)
        for record in records:
            self._replay_record(record, envelope.request, envelope.response, snapshot)

    def _replay_record(
        self,
        record: PatchRecord,
        request: Request,
        production_response: Response,
        snapshot: StateSnapshot,
    ) -> None:
        try:
            patched_program, marker = apply_patch_tracked(self.program, record.candidate.patch)
        except UnresolvableSite:
            self.metrics.incr("regression.unresolvable_sites")
            return
        try:
            with leased(self.pool, snapshot, patched_program, owner=f"regress:{record.patch_id}") as sb:
                response, outcome = sb.execute(request)
        except LeaseTimeout:
            # Validation is sampling-tolerant: skip this envelope for the record.
            self.metrics.incr("regression.lease_skips")
            return
        self.metrics.incr("regression.replays")
        if outcome.faulted:
            result = CompareResult(False, f"patched replay faulted: {outcome.context.kind.value}")
            patched_response = Response(500, [], b"internal error")
        else:
            patched_response = response
            result = compare(production_response, response, self.rules)
        if result.match:
            self.metrics.incr("regression.matches")
            self.registry.record_match(record.patch_id, marker in outcome.executed_set())
        else:
            self.metrics.incr("regression.mismatches")
            self.registry.invalidate(
                record.patch_id,
                MismatchEvidence(
                    request=request.copy(),
                    production_response=production_response,
                    patched_response=patched_response,
                    detail=result.detail,
                    snapshot=snapshot,
                    at=time.time(),
                ),
            )

    def reproduce_mismatch(self, record: PatchRecord) -> bool:
        """Replay a stored invalidation triple; True when the mismatch recurs."""
        ev = record.mismatch
        if ev is None or ev.snapshot is None:
            return False
        patched_program, _ = apply_patch_tracked(self.program, record.candidate.patch)
        with leased(self.pool, ev.snapshot, patched_program, owner="reproduce") as sb:
            response, outcome = sb.execute(ev.request)
        if outcome.faulted:
            return True
        return not compare(ev.production_response, response, self.rules).match
