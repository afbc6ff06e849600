"""Null-dereference patch synthesis.

Given a failure point, the engine exhaustively enumerates four template
kinds, replays each candidate edit in a sandbox against the failing request,
and promotes the ones the request oracle accepts:

  SkipStatement        guard the failing statement with `if <v> != null`
  ReplaceWithDefault   substitute the null expression with {}, "", 0 or false
  ReplaceWithVariable  substitute it with an earlier-bound local
  ReturnEarly          insert `if <v> == null { return D, "B"; }` before it

Enumeration order is deterministic: kinds in the order above, arguments in
lexicographic order within a kind. Duplicate-effect patches are kept; the
regression statistics sort them out.
"""

from __future__ import annotations

import copy
import difflib
import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, replace as dc_replace
from typing import Any, Callable, Optional

from .envelopes import TO_PATCH_SERVICE, ShadowEnvelope
from .faults import FailurePoint, FaultKind
from .lang.ast import (
    AssignStmt,
    BinOp,
    BoolLit,
    Call,
    Expr,
    FieldAccess,
    IfStmt,
    IntLit,
    LetStmt,
    MapLit,
    NullLit,
    Program,
    ReturnStmt,
    Stmt,
    StrLit,
    Var,
    expr_nodes,
)
from .lang.render import render_expr, render_program
from .messages import Request
from .metrics import Metrics
from .oracle import RequestOracle
from .sandboxes import LeaseTimeout, SandboxPool, leased
from .store import KeyValueStore, SnapshotRegistry, StateSnapshot

log = logging.getLogger(__name__)

KIND_SKIP = "SkipStatement"
KIND_REPLACE_DEFAULT = "ReplaceWithDefault"
KIND_REPLACE_VARIABLE = "ReplaceWithVariable"
KIND_RETURN_EARLY = "ReturnEarly"

# Rendered literal text of each injectable default, applied in lexicographic order.
DEFAULT_LITERALS = sorted(['{}', '""', "0", "false"])


class UnresolvableSite(Exception):
    """The program no longer contains the failure point the patch targets."""


class SandboxUnavailable(Exception):
    pass


@dataclass(frozen=True)
class Patch:
    patch_id: str
    kind: str
    site: FailurePoint
    args: tuple[tuple[str, Any], ...]  # sorted (name, value) pairs
    diff: str

    def arg(self, name: str) -> Any:
        for k, v in self.args:
            if k == name:
                return v
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.patch_id,
            "kind": self.kind,
            "site": self.site.to_json(),
            "args": dict(self.args),
            "diff": self.diff,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Patch":
        return cls(
            patch_id=d["id"],
            kind=d["kind"],
            site=FailurePoint.from_json(d["site"]),
            args=tuple(sorted(d.get("args", {}).items())),
            diff=d.get("diff", ""),
        )


@dataclass
class CandidatePatch:
    """A patch that fixed its triggering failing request in a sandbox."""

    patch: Patch
    request_id: str
    created_at: float
    fixes: int = 1
    # Retained so the soundness invariant (replay from the recorded snapshot
    # succeeds) stays checkable from the record alone.
    request: Optional[Request] = None
    snapshot_version: int = -1

    def to_json(self) -> dict[str, Any]:
        return {
            "patch": self.patch.to_json(),
            "request_id": self.request_id,
            "created_at": self.created_at,
            "fixes": self.fixes,
            "request": self.request.to_json() if self.request else None,
            "snapshot_version": self.snapshot_version,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "CandidatePatch":
        req = d.get("request")
        return cls(
            patch=Patch.from_json(d["patch"]),
            request_id=d["request_id"],
            created_at=d.get("created_at", 0.0),
            fixes=d.get("fixes", 1),
            request=Request.from_json(req) if req else None,
            snapshot_version=d.get("snapshot_version", -1),
        )


@dataclass(frozen=True)
class Budget:
    """Wall-clock and attempt bounds for one failure's patch search."""

    budget_ms: float = 5000.0
    max_patches: int = 256

    def __post_init__(self) -> None:
        if self.budget_ms < 0 or self.max_patches < 0:
            raise ValueError("budget must not be negative")


# --- site resolution ----------------------------------------------------------

@dataclass
class _Site:
    parent: list[Stmt]
    index: int
    stmt: Stmt
    access: FieldAccess


def _find_stmt(body: list[Stmt], line: int) -> Optional[tuple[list[Stmt], int, Stmt]]:
    for i, s in enumerate(body):
        if s.line == line:
            return body, i, s
        if isinstance(s, IfStmt):
            found = _find_stmt(s.body, line)
            if found:
                return found
    return None


def _resolve(program: Program, fp: FailurePoint) -> _Site:
    handler = program.handlers.get(fp.handler)
    if handler is None:
        raise UnresolvableSite(f"no handler {fp.handler!r}")
    found = _find_stmt(handler.body, fp.line)
    if not found:
        raise UnresolvableSite(f"{fp.handler}: no statement at line {fp.line}")
    parent, index, stmt = found
    nodes = expr_nodes(stmt)
    if not 0 <= fp.expr_index < len(nodes):
        raise UnresolvableSite(f"{fp.handler}:{fp.line}: no expression at index {fp.expr_index}")
    node = nodes[fp.expr_index]
    if not isinstance(node, FieldAccess) or render_expr(node.base) != fp.variable:
        raise UnresolvableSite(
            f"{fp.handler}:{fp.line}: expression {fp.expr_index} is not a dereference of {fp.variable!r}"
        )
    return _Site(parent, index, stmt, node)


def _parse_literal(text: str) -> Expr:
    if text == "{}":
        return MapLit()
    if text == '""':
        return StrLit("")
    if text == "false":
        return BoolLit(False)
    if text == "true":
        return BoolLit(True)
    if text == "null":
        return NullLit()
    return IntLit(int(text))


def _replace_node(root: Expr, target: Expr, replacement: Expr) -> Expr:
    """Rebuild an expression tree with the identical `target` node swapped out."""
    if root is target:
        return replacement
    if isinstance(root, FieldAccess):
        base = _replace_node(root.base, target, replacement)
        return root if base is root.base else FieldAccess(base, root.name)
    if isinstance(root, BinOp):
        left = _replace_node(root.left, target, replacement)
        right = _replace_node(root.right, target, replacement)
        if left is root.left and right is root.right:
            return root
        return BinOp(root.op, left, right)
    if isinstance(root, Call):
        args = tuple(_replace_node(a, target, replacement) for a in root.args)
        if all(a is b for a, b in zip(args, root.args)):
            return root
        return Call(root.func, args)
    return root


def _set_stmt_expr(stmt: Stmt, new_root: Expr) -> None:
    if isinstance(stmt, (LetStmt, AssignStmt, ReturnStmt)):
        stmt.expr = new_root
    elif isinstance(stmt, IfStmt):
        stmt.cond = new_root
    else:
        raise TypeError(stmt)


def _stmt_expr_root(stmt: Stmt) -> Expr:
    if isinstance(stmt, (LetStmt, AssignStmt, ReturnStmt)):
        return stmt.expr
    if isinstance(stmt, IfStmt):
        return stmt.cond
    raise TypeError(stmt)


def apply_patch_tracked(program: Program, patch: Patch) -> tuple[Program, str]:
    """Apply a patch to a structurally identical program.

    Returns a new Program (the input is untouched) and the sid of the patched
    statement, i.e. the statement whose execution counts as "the patch ran".
    Raises UnresolvableSite when the site no longer matches (for example, the
    patch was already applied).
    """
    patched = program.clone()
    site = _resolve(patched, patch.site)

    if patch.kind == KIND_SKIP:
        guard = IfStmt(
            BinOp("!=", copy.deepcopy(site.access.base), NullLit()),
            [site.stmt],
        )
        site.parent[site.index] = guard
        marker_stmt: Stmt = guard
    elif patch.kind == KIND_RETURN_EARLY:
        status = int(patch.arg("status"))
        body = str(patch.arg("body"))
        guard = IfStmt(
            BinOp("==", copy.deepcopy(site.access.base), NullLit()),
            [ReturnStmt(status, StrLit(body))],
        )
        site.parent.insert(site.index, guard)
        marker_stmt = guard
    elif patch.kind in (KIND_REPLACE_DEFAULT, KIND_REPLACE_VARIABLE):
        if patch.kind == KIND_REPLACE_DEFAULT:
            replacement: Expr = _parse_literal(str(patch.arg("default")))
        else:
            replacement = Var(str(patch.arg("variable")))
        new_access = FieldAccess(replacement, site.access.name)
        new_root = _replace_node(_stmt_expr_root(site.stmt), site.access, new_access)
        _set_stmt_expr(site.stmt, new_root)
        marker_stmt = site.stmt
    else:
        raise ValueError(f"unknown patch kind {patch.kind!r}")

    patched.renumber()
    return patched, marker_stmt.sid


def apply_patch(program: Program, patch: Patch) -> Program:
    return apply_patch_tracked(program, patch)[0]


def _patch_id(kind: str, site: FailurePoint, args: dict[str, Any]) -> str:
    payload = json.dumps(
        {"kind": kind, "site": site.to_json(), "args": args}, sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _render_diff(original: Program, patched: Program) -> str:
    a = render_program(original).splitlines()
    b = render_program(patched).splitlines()
    lines = difflib.unified_diff(a, b, fromfile="a/handlers", tofile="b/handlers", lineterm="")
    return "\n".join(lines)


def variables_bound_before(program: Program, fp: FailurePoint) -> list[str]:
    """Locals bound by let/assign statements strictly before the failing line."""
    handler = program.handlers.get(fp.handler)
    if handler is None:
        return []
    names: set[str] = set()
    for s in handler.walk():
        if s.line >= fp.line:
            continue
        if isinstance(s, (LetStmt, AssignStmt)):
            names.add(s.name)
    names.discard(fp.variable)
    return sorted(names)


def enumerate_patches(
    program: Program,
    fp: FailurePoint,
    return_early_status: int = 200,
    return_early_body: str = "",
) -> list[Patch]:
    """All applicable template instantiations at the failure point, in order.

    Raises UnresolvableSite when the program changed since capture.
    """
    _resolve(program, fp)  # validate the site before enumerating

    specs: list[tuple[str, dict[str, Any]]] = [(KIND_SKIP, {})]
    for literal in DEFAULT_LITERALS:
        specs.append((KIND_REPLACE_DEFAULT, {"default": literal}))
    for name in variables_bound_before(program, fp):
        specs.append((KIND_REPLACE_VARIABLE, {"variable": name}))
    specs.append(
        (KIND_RETURN_EARLY, {"status": return_early_status, "body": return_early_body})
    )

    patches: list[Patch] = []
    for kind, args in specs:
        bare = Patch(
            patch_id=_patch_id(kind, fp, args),
            kind=kind,
            site=fp,
            args=tuple(sorted(args.items())),
            diff="",
        )
        patched, _ = apply_patch_tracked(program, bare)
        patches.append(dc_replace(bare, diff=_render_diff(program, patched)))
    return patches


# --- the search service ---------------------------------------------------------

class PatchEngine:
    """The patch service: sandboxed exhaustive search under a time budget."""

    def __init__(
        self,
        program: Program,
        pool: SandboxPool,
        oracle: RequestOracle,
        snapshots: SnapshotRegistry,
        production_store: KeyValueStore,
        register_candidate: Callable[[CandidatePatch], Any],
        budget: Budget = Budget(),
        return_early_status: int = 200,
        return_early_body: str = "",
        metrics: Optional[Metrics] = None,
    ):
        self.program = program
        self.pool = pool
        self.oracle = oracle
        self.snapshots = snapshots
        self.production_store = production_store
        self.register_candidate = register_candidate
        self.budget = budget
        self.return_early_status = return_early_status
        self.return_early_body = return_early_body
        self.metrics = metrics or Metrics()
        self._program_hash = hashlib.sha256(render_program(program).encode()).hexdigest()
        self._seen: set[tuple] = set()
        self._seen_lock = threading.Lock()
        self._site_locks: dict[tuple, threading.Lock] = {}

    def _site_lock(self, key: tuple) -> threading.Lock:
        with self._seen_lock:
            return self._site_locks.setdefault(key, threading.Lock())

    def _failure_snapshot(self, version: int) -> StateSnapshot:
        snap = self.snapshots.get(version)
        if snap is None:
            snap = self.snapshots.latest()
        if snap is None:
            snap = self.snapshots.take(self.production_store)
        return snap

    def search(self, envelope: ShadowEnvelope, budget: Optional[Budget] = None) -> list[CandidatePatch]:
        """Try every enumerated patch against the failing request, in order,
        until the budget exhausts; register and return the ones that fix it."""
        budget = budget or self.budget
        if envelope.kind != TO_PATCH_SERVICE:
            raise ValueError("search expects a ToPatchService envelope")
        context = envelope.verdict.context
        if context is None or context.kind is not FaultKind.NULL_DEREFERENCE:
            self.metrics.incr("patch.skipped_non_null_deref")
            return []
        fp = context.failure_point
        if fp is None:
            self.metrics.incr("patch.skipped_no_failure_point")
            return []

        key = (fp.handler, fp.line, fp.expr_index, fp.variable, self._program_hash)
        with self._seen_lock:
            if key in self._seen:
                self.metrics.incr("patch.dedup_hits")
                return []

        with self._site_lock(key):
            with self._seen_lock:
                if key in self._seen:
                    self.metrics.incr("patch.dedup_hits")
                    return []
            candidates = self._search_site(envelope, fp, budget)
            with self._seen_lock:
                self._seen.add(key)

        for c in candidates:
            self.register_candidate(c)
        self.metrics.incr("patch.searches")
        self.metrics.incr("patch.candidates", len(candidates))
        return candidates

    def _search_site(
        self, envelope: ShadowEnvelope, fp: FailurePoint, budget: Budget
    ) -> list[CandidatePatch]:
        try:
            patches = enumerate_patches(
                self.program, fp, self.return_early_status, self.return_early_body
            )
        except UnresolvableSite:
            self.metrics.incr("patch.unresolvable_sites")
            return []

        snapshot = self._failure_snapshot(envelope.snapshot_version)
        deadline = time.monotonic() + budget.budget_ms / 1000.0
        candidates: list[CandidatePatch] = []
        tried = 0
        for patch in patches:
            if tried >= budget.max_patches or time.monotonic() >= deadline:
                break
            try:
                patched, _marker = apply_patch_tracked(self.program, patch)
            except UnresolvableSite:
                self.metrics.incr("patch.unresolvable_sites")
                continue
            try:
                with leased(self.pool, snapshot, patched, owner=f"patch:{patch.patch_id}") as sb:
                    tried += 1
                    response, outcome = sb.execute(envelope.request)
            except LeaseTimeout:
                if tried == 0:
                    raise SandboxUnavailable("no sandbox for patch search") from None
                self.metrics.incr("sandbox.lease_timeouts")
                break
            verdict = self.oracle.judge(envelope.request, response, outcome)
            if verdict.success:
                candidates.append(
                    CandidatePatch(
                        patch=patch,
                        request_id=envelope.request.request_id,
                        created_at=time.time(),
                        fixes=1,
                        request=envelope.request.copy(),
                        snapshot_version=snapshot.version,
                    )
                )
        self.metrics.incr("patch.tried", tried)
        return candidates
