"""Application runtime: routes requests to handler-language handlers over a
snapshot-able key-value store.

The production instance serializes handler executions and takes a registered
pre-execution snapshot per request (so a failure can be replayed from exactly
the state it started in). Sandbox instances skip per-request snapshots and
are the only instances allowed to restore.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from .lang.ast import Program, Value
from .lang.interpreter import ExecOutcome, execute_handler
from .messages import Request, Response
from .store import KeyValueStore, SnapshotRegistry, StateSnapshot


class RestoreOnProduction(Exception):
    """Restoring state onto the production instance is forbidden by construction."""


@dataclass(frozen=True)
class Route:
    method: str
    pattern: str  # exact path, or a single trailing wildcard segment: /users/*
    handler: str


class RouteTable:
    """Ordered (method, pattern) -> handler table; first match wins."""

    def __init__(self, routes: list[Route]):
        self.routes = list(routes)

    def match(self, method: str, path: str) -> Optional[str]:
        for r in self.routes:
            if r.method != method:
                continue
            if r.pattern == path:
                return r.handler
            if r.pattern.endswith("/*"):
                prefix = r.pattern[:-1]  # keep the slash
                rest = path[len(prefix):]
                if path.startswith(prefix) and rest and "/" not in rest:
                    return r.handler
        return None

    def handler_names(self) -> set[str]:
        return {r.handler for r in self.routes}


_INTERNAL_ERROR_BODY = b"internal error"


class AppRuntime:
    """A routed handler-language application over one mutable store."""

    def __init__(
        self,
        program: Program,
        routes: RouteTable,
        store: Optional[KeyValueStore] = None,
        registry: Optional[SnapshotRegistry] = None,
        is_production: bool = False,
    ):
        self.program = program
        self.routes = routes
        self.store = store if store is not None else KeyValueStore()
        self.registry = registry if registry is not None else SnapshotRegistry()
        self.is_production = is_production
        self._exec_lock = threading.Lock()

    def handle(self, request: Request) -> tuple[Response, ExecOutcome]:
        """Route and execute; Faulted outcomes map to an opaque 500 response."""
        handler = self.routes.match(request.method, request.path)
        if handler is None:
            outcome = ExecOutcome(True, None, None, (), -1)
            return Response(404, [], b"not found"), outcome
        with self._exec_lock:
            if self.is_production:
                snap = self.registry.take(self.store)
                version = snap.version
            else:
                version = -1
            outcome = execute_handler(self.program, handler, request, self.store, version)
        if outcome.faulted:
            return Response(500, [], _INTERNAL_ERROR_BODY), outcome
        return outcome.response, outcome

    def snapshot(self) -> StateSnapshot:
        return self.registry.take(self.store)

    def restore(self, snapshot: StateSnapshot) -> None:
        if self.is_production:
            raise RestoreOnProduction("cannot restore state on the production instance")
        self.store.replace_all(snapshot.data)

    def dump_state(self) -> dict[str, Value]:
        return self.store.dump()
