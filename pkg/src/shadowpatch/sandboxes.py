"""Pool of sandboxed application replicas for patch search and regression replay.

A lease restores the requested snapshot and installs the requested program
before handing the sandbox over, so whatever the previous owner did to the
replica is irrelevant. Leases are exclusive; production state is never
touched from here.
"""

from __future__ import annotations

import threading
import uuid
from typing import Optional

from .lang.ast import Program
from .messages import Request
from .runtime import AppRuntime, RouteTable
from .store import KeyValueStore, StateSnapshot


class LeaseTimeout(Exception):
    pass


class DoubleRelease(Exception):
    pass


class Sandbox:
    def __init__(self, routes: RouteTable, index: int):
        self.index = index
        self.runtime = AppRuntime(
            program=Program({}),
            routes=routes,
            store=KeyValueStore(),
            is_production=False,
        )
        self.owner: Optional[str] = None
        self.last_restored_version: int = -1

    def execute(self, request: Request):
        return self.runtime.handle(request)

    def install(self, snapshot: StateSnapshot, program: Program) -> None:
        self.runtime.restore(snapshot)
        self.runtime.program = program
        self.last_restored_version = snapshot.version


class SandboxPool:
    def __init__(self, routes: RouteTable, size: int = 2, lease_timeout_s: float = 5.0):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self.size = size
        self.lease_timeout_s = lease_timeout_s
        self._cond = threading.Condition()
        self._free: list[Sandbox] = [Sandbox(routes, i) for i in range(size)]
        self._leased: set[int] = set()

    def in_use(self) -> int:
        with self._cond:
            return len(self._leased)

    def lease(
        self,
        snapshot: StateSnapshot,
        program: Program,
        owner: str = "",
        timeout_s: Optional[float] = None,
    ) -> Sandbox:
        deadline = timeout_s if timeout_s is not None else self.lease_timeout_s
        with self._cond:
            if not self._free and not self._cond.wait_for(lambda: bool(self._free), timeout=deadline):
                raise LeaseTimeout(f"no sandbox free within {deadline}s")
            sandbox = self._free.pop()
            sandbox.owner = owner or uuid.uuid4().hex
            self._leased.add(sandbox.index)
        sandbox.install(snapshot, program)
        return sandbox

    def release(self, sandbox: Sandbox) -> None:
        with self._cond:
            if sandbox.owner is None or sandbox.index not in self._leased:
                raise DoubleRelease(f"sandbox {sandbox.index} is not leased")
            sandbox.owner = None
            self._leased.discard(sandbox.index)
            self._free.append(sandbox)
            self._cond.notify()


class leased:
    """Context manager: `with leased(pool, snapshot, program) as sb: ...`"""

    def __init__(self, pool: SandboxPool, snapshot: StateSnapshot, program: Program, owner: str = ""):
        self.pool = pool
        self.snapshot = snapshot
        self.program = program
        self.owner = owner
        self.sandbox: Optional[Sandbox] = None

    def __enter__(self) -> Sandbox:
        self.sandbox = self.pool.lease(self.snapshot, self.program, owner=self.owner)
        return self.sandbox

    def __exit__(self, *exc) -> None:
        if self.sandbox is not None:
            self.pool.release(self.sandbox)
