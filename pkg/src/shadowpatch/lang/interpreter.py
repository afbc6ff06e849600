"""Deterministic tree-walking interpreter for handler-language programs.

Executing a handler yields an ExecOutcome: Completed with the response, or
Faulted at the first contract violation (no further statements run). Field
access on Null is the one NullDereference trigger; access on any other
non-map value is a TypeFault, and division by zero is an Arithmetic fault.
Reads of unbound variables yield Null, and a map access on a missing field
yields Null rather than faulting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Protocol

from ..faults import FailureContext, FailurePoint, FaultKind
from ..messages import Request, Response
from .ast import (
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
    Value,
    Var,
    expr_nodes,
    value_kind,
    values_equal,
    wrap_int64,
)
from .render import render_expr, render_value


class UnknownHandler(Exception):
    def __init__(self, name: str):
        super().__init__(f"unknown handler {name!r}")
        self.name = name


class State(Protocol):
    """Mutable application state the db builtins run against."""

    def get(self, key: str) -> Optional[Value]: ...

    def put(self, key: str, value: Value) -> None: ...


class DictState:
    """Plain dict-backed state, used by sandboxes and tests."""

    def __init__(self, data: Optional[dict[str, Value]] = None):
        self.data: dict[str, Value] = data if data is not None else {}

    def get(self, key: str) -> Optional[Value]:
        return self.data.get(key)

    def put(self, key: str, value: Value) -> None:
        self.data[key] = value


@dataclass(frozen=True)
class ExecOutcome:
    completed: bool
    response: Optional[Response]
    context: Optional[FailureContext]
    executed: tuple[str, ...]  # sids of statements that ran, in order
    state_version: int = -1

    @property
    def faulted(self) -> bool:
        return not self.completed

    def executed_set(self) -> frozenset[str]:
        return frozenset(self.executed)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "completed" if self.completed else "faulted",
            "context": self.context.to_json() if self.context else None,
            "state_version": self.state_version,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ExecOutcome":
        ctx = d.get("context")
        return cls(
            completed=d["kind"] == "completed",
            response=None,
            context=FailureContext.from_json(ctx) if ctx else None,
            executed=(),
            state_version=d.get("state_version", -1),
        )


class _Return(Exception):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body


class _Fault(Exception):
    def __init__(self, kind: FaultKind, stmt: Stmt, node: Optional[Expr], variable: str = ""):
        self.kind = kind
        self.stmt = stmt
        self.node = node
        self.variable = variable


def _expr_index(stmt: Stmt, node: Expr) -> int:
    for i, n in enumerate(expr_nodes(stmt)):
        if n is node:
            return i
    return -1


class _Exec:
    def __init__(self, request: Request, state: State):
        self.request = request
        self.state = state
        self.env: dict[str, Value] = {}
        self.executed: list[str] = []
        self.stmt: Optional[Stmt] = None

    def run_block(self, body: list[Stmt]) -> None:
        for s in body:
            self.executed.append(s.sid)
            self.stmt = s
            if isinstance(s, LetStmt) or isinstance(s, AssignStmt):
                self.env[s.name] = self.eval(s.expr)
            elif isinstance(s, ReturnStmt):
                raise _Return(s.status, render_value(self.eval(s.expr)))
            elif isinstance(s, IfStmt):
                cond = self.eval(s.cond)
                if not isinstance(cond, bool):
                    raise _Fault(FaultKind.TYPE_FAULT, s, s.cond)
                if cond:
                    self.run_block(s.body)
                    self.stmt = s
            else:
                raise TypeError(s)

    def eval(self, e: Expr) -> Value:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, StrLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, NullLit):
            return None
        if isinstance(e, MapLit):
            return {}
        if isinstance(e, Var):
            return self.env.get(e.name)
        if isinstance(e, FieldAccess):
            base = self.eval(e.base)
            if base is None:
                raise _Fault(
                    FaultKind.NULL_DEREFERENCE, self.stmt, e, variable=render_expr(e.base)
                )
            if not isinstance(base, dict):
                raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
            return base.get(e.name)
        if isinstance(e, BinOp):
            left = self.eval(e.left)
            right = self.eval(e.right)
            if e.op == "==":
                return values_equal(left, right)
            if e.op == "!=":
                return not values_equal(left, right)
            if value_kind(left) != "int" or value_kind(right) != "int":
                raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
            if e.op == "<":
                return left < right
            if e.op == ">":
                return left > right
            if e.op == "+":
                return wrap_int64(left + right)
            if e.op == "-":
                return wrap_int64(left - right)
            if e.op == "*":
                return wrap_int64(left * right)
            if e.op == "/":
                if right == 0:
                    raise _Fault(FaultKind.ARITHMETIC, self.stmt, e)
                q = abs(left) // abs(right)
                if (left < 0) != (right < 0):
                    q = -q
                return wrap_int64(q)
            raise TypeError(e.op)
        if isinstance(e, Call):
            return self.call(e)
        raise TypeError(e)

    def call(self, e: Call) -> Value:
        if e.func == "param":
            key = self.eval(e.args[0])
            if not isinstance(key, str):
                raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
            return self.request.param(key)
        if e.func == "db.get":
            key = self.eval(e.args[0])
            if not isinstance(key, str):
                raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
            return self.state.get(key)
        if e.func == "db.put":
            key = self.eval(e.args[0])
            value = self.eval(e.args[1])
            if not isinstance(key, str):
                raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
            self.state.put(key, value)
            return value
        if e.func == "len":
            v = self.eval(e.args[0])
            if isinstance(v, str) or isinstance(v, dict):
                return len(v)
            raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
        if e.func == "concat":
            a = self.eval(e.args[0])
            b = self.eval(e.args[1])
            if not isinstance(a, str) or not isinstance(b, str):
                raise _Fault(FaultKind.TYPE_FAULT, self.stmt, e)
            return a + b
        raise TypeError(e.func)


def execute_handler(
    program: Program,
    name: str,
    request: Request,
    state: State,
    state_version: int = -1,
) -> ExecOutcome:
    """Run one handler against a request and mutable state.

    Deterministic for a fixed (program, request, state value). Raises
    UnknownHandler when the handler does not exist.
    """
    if name not in program.handlers:
        raise UnknownHandler(name)
    ex = _Exec(request, state)
    try:
        ex.run_block(program.handlers[name].body)
    except _Return as r:
        response = Response(r.status, [], r.body.encode("utf-8"))
        return ExecOutcome(True, response, None, tuple(ex.executed), state_version)
    except _Fault as f:
        point = None
        if f.kind is FaultKind.NULL_DEREFERENCE:
            point = FailurePoint(
                handler=name,
                line=f.stmt.line if f.stmt else 0,
                expr_index=_expr_index(f.stmt, f.node) if f.stmt and f.node else -1,
                variable=f.variable,
            )
        context = FailureContext(
            request_id=request.request_id,
            kind=f.kind,
            failure_point=point,
            state_version=state_version,
        )
        return ExecOutcome(False, None, context, tuple(ex.executed), state_version)
    return ExecOutcome(True, Response(200, [], b""), None, tuple(ex.executed), state_version)
