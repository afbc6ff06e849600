"""AST for the request-handler language.

Programs are maps of named handlers; each handler is an ordered statement
list. Statements carry a logical line number (1-based, pre-order within the
handler, contiguous) and a stable statement id used for execution tracking.
Expression nodes are immutable; statements are rebuilt rather than mutated
when a program is transformed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterator, Union

# Runtime values: Null, 64-bit Int, Str, Bool, and string-keyed Map.
Value = Union[None, bool, int, str, dict]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def wrap_int64(n: int) -> int:
    """Wrap an int into two's-complement 64-bit range."""
    return (n - INT64_MIN) % 2**64 + INT64_MIN


def value_kind(v: Value) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):  # bool before int: bool subclasses int
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, str):
        return "str"
    if isinstance(v, dict):
        return "map"
    raise TypeError(f"not a handler-language value: {v!r}")


def values_equal(a: Value, b: Value) -> bool:
    """Deep structural equality; Null equals only Null, Bool never equals Int."""
    ka, kb = value_kind(a), value_kind(b)
    if ka != kb:
        return False
    if ka == "map":
        if a.keys() != b.keys():
            return False
        return all(values_equal(a[k], b[k]) for k in a)
    return a == b


# --- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class MapLit:
    """The empty map literal `{}` (the only map literal in the grammar)."""


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class FieldAccess:
    base: "Expr"
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / == != < >
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    """Builtin call: param, len, concat, db.get, db.put."""

    func: str
    args: tuple["Expr", ...]


Expr = Union[IntLit, StrLit, BoolLit, NullLit, MapLit, Var, FieldAccess, BinOp, Call]

BUILTIN_ARITY = {"param": 1, "len": 1, "concat": 2, "db.get": 1, "db.put": 2}


def walk_expr(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal of an expression tree."""
    yield e
    if isinstance(e, FieldAccess):
        yield from walk_expr(e.base)
    elif isinstance(e, BinOp):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk_expr(a)


# --- statements ---------------------------------------------------------------

@dataclass(eq=False)
class _StmtBase:
    line: int = field(default=0, init=False)
    sid: str = field(default="", init=False)


@dataclass(eq=False)
class LetStmt(_StmtBase):
    name: str
    expr: Expr


@dataclass(eq=False)
class AssignStmt(_StmtBase):
    name: str
    expr: Expr


@dataclass(eq=False)
class IfStmt(_StmtBase):
    cond: Expr
    body: list["Stmt"]


@dataclass(eq=False)
class ReturnStmt(_StmtBase):
    status: int
    expr: Expr


Stmt = Union[LetStmt, AssignStmt, IfStmt, ReturnStmt]


def stmt_exprs(s: Stmt) -> tuple[Expr, ...]:
    """The statement's own expression roots (nested statements excluded)."""
    if isinstance(s, (LetStmt, AssignStmt, ReturnStmt)):
        return (s.expr,)
    if isinstance(s, IfStmt):
        return (s.cond,)
    raise TypeError(s)


def expr_nodes(s: Stmt) -> list[Expr]:
    """All expression nodes of a statement, in pre-order. Index = expression index."""
    nodes: list[Expr] = []
    for root in stmt_exprs(s):
        nodes.extend(walk_expr(root))
    return nodes


def stmts_structurally_equal(a: Stmt, b: Stmt) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (LetStmt, AssignStmt)):
        return a.name == b.name and a.expr == b.expr
    if isinstance(a, ReturnStmt):
        return a.status == b.status and a.expr == b.expr
    if isinstance(a, IfStmt):
        return (
            a.cond == b.cond
            and len(a.body) == len(b.body)
            and all(stmts_structurally_equal(x, y) for x, y in zip(a.body, b.body))
        )
    raise TypeError(a)


@dataclass(eq=False)
class Handler:
    name: str
    body: list[Stmt]

    def walk(self) -> Iterator[Stmt]:
        """Pre-order over all statements, nested included."""
        yield from _walk_block(self.body)


def _walk_block(body: list[Stmt]) -> Iterator[Stmt]:
    for s in body:
        yield s
        if isinstance(s, IfStmt):
            yield from _walk_block(s.body)


@dataclass(eq=False)
class Program:
    handlers: dict[str, Handler]

    def __post_init__(self) -> None:
        self.renumber()

    def renumber(self) -> None:
        """Assign logical line numbers (pre-order, 1-based per handler) and sids."""
        for h in self.handlers.values():
            for i, s in enumerate(h.walk(), start=1):
                s.line = i
                s.sid = f"{h.name}:{i}"

    def handler(self, name: str) -> Handler:
        return self.handlers[name]

    def statement_at(self, handler: str, line: int) -> Stmt | None:
        h = self.handlers.get(handler)
        if h is None:
            return None
        for s in h.walk():
            if s.line == line:
                return s
        return None

    def clone(self) -> "Program":
        return copy.deepcopy(self)

    def __eq__(self, other: object) -> bool:
        """Structural identity: same handlers, same statement structure."""
        if not isinstance(other, Program):
            return NotImplemented
        if self.handlers.keys() != other.handlers.keys():
            return False
        for name, h in self.handlers.items():
            o = other.handlers[name]
            if len(h.body) != len(o.body):
                return False
            if not all(stmts_structurally_equal(a, b) for a, b in zip(h.body, o.body)):
                return False
        return True
