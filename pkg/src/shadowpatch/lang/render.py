"""Canonical source rendering for programs, statements, and expressions.

parse_program(render_program(p)) is structurally identical to p; rendering is
deterministic (handlers in name order, one statement per line) so rendered
text doubles as the base for patch diffs.
"""

from __future__ import annotations

import json

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
    value_kind,
)

_PREC = {"==": 1, "!=": 1, "<": 1, ">": 1, "+": 2, "-": 2, "*": 3, "/": 3}
_POSTFIX_LEVEL = 4


def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, FieldAccess):
        return _POSTFIX_LEVEL
    return 5  # primaries


def escape_string(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def render_expr(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, StrLit):
        return f'"{escape_string(e.value)}"'
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NullLit):
        return "null"
    if isinstance(e, MapLit):
        return "{}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, FieldAccess):
        base = render_expr(e.base)
        if not isinstance(e.base, (Var, Call, FieldAccess, StrLit)):
            base = f"({base})"
        return f"{base}.{e.name}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(render_expr(a) for a in e.args)})"
    if isinstance(e, BinOp):
        lvl = _PREC[e.op]
        left = render_expr(e.left)
        if _level(e.left) < lvl:
            left = f"({left})"
        right = render_expr(e.right)
        if _level(e.right) <= lvl:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(e)


def render_stmt(s: Stmt, indent: int = 1) -> list[str]:
    pad = "  " * indent
    if isinstance(s, LetStmt):
        return [f"{pad}let {s.name} = {render_expr(s.expr)};"]
    if isinstance(s, AssignStmt):
        return [f"{pad}{s.name} = {render_expr(s.expr)};"]
    if isinstance(s, ReturnStmt):
        return [f"{pad}return {s.status}, {render_expr(s.expr)};"]
    if isinstance(s, IfStmt):
        lines = [f"{pad}if {render_expr(s.cond)} {{"]
        for inner in s.body:
            lines.extend(render_stmt(inner, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(s)


def render_program(program: Program) -> str:
    chunks: list[str] = []
    for name in sorted(program.handlers):
        h = program.handlers[name]
        lines = [f"handler {name} {{"]
        for s in h.body:
            lines.extend(render_stmt(s))
        lines.append("}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + ("\n" if chunks else "")


def render_value(v: Value) -> str:
    """String rendering used for response bodies: maps render as canonical JSON."""
    kind = value_kind(v)
    if kind == "null":
        return "null"
    if kind == "bool":
        return "true" if v else "false"
    if kind == "int":
        return str(v)
    if kind == "str":
        return v
    return json.dumps(v, sort_keys=True, separators=(",", ":"))
