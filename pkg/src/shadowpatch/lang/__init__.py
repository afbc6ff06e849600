"""Handler language: parser, renderer, and deterministic interpreter."""

from .ast import (
    AssignStmt,
    BinOp,
    BoolLit,
    Call,
    Expr,
    FieldAccess,
    Handler,
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
)
from .interpreter import DictState, ExecOutcome, State, UnknownHandler, execute_handler
from .parser import DuplicateHandler, ParseError, parse_program
from .render import render_expr, render_program, render_stmt, render_value

__all__ = [
    "AssignStmt",
    "BinOp",
    "BoolLit",
    "Call",
    "DictState",
    "DuplicateHandler",
    "ExecOutcome",
    "Expr",
    "FieldAccess",
    "Handler",
    "IfStmt",
    "IntLit",
    "LetStmt",
    "MapLit",
    "NullLit",
    "ParseError",
    "Program",
    "ReturnStmt",
    "State",
    "Stmt",
    "StrLit",
    "UnknownHandler",
    "Value",
    "Var",
    "execute_handler",
    "expr_nodes",
    "parse_program",
    "render_expr",
    "render_program",
    "render_stmt",
    "render_value",
    "value_kind",
    "values_equal",
]
