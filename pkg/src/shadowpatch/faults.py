"""Fault kinds and failure localization shared by the interpreter, oracle, and patch engine."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional


class FaultKind(str, Enum):
    NULL_DEREFERENCE = "NullDereference"
    TYPE_FAULT = "TypeFault"
    ARITHMETIC = "Arithmetic"
    STATUS_ONLY = "StatusOnly"


@dataclass(frozen=True)
class FailurePoint:
    """Where a runtime contract violation occurred.

    `line` is the logical statement line within the handler; `expr_index` is
    the pre-order index of the failing expression node among the statement's
    expression trees; `variable` is the source text of the expression whose
    value was Null (the variable name, for a plain variable).
    """

    handler: str
    line: int
    expr_index: int
    variable: str

    def to_json(self) -> dict[str, Any]:
        return {
            "handler": self.handler,
            "line": self.line,
            "expr_index": self.expr_index,
            "variable": self.variable,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "FailurePoint":
        return cls(d["handler"], d["line"], d["expr_index"], d["variable"])


@dataclass(frozen=True)
class FailureContext:
    """Request-oracle failure localization handed to the patch engine."""

    request_id: str
    kind: FaultKind
    failure_point: Optional[FailurePoint]
    state_version: int

    def __post_init__(self) -> None:
        if self.kind is FaultKind.NULL_DEREFERENCE and self.failure_point is None:
            raise ValueError("NullDereference failures must carry a FailurePoint")

    def to_json(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "kind": self.kind.value,
            "failure_point": self.failure_point.to_json() if self.failure_point else None,
            "state_version": self.state_version,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "FailureContext":
        fp = d.get("failure_point")
        return cls(
            request_id=d["request_id"],
            kind=FaultKind(d["kind"]),
            failure_point=FailurePoint.from_json(fp) if fp else None,
            state_version=d.get("state_version", -1),
        )
