"""Canonical HTTP message pair flowing through every component."""

from __future__ import annotations

import base64
from dataclasses import dataclass, field, replace
from typing import Any, Optional

SHADOW_HEADER = "X-Itzal-Shadow"
REQUEST_ID_HEADER = "X-Itzal-Request-Id"
OUTCOME_HEADER = "X-Itzal-Outcome"


@dataclass
class Request:
    method: str
    path: str
    query: list[tuple[str, str]] = field(default_factory=list)
    headers: list[tuple[str, str]] = field(default_factory=list)
    body: bytes = b""
    request_id: str = ""  # assigned by the shadower; shadow copies share it

    def param(self, name: str) -> Optional[str]:
        """First query parameter value, or None."""
        for k, v in self.query:
            if k == name:
                return v
        return None

    def header(self, name: str) -> Optional[str]:
        low = name.lower()
        for k, v in self.headers:
            if k.lower() == low:
                return v
        return None

    def with_headers(self, extra: list[tuple[str, str]]) -> "Request":
        return replace(self, headers=list(self.headers) + list(extra))

    def copy(self) -> "Request":
        return replace(self, query=list(self.query), headers=list(self.headers))

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "path": self.path,
            "query": [list(kv) for kv in self.query],
            "headers": [list(kv) for kv in self.headers],
            "body_b64": base64.b64encode(self.body).decode("ascii"),
            "request_id": self.request_id,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Request":
        return cls(
            method=d["method"],
            path=d["path"],
            query=[tuple(kv) for kv in d.get("query", [])],
            headers=[tuple(kv) for kv in d.get("headers", [])],
            body=base64.b64decode(d.get("body_b64", "")),
            request_id=d.get("request_id", ""),
        )


@dataclass
class Response:
    status: int
    headers: list[tuple[str, str]] = field(default_factory=list)
    body: bytes = b""

    def __post_init__(self) -> None:
        if not 100 <= self.status <= 599:
            raise ValueError(f"status {self.status} outside [100, 599]")

    def header(self, name: str) -> Optional[str]:
        low = name.lower()
        for k, v in self.headers:
            if k.lower() == low:
                return v
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "headers": [list(kv) for kv in self.headers],
            "body_b64": base64.b64encode(self.body).decode("ascii"),
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Response":
        return cls(
            status=d["status"],
            headers=[tuple(kv) for kv in d.get("headers", [])],
            body=base64.b64decode(d.get("body_b64", "")),
        )
