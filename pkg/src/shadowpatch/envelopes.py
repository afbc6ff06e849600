"""Shadow envelopes: the unit of work flowing from the shadower to the
patch and regression services."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .messages import Request, Response
from .oracle import Verdict

TO_PATCH_SERVICE = "ToPatchService"
TO_REGRESSION = "ToRegression"


@dataclass
class ShadowEnvelope:
    kind: str  # TO_PATCH_SERVICE | TO_REGRESSION
    request: Request
    response: Optional[Response]
    verdict: Verdict
    snapshot_version: int = -1
    attempts: int = field(default=0, compare=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "request": self.request.to_json(),
            "response": self.response.to_json() if self.response else None,
            "verdict": self.verdict.to_json(),
            "snapshot_version": self.snapshot_version,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ShadowEnvelope":
        resp = d.get("response")
        return cls(
            kind=d["kind"],
            request=Request.from_json(d["request"]),
            response=Response.from_json(resp) if resp else None,
            verdict=Verdict.from_json(d["verdict"]),
            snapshot_version=d.get("snapshot_version", -1),
        )
