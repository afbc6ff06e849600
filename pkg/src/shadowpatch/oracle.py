"""Request oracle: per-request success/failure judgement.

Default rule: a request failed if its execution faulted or the response
status is >= 500. Domain-specific checks are named built-in predicates over
(request, response); a crashing check counts as a pass and is logged, so an
imperfect oracle can only miss failures, never break the pipeline.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .faults import FailureContext, FaultKind
from .lang.interpreter import ExecOutcome
from .messages import Request, Response

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Verdict:
    success: bool
    context: Optional[FailureContext]

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(True, None)

    @classmethod
    def failure(cls, context: FailureContext) -> "Verdict":
        return cls(False, context)

    def to_json(self) -> dict[str, Any]:
        return {"success": self.success, "context": self.context.to_json() if self.context else None}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Verdict":
        ctx = d.get("context")
        return cls(d["success"], FailureContext.from_json(ctx) if ctx else None)


class ConfigError(Exception):
    pass


# A check returns True when the request was handled acceptably.
Check = Callable[[Request, Response, Optional[float]], bool]


@dataclass(frozen=True)
class NamedCheck:
    name: str
    fn: Check


def _non_empty_body(params: dict) -> Check:
    def check(request: Request, response: Response, latency_ms: Optional[float]) -> bool:
        return len(response.body) > 0

    return check


def _json_body(params: dict) -> Check:
    def check(request: Request, response: Response, latency_ms: Optional[float]) -> bool:
        try:
            json.loads(response.body.decode("utf-8"))
            return True
        except (ValueError, UnicodeDecodeError):
            return False

    return check


def _regex_on_body(params: dict) -> Check:
    pattern = params.get("pattern")
    if not isinstance(pattern, str):
        raise ConfigError("regex-on-body requires a string 'pattern'")
    try:
        rx = re.compile(pattern)
    except re.error as e:
        raise ConfigError(f"regex-on-body: invalid pattern: {e}") from e
    must_match = bool(params.get("must_match", True))

    def check(request: Request, response: Response, latency_ms: Optional[float]) -> bool:
        text = response.body.decode("utf-8", errors="replace")
        return bool(rx.search(text)) == must_match

    return check


def _max_latency_ms(params: dict) -> Check:
    limit = params.get("limit")
    if not isinstance(limit, (int, float)) or limit <= 0:
        raise ConfigError("max-latency-ms requires a positive numeric 'limit'")

    def check(request: Request, response: Response, latency_ms: Optional[float]) -> bool:
        if latency_ms is None:
            return True
        return latency_ms <= limit

    return check


_BUILTIN_CHECKS: dict[str, Callable[[dict], Check]] = {
    "non-empty-body": _non_empty_body,
    "json-body": _json_body,
    "regex-on-body": _regex_on_body,
    "max-latency-ms": _max_latency_ms,
}


def build_checks(specs: list[dict]) -> list[NamedCheck]:
    """Instantiate configured checks; unknown names and bad params fail at load."""
    checks: list[NamedCheck] = []
    for spec in specs:
        name = spec.get("name")
        if name not in _BUILTIN_CHECKS:
            raise ConfigError(f"unknown oracle check {name!r}")
        checks.append(NamedCheck(name, _BUILTIN_CHECKS[name](spec.get("params", {}))))
    return checks


class RequestOracle:
    def __init__(self, checks: Optional[list[NamedCheck]] = None):
        self.checks = checks or []

    def judge(
        self,
        request: Request,
        response: Response,
        outcome: Optional[ExecOutcome] = None,
        latency_ms: Optional[float] = None,
    ) -> Verdict:
        if outcome is not None and outcome.faulted:
            context = outcome.context or FailureContext(
                request.request_id, FaultKind.STATUS_ONLY, None, outcome.state_version
            )
            return Verdict.failure(context)
        state_version = outcome.state_version if outcome is not None else -1
        if response.status >= 500:
            return Verdict.failure(
                FailureContext(request.request_id, FaultKind.STATUS_ONLY, None, state_version)
            )
        for check in self.checks:
            try:
                passed = check.fn(request, response, latency_ms)
            except Exception:
                log.warning("oracle check %s crashed; counting as pass", check.name, exc_info=True)
                continue
            if not passed:
                return Verdict.failure(
                    FailureContext(request.request_id, FaultKind.STATUS_ONLY, None, state_version)
                )
        return Verdict.ok()
