"""Reporting: patch ranking, developer decisions, and the HTTP JSON API the
dashboard polls.

Ranking follows the validation statistics: Reported records first, then
Validating; within each group descending patched-line executions, then
descending executions, then ascending patch id. Invalidated, Approved and
Rejected records are listed after the active ones. Decisions are final and
append-only persisted; an approval additionally writes the patch diff to the
output directory for the developer to land.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable, Optional
from urllib.parse import urlsplit

from .envelopes import ShadowEnvelope
from .faults import FailureContext
from .messages import Request
from .metrics import Metrics
from .patch_engine import CandidatePatch
from .regression import NotReportable, PatchRecord, PatchRegistry, RecordState, UnknownPatch

log = logging.getLogger(__name__)

_ACTIVE_ORDER = {RecordState.REPORTED: 0, RecordState.VALIDATING: 1}
_TERMINAL_ORDER = {RecordState.APPROVED: 0, RecordState.REJECTED: 1, RecordState.INVALIDATED: 2}


def rank(records: list[PatchRecord]) -> list[PatchRecord]:
    """Deterministic ordering of active records (Reported first, then Validating)."""
    active = [r for r in records if r.state in _ACTIVE_ORDER]
    return sorted(
        active,
        key=lambda r: (
            _ACTIVE_ORDER[r.state],
            -r.patched_line_executions,
            -r.executions,
            r.patch_id,
        ),
    )


def ordered_records(records: list[PatchRecord]) -> list[PatchRecord]:
    """Ranked active records followed by terminal ones (Approved, Rejected, Invalidated)."""
    terminal = [r for r in records if r.state in _TERMINAL_ORDER]
    terminal.sort(key=lambda r: (_TERMINAL_ORDER[r.state], r.patch_id))
    return rank(records) + terminal


class FailureFeed:
    """Recent failure contexts plus per-failure-point counts."""

    def __init__(self, capacity: int = 200):
        self._lock = threading.Lock()
        self._recent: deque[dict[str, Any]] = deque(maxlen=capacity)
        self._counts: dict[str, int] = {}

    def record(self, request: Request, context: Optional[FailureContext]) -> None:
        if context is None:
            return
        fp = context.failure_point
        if fp is not None:
            sig = f"{fp.handler}:{fp.line}:{fp.variable}"
        else:
            sig = f"status-only:{request.method} {request.path}"
        with self._lock:
            self._counts[sig] = self._counts.get(sig, 0) + 1
            self._recent.append(
                {
                    "at": time.time(),
                    "signature": sig,
                    "method": request.method,
                    "path": request.path,
                    "context": context.to_json(),
                }
            )

    def to_json(self) -> dict[str, Any]:
        with self._lock:
            return {"recent": list(self._recent), "counts": dict(self._counts)}


class ReportingService:
    def __init__(
        self,
        registry: PatchRegistry,
        failures: Optional[FailureFeed] = None,
        metrics: Optional[Metrics] = None,
        diff_dir: Optional[str] = None,
        decisions_log: Optional[str] = None,
        reported_log: Optional[str] = None,
    ):
        self.registry = registry
        self.failures = failures or FailureFeed()
        self.metrics = metrics or Metrics()
        self.diff_dir = Path(diff_dir) if diff_dir else None
        self.decisions_log = Path(decisions_log) if decisions_log else None
        self.reported_log = Path(reported_log) if reported_log else None
        self._io_lock = threading.Lock()
        registry.on_promote = self._persist_reported

    # --- operations ------------------------------------------------------

    def ranked(self) -> list[PatchRecord]:
        return ordered_records(self.registry.all_records())

    def record_payload(self, record: PatchRecord) -> dict:
        """Record JSON plus progress toward the promotion threshold."""
        payload = record.to_json()
        payload["promotion"] = {
            "patched_line": {
                "have": record.patched_line_executions,
                "need": self.registry.promote_patched_line,
            },
            "executions": {"have": record.executions, "need": self.registry.promote_executions},
        }
        return payload

    def decide(self, patch_id: str, decision: str, actor: str) -> PatchRecord:
        record = self.registry.decide(patch_id, decision, actor)
        self._persist_decision(record)
        if decision == "Approve":
            self._write_diff(record)
        return record

    def _persist_decision(self, record: PatchRecord) -> None:
        if self.decisions_log is None:
            return
        entry = {
            "patch_id": record.patch_id,
            "decision": record.decision,
            "actor": record.decided_by,
            "at": record.decided_at,
        }
        with self._io_lock:
            self.decisions_log.parent.mkdir(parents=True, exist_ok=True)
            with self.decisions_log.open("a", encoding="utf-8") as f:
                f.write(json.dumps(entry) + "\n")

    def _persist_reported(self, record: PatchRecord) -> None:
        if self.reported_log is None:
            return
        with self._io_lock:
            self.reported_log.parent.mkdir(parents=True, exist_ok=True)
            with self.reported_log.open("a", encoding="utf-8") as f:
                f.write(json.dumps(record.to_json()) + "\n")

    def _write_diff(self, record: PatchRecord) -> Path | None:
        if self.diff_dir is None:
            return None
        self.diff_dir.mkdir(parents=True, exist_ok=True)
        path = self.diff_dir / f"patch-{record.patch_id}.diff"
        path.write_text(record.candidate.patch.diff + "\n", encoding="utf-8")
        return path


class ReportingServer:
    """HTTP surface: dashboard API, metrics, and the split-deployment intake
    endpoints (/itzal/candidates, /itzal/patch-search)."""

    def __init__(
        self,
        service: ReportingService,
        host: str = "127.0.0.1",
        port: int = 0,
        cors_origin: str = "*",
        static_dir: Optional[str] = None,
        submit_candidate: Optional[Callable[[CandidatePatch], Any]] = None,
        submit_envelope: Optional[Callable[[ShadowEnvelope], Any]] = None,
    ):
        self.service = service
        self.cors_origin = cors_origin
        self.static_dir = Path(static_dir) if static_dir else None
        self.submit_candidate = submit_candidate
        self.submit_envelope = submit_envelope
        self._httpd = ThreadingHTTPServer((host, port), _ApiHandler)
        self._httpd.daemon_threads = True
        self._httpd.reporting = self  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._thread is not None:
            self._httpd.shutdown()
            self._thread.join(timeout=5)
            self._thread = None
        self._httpd.server_close()


class _ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out as separate writes

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        log.debug("reporting: " + format, *args)

    @property
    def reporting(self) -> ReportingServer:
        return self.server.reporting  # type: ignore[attr-defined]

    def _send_json(self, status: int, payload: Any) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Access-Control-Allow-Origin", self.reporting.cors_origin)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", self.reporting.cors_origin)
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Authorization")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        path = urlsplit(self.path).path
        service = self.reporting.service
        if path == "/api/failures":
            self._send_json(200, service.failures.to_json())
            return
        if path == "/api/patches":
            self._send_json(200, [service.record_payload(r) for r in service.ranked()])
            return
        if path.startswith("/api/patches/"):
            patch_id = path.removeprefix("/api/patches/")
            record = service.registry.get(patch_id)
            if record is None:
                self._send_json(404, {"error": f"unknown patch {patch_id!r}"})
                return
            self._send_json(200, service.record_payload(record))
            return
        if path == "/api/metrics":
            self._send_json(200, service.metrics.snapshot())
            return
        if self._serve_static(path):
            return
        self._send_json(404, {"error": "not found"})

    def do_POST(self) -> None:
        path = urlsplit(self.path).path
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw.decode("utf-8")) if raw else {}
        except ValueError:
            self._send_json(400, {"error": "invalid JSON body"})
            return

        if path.startswith("/api/patches/") and path.endswith("/decision"):
            patch_id = path.removeprefix("/api/patches/").removesuffix("/decision").strip("/")
            decision = payload.get("decision")
            actor = payload.get("actor", "unknown")
            if decision not in ("Approve", "Reject"):
                self._send_json(400, {"error": "decision must be Approve or Reject"})
                return
            try:
                record = self.reporting.service.decide(patch_id, decision, actor)
            except UnknownPatch:
                self._send_json(404, {"error": f"unknown patch {patch_id!r}"})
                return
            except NotReportable as e:
                self._send_json(409, {"error": str(e)})
                return
            self._send_json(200, self.reporting.service.record_payload(record))
            return

        if path == "/itzal/candidates":
            if self.reporting.submit_candidate is None:
                self._send_json(503, {"error": "candidate intake not wired"})
                return
            try:
                candidate = CandidatePatch.from_json(payload)
            except (KeyError, ValueError, TypeError):
                self._send_json(400, {"error": "malformed candidate"})
                return
            self.reporting.submit_candidate(candidate)
            self._send_json(202, {"status": "accepted"})
            return

        if path == "/itzal/patch-search":
            if self.reporting.submit_envelope is None:
                self._send_json(503, {"error": "patch-search intake not wired"})
                return
            try:
                envelope = ShadowEnvelope.from_json(payload)
            except (KeyError, ValueError, TypeError):
                self._send_json(400, {"error": "malformed envelope"})
                return
            self.reporting.submit_envelope(envelope)
            self._send_json(202, {"status": "accepted"})
            return

        self._send_json(404, {"error": "not found"})

    def _serve_static(self, path: str) -> bool:
        root = self.reporting.static_dir
        if root is None:
            return False
        if path == "/":
            path = "/index.html"
        target = (root / path.lstrip("/")).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return False
        content_types = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".json": "application/json",
            ".map": "application/json",
        }
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True
