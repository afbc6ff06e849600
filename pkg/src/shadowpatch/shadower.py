"""Traffic-duplicating reverse proxy.

Terminates client connections, forwards to the production application, and
returns the production response untouched (status and body byte-identical;
internal X-Itzal-* headers stripped). Shadow work — oracle judgement already
done — is only ever an O(1) enqueue onto bounded drop-oldest queues consumed
by dispatcher threads, so client latency never depends on patch-search or
regression backlog.
"""

from __future__ import annotations

import http.client
import json
import logging
import threading
import time
import uuid
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Generic, Optional, TypeVar
from urllib.parse import parse_qsl, urlencode, urlsplit

from .envelopes import TO_PATCH_SERVICE, TO_REGRESSION, ShadowEnvelope
from .lang.interpreter import ExecOutcome
from .messages import OUTCOME_HEADER, REQUEST_ID_HEADER, SHADOW_HEADER, Request, Response
from .metrics import Metrics
from .oracle import RequestOracle, Verdict

log = logging.getLogger(__name__)

T = TypeVar("T")

_HOP_BY_HOP = {
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailers",
    "transfer-encoding",
    "upgrade",
}


class BoundedQueue(Generic[T]):
    """Bounded FIFO with drop-oldest overflow; enqueue never blocks."""

    def __init__(self, bound: int, metrics: Optional[Metrics] = None, name: str = "queue"):
        if bound < 1:
            raise ValueError("queue bound must be >= 1")
        self.bound = bound
        self.name = name
        self.metrics = metrics or Metrics()
        self._items: deque[T] = deque()
        self._cond = threading.Condition()

    def put(self, item: T) -> None:
        with self._cond:
            if len(self._items) >= self.bound:
                self._items.popleft()
                self.metrics.incr(f"{self.name}.drops")
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout: Optional[float] = None) -> Optional[T]:
        with self._cond:
            if not self._items and not self._cond.wait_for(lambda: bool(self._items), timeout=timeout):
                return None
            return self._items.popleft()

    def depth(self) -> int:
        with self._cond:
            return len(self._items)


def duplicate(request: Request, n: int) -> list[Request]:
    """n structurally identical shadow copies, marked and sharing the request id."""
    if n < 1:
        raise ValueError("duplicate count must be >= 1")
    copies = []
    for _ in range(n):
        c = request.copy()
        headers = [(k, v) for k, v in c.headers if k.lower() != SHADOW_HEADER.lower()]
        headers.append((SHADOW_HEADER, "1"))
        if c.request_id and c.header(REQUEST_ID_HEADER) is None:
            headers.append((REQUEST_ID_HEADER, c.request_id))
        c.headers = headers
        copies.append(c)
    return copies


class _Upstream:
    """Thin HTTP client for the production application, one connection per call."""

    def __init__(self, base_url: str, timeout_s: float = 10.0):
        split = urlsplit(base_url)
        self.host = split.hostname or "127.0.0.1"
        self.port = split.port or 80
        self.timeout_s = timeout_s

    def send(self, request: Request) -> Response:
        conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout_s)
        try:
            target = request.path
            if request.query:
                target += "?" + urlencode(request.query)
            skip = _HOP_BY_HOP | {"host", "content-length"}
            headers = {k: v for k, v in request.headers if k.lower() not in skip}
            headers["Content-Length"] = str(len(request.body))
            conn.request(request.method, target, body=request.body, headers=headers)
            raw = conn.getresponse()
            body = raw.read()
            return Response(raw.status, list(raw.getheaders()), body)
        finally:
            conn.close()


class Shadower:
    """Algorithm: forward, reply, judge, and fan shadow copies out to the services."""

    def __init__(
        self,
        upstream_url: str,
        oracle: RequestOracle,
        patch_queue: BoundedQueue[ShadowEnvelope],
        regression_queue: BoundedQueue[ShadowEnvelope],
        metrics: Optional[Metrics] = None,
        host: str = "127.0.0.1",
        port: int = 0,
        duplicates_patch: int = 1,
        duplicates_regression: int = 1,
        on_failure: Optional[Callable[[Request, Verdict], None]] = None,
    ):
        self.upstream = _Upstream(upstream_url)
        self.oracle = oracle
        self.patch_queue = patch_queue
        self.regression_queue = regression_queue
        self.metrics = metrics or Metrics()
        self.duplicates_patch = duplicates_patch
        self.duplicates_regression = duplicates_regression
        self.on_failure = on_failure
        self._httpd = ThreadingHTTPServer((host, port), _ProxyHandler)
        self._httpd.daemon_threads = True
        self._httpd.shadower = self  # type: ignore[attr-defined]
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

    # --- core per-request path ---------------------------------------------

    def on_request(self, request: Request) -> tuple[Response, Optional[Callable[[], None]]]:
        """Forward and return (client response, deferred shadow dispatch).

        The dispatch closure is run by the HTTP handler after the response
        bytes are flushed to the client.
        """
        if request.header(SHADOW_HEADER) is not None:
            # Loop safety: never re-shadow marked traffic.
            self.metrics.incr("shadower.loop_suppressed")
            try:
                upstream_response = self.upstream.send(request)
            except (OSError, http.client.HTTPException):
                return Response(502, [], b"bad gateway"), None
            return self._client_response(upstream_response, request.request_id), None

        request.request_id = request.request_id or uuid.uuid4().hex
        forwarded = request.copy()
        forwarded.headers = [
            (k, v) for k, v in forwarded.headers if k.lower() != REQUEST_ID_HEADER.lower()
        ]
        forwarded.headers.append((REQUEST_ID_HEADER, request.request_id))

        started = time.monotonic()
        try:
            upstream_response = self.upstream.send(forwarded)
        except (OSError, http.client.HTTPException):
            self.metrics.incr("shadower.upstream_errors")
            return Response(502, [], b"bad gateway"), None
        latency_ms = (time.monotonic() - started) * 1000.0
        self.metrics.incr("shadower.forwarded")

        outcome = self._parse_outcome(upstream_response)
        client_response = self._client_response(upstream_response, request.request_id)

        def dispatch() -> None:
            self._dispatch(request, client_response, outcome, latency_ms)

        return client_response, dispatch

    def _parse_outcome(self, response: Response) -> Optional[ExecOutcome]:
        raw = response.header(OUTCOME_HEADER)
        if raw is None:
            return None
        try:
            return ExecOutcome.from_json(json.loads(raw))
        except (ValueError, KeyError):
            log.warning("unparseable outcome header: %r", raw)
            return None

    def _client_response(self, upstream: Response, request_id: str) -> Response:
        headers = [
            (k, v)
            for k, v in upstream.headers
            if k.lower() not in _HOP_BY_HOP and not k.lower().startswith("x-itzal-")
        ]
        if request_id:
            headers.append((REQUEST_ID_HEADER, request_id))
        return Response(upstream.status, headers, upstream.body)

    def _dispatch(
        self,
        request: Request,
        response: Response,
        outcome: Optional[ExecOutcome],
        latency_ms: float,
    ) -> None:
        verdict = self.oracle.judge(request, response, outcome, latency_ms)
        snapshot_version = outcome.state_version if outcome else -1
        if verdict.success:
            for copy_ in duplicate(request, self.duplicates_regression):
                self.regression_queue.put(
                    ShadowEnvelope(TO_REGRESSION, copy_, response, verdict, snapshot_version)
                )
            self.metrics.incr("shadower.to_regression")
        else:
            if self.on_failure is not None:
                try:
                    self.on_failure(request, verdict)
                except Exception:
                    log.warning("failure hook crashed", exc_info=True)
            for copy_ in duplicate(request, self.duplicates_patch):
                self.patch_queue.put(
                    ShadowEnvelope(TO_PATCH_SERVICE, copy_, response, verdict, snapshot_version)
                )
            self.metrics.incr("shadower.to_patch")


class _ProxyHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out as separate writes

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        log.debug("shadower: " + format, *args)

    def _proxy(self) -> None:
        shadower: Shadower = self.server.shadower  # type: ignore[attr-defined]
        split = urlsplit(self.path)
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        request = Request(
            method=self.command,
            path=split.path,
            query=list(parse_qsl(split.query, keep_blank_values=True)),
            headers=list(self.headers.items()),
            body=body,
            request_id=self.headers.get(REQUEST_ID_HEADER, ""),
        )
        response, dispatch = shadower.on_request(request)

        self.send_response(response.status)
        sent = set()
        for k, v in response.headers:
            if k.lower() in {"content-length", "date", "server"}:
                continue
            self.send_header(k, v)
            sent.add(k.lower())
        self.send_header("Content-Length", str(len(response.body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(response.body)
        self.wfile.flush()
        # Client is answered; shadow work happens strictly afterwards.
        if dispatch is not None:
            dispatch()

    do_GET = _proxy
    do_POST = _proxy
    do_PUT = _proxy
    do_DELETE = _proxy
    do_HEAD = _proxy
