"""HTTP front for an AppRuntime.

The production application is instrumented: every response carries an
X-Itzal-Outcome header with a compact ExecOutcome summary for the shadower.
The FailureContext never appears in the body; faulted requests answer with an
opaque 500.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlsplit

from .messages import OUTCOME_HEADER, REQUEST_ID_HEADER, Request
from .runtime import AppRuntime

log = logging.getLogger(__name__)

_SKIP_RESPONSE_HEADERS = {"content-length", "connection", "transfer-encoding"}


class _AppHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True  # headers and body go out as separate writes

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        log.debug("app: " + format, *args)

    def _dispatch(self) -> None:
        split = urlsplit(self.path)
        query = parse_qsl(split.query, keep_blank_values=True)
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        request = Request(
            method=self.command,
            path=split.path,
            query=list(query),
            headers=list(self.headers.items()),
            body=body,
            request_id=self.headers.get(REQUEST_ID_HEADER, ""),
        )
        runtime: AppRuntime = self.server.runtime  # type: ignore[attr-defined]
        response, outcome = runtime.handle(request)

        self.send_response(response.status)
        sent = set()
        for k, v in response.headers:
            if k.lower() in _SKIP_RESPONSE_HEADERS:
                continue
            self.send_header(k, v)
            sent.add(k.lower())
        if "content-type" not in sent:
            self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header(OUTCOME_HEADER, json.dumps(outcome.to_json(), ensure_ascii=True))
        self.send_header("Content-Length", str(len(response.body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(response.body)

    do_GET = _dispatch
    do_POST = _dispatch
    do_PUT = _dispatch
    do_DELETE = _dispatch
    do_HEAD = _dispatch


class AppServer:
    """Threaded HTTP server bound to an AppRuntime."""

    def __init__(self, runtime: AppRuntime, host: str = "127.0.0.1", port: int = 0):
        self.runtime = runtime
        self._httpd = ThreadingHTTPServer((host, port), _AppHandler)
        self._httpd.daemon_threads = True
        self._httpd.runtime = runtime  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

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
