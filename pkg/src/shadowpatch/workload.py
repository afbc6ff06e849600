"""Deterministic workload generator and a small HTTP driver for demos and
acceptance runs."""

from __future__ import annotations

import http.client
import random
import time
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlencode, urlsplit

from .messages import Request, Response

DEFAULT_VALID_IDS = [
    "ada", "bea", "cyd", "dev", "eli", "fay", "gus", "hal", "ivy", "jun",
]


def gen_workload(
    seed: int,
    n: int,
    fail_fraction: float,
    valid_ids: Optional[list[str]] = None,
    path: str = "/users",
) -> list[Request]:
    """n GET requests; ~fail_fraction of them target a missing id.

    Byte-identical across runs for a fixed (seed, n, fail_fraction).
    """
    if not 0.0 <= fail_fraction <= 1.0:
        raise ValueError("fail_fraction must be within [0, 1]")
    ids = valid_ids if valid_ids is not None else DEFAULT_VALID_IDS
    rng = random.Random(seed)
    requests = []
    for _ in range(n):
        if rng.random() < fail_fraction:
            target = f"ghost-{rng.randrange(1_000_000)}"
        else:
            target = rng.choice(ids)
        requests.append(Request("GET", path, query=[("id", target)]))
    return requests


def is_failing(request: Request, valid_ids: Optional[list[str]] = None) -> bool:
    ids = valid_ids if valid_ids is not None else DEFAULT_VALID_IDS
    return request.param("id") not in ids


@dataclass
class SendResult:
    request: Request
    response: Response
    elapsed_ms: float


class HttpDriver:
    """Sends Requests to a base URL over one keep-alive connection."""

    def __init__(self, base_url: str, timeout_s: float = 10.0):
        split = urlsplit(base_url)
        self.host = split.hostname or "127.0.0.1"
        self.port = split.port or 80
        self.timeout_s = timeout_s
        self._conn: Optional[http.client.HTTPConnection] = None

    def _connection(self) -> http.client.HTTPConnection:
        if self._conn is None:
            self._conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout_s)
        return self._conn

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def send(self, request: Request) -> SendResult:
        target = request.path
        if request.query:
            target += "?" + urlencode(request.query)
        headers = {k: v for k, v in request.headers}
        headers.setdefault("Content-Length", str(len(request.body)))
        started = time.monotonic()
        try:
            conn = self._connection()
            conn.request(request.method, target, body=request.body, headers=headers)
            raw = conn.getresponse()
            body = raw.read()
            response = Response(raw.status, list(raw.getheaders()), body)
        except (OSError, http.client.HTTPException):
            self.close()
            raise
        elapsed_ms = (time.monotonic() - started) * 1000.0
        return SendResult(request, response, elapsed_ms)

    def send_all(self, requests: list[Request]) -> list[SendResult]:
        return [self.send(r) for r in requests]


def percentile(samples: list[float], q: float) -> float:
    """Nearest-rank percentile; q in [0, 1]."""
    if not samples:
        raise ValueError("no samples")
    ordered = sorted(samples)
    idx = min(len(ordered) - 1, max(0, int(q * len(ordered) + 0.5) - 1))
    return ordered[idx]
