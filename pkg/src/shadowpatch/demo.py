"""The sample application and end-to-end demo scenario.

The app has the classic lookup bug: `GET /users?id=X` dereferences the
record returned by `db.get`, which is Null for unknown ids. Driving it with
a mixed workload makes the whole pipeline observable: the first failing
request triggers a patch search, valid traffic validates the surviving
candidates, and two of them reach the Reported state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .compose import Stack
from .config import Config, from_dict
from .regression import RecordState
from .workload import DEFAULT_VALID_IDS, HttpDriver, gen_workload

DEMO_HANDLERS = """\
// sample application: user directory over the key-value store
handler get_user {
  let u = db.get(param("id"));
  let n = u.name;
  return 200, n;
}

handler health {
  return 200, "ok";
}
"""

DEMO_ROUTES = [
    ["GET", "/users", "get_user"],
    ["GET", "/health", "health"],
]


def demo_seed_state() -> dict[str, Any]:
    return {uid: {"name": uid.capitalize()} for uid in DEFAULT_VALID_IDS}


def write_demo_files(directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    handlers = directory / "handlers.hl"
    handlers.write_text(DEMO_HANDLERS, encoding="utf-8")
    return handlers


def demo_config(
    directory: Path,
    budget_ms: float = 5000,
    promote_patched_line: int = 10,
    promote_executions: int = 50,
    queue_bound: int = 1024,
    static_dir: Optional[str] = None,
) -> Config:
    write_demo_files(directory)
    raw = {
        "app": {
            "handlers_path": "handlers.hl",
            "routes": DEMO_ROUTES,
            "seed_state": demo_seed_state(),
        },
        "shadower": {"queue_bound": queue_bound},
        "patch": {"budget_ms": budget_ms},
        "regression": {
            "promote_patched_line": promote_patched_line,
            "promote_executions": promote_executions,
        },
        "reporting": {
            "diff_dir": str(directory / "approved-patches"),
            "decisions_log": str(directory / "decisions.jsonl"),
            "reported_log": str(directory / "reported.jsonl"),
            "static_dir": static_dir,
        },
    }
    return from_dict(raw, directory)


def write_demo_config(directory: Path, **kwargs) -> Path:
    config = demo_config(directory, **kwargs)
    path = directory / "config.json"
    path.write_text(json.dumps(config.raw, indent=2), encoding="utf-8")
    return path


@dataclass
class DemoReport:
    total_requests: int
    failures_seen: int
    candidates: int
    reported_ids: list[str] = field(default_factory=list)
    invalidated_ids: list[str] = field(default_factory=list)
    elapsed_s: float = 0.0

    def summary(self) -> str:
        return (
            f"requests={self.total_requests} failures={self.failures_seen} "
            f"candidates={self.candidates} reported={len(self.reported_ids)} "
            f"invalidated={len(self.invalidated_ids)} elapsed={self.elapsed_s:.1f}s"
        )


def run_demo(
    directory: Path,
    seed: int = 7,
    n: int = 400,
    fail_fraction: float = 0.05,
    budget_ms: float = 5000,
    wait_s: float = 60.0,
    verbose: bool = False,
) -> DemoReport:
    """Run the full repair scenario and return what happened."""
    config = demo_config(directory, budget_ms=budget_ms)
    stack = Stack(config)
    stack.start()
    started = time.monotonic()
    try:
        if verbose:
            print(stack.ready_message)
        requests = gen_workload(seed, n, fail_fraction)
        driver = HttpDriver(stack.shadower.url)
        for i, request in enumerate(requests):
            driver.send(request)
            if verbose and (i + 1) % 100 == 0:
                print(f"sent {i + 1}/{n} requests")
        driver.close()
        stack.drain(timeout_s=wait_s)

        deadline = time.monotonic() + wait_s
        while time.monotonic() < deadline:
            reported = [r for r in stack.registry.all_records() if r.state is RecordState.REPORTED]
            if len(reported) >= 2:
                break
            time.sleep(0.1)

        records = stack.registry.all_records()
        report = DemoReport(
            total_requests=n,
            failures_seen=stack.metrics.get("shadower.to_patch"),
            candidates=len(records),
            reported_ids=[r.patch_id for r in records if r.state is RecordState.REPORTED],
            invalidated_ids=[r.patch_id for r in records if r.state is RecordState.INVALIDATED],
            elapsed_s=time.monotonic() - started,
        )
        return report
    finally:
        stack.stop()
