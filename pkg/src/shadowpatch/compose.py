"""Wires the composed system from one Config: app server, shadower, sandbox
pool, patch engine, regression service, reporting API, and the dispatcher
threads that drain the shadow queues."""

from __future__ import annotations

import logging
import threading

from .appserver import AppServer
from .config import Config, ConfigError
from .envelopes import ShadowEnvelope
from .lang.parser import DuplicateHandler, ParseError, parse_program
from .metrics import Metrics
from .oracle import RequestOracle, build_checks
from .patch_engine import Budget, PatchEngine, SandboxUnavailable
from .regression import PatchRegistry, RegressionService, build_rules
from .reporting import FailureFeed, ReportingServer, ReportingService
from .runtime import AppRuntime, Route, RouteTable
from .sandboxes import SandboxPool
from .shadower import BoundedQueue, Shadower
from .store import KeyValueStore, SnapshotRegistry, seed_from_json

log = logging.getLogger(__name__)


class Stack:
    """The composed system. Build, start(), drive traffic, stop()."""

    def __init__(self, config: Config):
        self.config = config
        self.metrics = Metrics()

        app_cfg = config["app"]
        handlers_path = config.resolve_path(app_cfg["handlers_path"])
        if not handlers_path.is_file():
            raise ConfigError(f"app.handlers_path: no such file: {handlers_path}")
        try:
            self.program = parse_program(handlers_path.read_text(encoding="utf-8"))
        except (ParseError, DuplicateHandler) as e:
            raise ConfigError(f"app.handlers_path: {handlers_path}: {e}") from e

        self.routes = RouteTable([Route(m, p, h) for m, p, h in app_cfg["routes"]])
        missing = self.routes.handler_names() - set(self.program.handlers)
        if missing:
            raise ConfigError(f"app.routes: unknown handlers: {sorted(missing)}")

        try:
            seed = seed_from_json(app_cfg["seed_state"])
        except ValueError as e:
            raise ConfigError(f"app.seed_state: {e}") from e
        self.store = KeyValueStore(seed)
        self.snapshots = SnapshotRegistry()
        self.production = AppRuntime(
            self.program, self.routes, self.store, self.snapshots, is_production=True
        )
        self.app_server = AppServer(self.production, app_cfg["host"], app_cfg["port"])

        self.oracle = RequestOracle(build_checks(config["oracle"]["checks"]))

        sandbox_cfg = config["sandbox"]
        self.pool = SandboxPool(
            self.routes,
            size=sandbox_cfg["pool_size"],
            lease_timeout_s=sandbox_cfg["lease_timeout_ms"] / 1000.0,
        )

        reg_cfg = config["regression"]
        self.registry = PatchRegistry(
            promote_patched_line=reg_cfg["promote_patched_line"],
            promote_executions=reg_cfg["promote_executions"],
        )
        self.regression = RegressionService(
            registry=self.registry,
            pool=self.pool,
            program=self.program,
            production_store=self.store,
            snapshots=self.snapshots,
            rules=build_rules(reg_cfg["rules"]),
            metrics=self.metrics,
        )

        patch_cfg = config["patch"]
        self.engine = PatchEngine(
            program=self.program,
            pool=self.pool,
            oracle=self.oracle,
            snapshots=self.snapshots,
            production_store=self.store,
            register_candidate=self.regression.register,
            budget=Budget(patch_cfg["budget_ms"], patch_cfg["max_patches"]),
            return_early_status=patch_cfg["return_early_status"],
            return_early_body=patch_cfg["return_early_body"],
            metrics=self.metrics,
        )
        self.requeue_limit = patch_cfg["requeue_limit"]

        sh_cfg = config["shadower"]
        self.patch_queue: BoundedQueue[ShadowEnvelope] = BoundedQueue(
            sh_cfg["queue_bound"], self.metrics, "queue.patch"
        )
        self.regression_queue: BoundedQueue[ShadowEnvelope] = BoundedQueue(
            sh_cfg["queue_bound"], self.metrics, "queue.regression"
        )
        self.failures = FailureFeed()
        # The app server socket is bound at construction, so its URL is final here.
        self.shadower = Shadower(
            upstream_url=self.app_server.url,
            oracle=self.oracle,
            patch_queue=self.patch_queue,
            regression_queue=self.regression_queue,
            metrics=self.metrics,
            host=sh_cfg["host"],
            port=sh_cfg["port"],
            duplicates_patch=sh_cfg["duplicates"]["patch"],
            duplicates_regression=sh_cfg["duplicates"]["regression"],
            on_failure=lambda request, verdict: self.failures.record(request, verdict.context),
        )

        rep_cfg = config["reporting"]
        self.reporting = ReportingService(
            registry=self.registry,
            failures=self.failures,
            metrics=self.metrics,
            diff_dir=str(config.resolve_path(rep_cfg["diff_dir"])),
            decisions_log=str(config.resolve_path(rep_cfg["decisions_log"])),
            reported_log=str(config.resolve_path(rep_cfg["reported_log"])),
        )
        static_dir = rep_cfg["static_dir"]
        self.reporting_server = ReportingServer(
            self.reporting,
            host=rep_cfg["host"],
            port=rep_cfg["port"],
            cors_origin=rep_cfg["cors_origin"],
            static_dir=str(config.resolve_path(static_dir)) if static_dir else None,
            submit_candidate=self.regression.register,
            submit_envelope=self.patch_queue.put,
        )

        self.metrics.register_gauge("queue.patch.depth", self.patch_queue.depth)
        self.metrics.register_gauge("queue.regression.depth", self.regression_queue.depth)
        self.metrics.register_gauge("sandbox.in_use", self.pool.in_use)
        self.metrics.register_gauge("sandbox.size", lambda: self.pool.size)

        self._stop = threading.Event()
        self._workers: list[threading.Thread] = []
        self._busy_lock = threading.Lock()
        self._busy = 0

    # --- lifecycle ---------------------------------------------------------

    def start(self, start_workers: bool = True) -> None:
        self.app_server.start()
        self.shadower.start()
        self.reporting_server.start()
        if start_workers:
            self.start_workers()

    def start_workers(self) -> None:
        for name, fn in (("patch-worker", self._patch_loop), ("regression-worker", self._regression_loop)):
            t = threading.Thread(target=fn, name=name, daemon=True)
            t.start()
            self._workers.append(t)

    def stop(self) -> None:
        self._stop.set()
        self.shadower.stop()
        self.app_server.stop()
        self.reporting_server.stop()
        for t in self._workers:
            t.join(timeout=5)

    @property
    def ready_message(self) -> str:
        return (
            f"ready: app={self.app_server.url} "
            f"shadower={self.shadower.url} "
            f"reporting={self.reporting_server.url}"
        )

    # --- dispatchers --------------------------------------------------------

    def _patch_loop(self) -> None:
        while not self._stop.is_set():
            envelope = self.patch_queue.get(timeout=0.2)
            if envelope is None:
                continue
            with self._busy_lock:
                self._busy += 1
            try:
                self.engine.search(envelope)
            except SandboxUnavailable:
                if envelope.attempts < self.requeue_limit:
                    envelope.attempts += 1
                    self.patch_queue.put(envelope)
                else:
                    self.metrics.incr("patch.dropped_envelopes")
            except Exception:
                log.exception("patch search failed")
                self.metrics.incr("patch.errors")
            finally:
                with self._busy_lock:
                    self._busy -= 1

    def _regression_loop(self) -> None:
        while not self._stop.is_set():
            envelope = self.regression_queue.get(timeout=0.2)
            if envelope is None:
                continue
            with self._busy_lock:
                self._busy += 1
            try:
                self.regression.check(envelope)
            except Exception:
                log.exception("regression check failed")
                self.metrics.incr("regression.errors")
            finally:
                with self._busy_lock:
                    self._busy -= 1

    def drain(self, timeout_s: float = 60.0) -> bool:
        """Wait until both shadow queues are empty and no worker is mid-task."""
        import time

        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            with self._busy_lock:
                busy = self._busy
            if busy == 0 and self.patch_queue.depth() == 0 and self.regression_queue.depth() == 0:
                return True
            time.sleep(0.02)
        return False
