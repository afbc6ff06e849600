"""One JSON config file for the whole composed system.

Defaults are embedded; the file overrides by deep merge. Validation errors
name the offending field path (and JSON syntax errors carry line/column from
the parser).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

DEFAULTS: dict[str, Any] = {
    "app": {
        "host": "127.0.0.1",
        "port": 0,
        "handlers_path": "handlers.hl",
        "routes": [],  # [[method, pattern, handler], ...]
        "seed_state": {},
    },
    "shadower": {
        "host": "127.0.0.1",
        "port": 0,
        "queue_bound": 1024,
        "duplicates": {"patch": 1, "regression": 1},
    },
    "oracle": {
        "checks": [],  # [{"name": ..., "params": {...}}, ...]
    },
    "patch": {
        "budget_ms": 5000,
        "max_patches": 256,
        "return_early_status": 200,
        "return_early_body": "",
        "requeue_limit": 1,
    },
    "sandbox": {
        "pool_size": 2,
        "lease_timeout_ms": 5000,
    },
    "regression": {
        "rules": [],  # [{"kind": ..., ...params}, ...]
        "promote_patched_line": 10,
        "promote_executions": 50,
    },
    "reporting": {
        "host": "127.0.0.1",
        "port": 0,
        "diff_dir": "approved-patches",
        "decisions_log": "decisions.jsonl",
        "reported_log": "reported.jsonl",
        "cors_origin": "*",
        "static_dir": None,
    },
}


class ConfigError(Exception):
    pass


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config field {here!r}")
        if isinstance(base[key], dict) and not _is_open_dict(path, key):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected an object")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _is_open_dict(path: str, key: str) -> bool:
    # Free-form objects that are not schemas: replaced wholesale, not merged.
    return (path, key) in {("app", "seed_state")}


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{field}: {message}")


@dataclass
class Config:
    raw: dict[str, Any]
    base_dir: Path

    def __getitem__(self, key: str) -> Any:
        return self.raw[key]

    def resolve_path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def validate(raw: dict[str, Any]) -> None:
    app = raw["app"]
    _require(isinstance(app["port"], int) and 0 <= app["port"] <= 65535, "app.port", "invalid port")
    _require(isinstance(app["handlers_path"], str) and app["handlers_path"], "app.handlers_path", "required")
    _require(isinstance(app["routes"], list), "app.routes", "must be a list")
    for i, route in enumerate(app["routes"]):
        _require(
            isinstance(route, list) and len(route) == 3 and all(isinstance(x, str) for x in route),
            f"app.routes[{i}]",
            "must be [method, pattern, handler]",
        )
    _require(isinstance(app["seed_state"], dict), "app.seed_state", "must be an object")

    sh = raw["shadower"]
    _require(isinstance(sh["port"], int) and 0 <= sh["port"] <= 65535, "shadower.port", "invalid port")
    _require(isinstance(sh["queue_bound"], int) and sh["queue_bound"] >= 1, "shadower.queue_bound", "must be >= 1")
    for sink in ("patch", "regression"):
        n = sh["duplicates"][sink]
        _require(isinstance(n, int) and n >= 1, f"shadower.duplicates.{sink}", "must be >= 1")

    _require(isinstance(raw["oracle"]["checks"], list), "oracle.checks", "must be a list")

    patch = raw["patch"]
    _require(
        isinstance(patch["budget_ms"], (int, float)) and patch["budget_ms"] > 0,
        "patch.budget_ms",
        "must be positive",
    )
    _require(
        isinstance(patch["max_patches"], int) and patch["max_patches"] > 0,
        "patch.max_patches",
        "must be positive",
    )
    _require(
        isinstance(patch["return_early_status"], int) and 100 <= patch["return_early_status"] <= 599,
        "patch.return_early_status",
        "must be in [100, 599]",
    )

    sb = raw["sandbox"]
    _require(isinstance(sb["pool_size"], int) and sb["pool_size"] >= 1, "sandbox.pool_size", "must be >= 1")
    _require(
        isinstance(sb["lease_timeout_ms"], (int, float)) and sb["lease_timeout_ms"] > 0,
        "sandbox.lease_timeout_ms",
        "must be positive",
    )

    reg = raw["regression"]
    _require(isinstance(reg["rules"], list), "regression.rules", "must be a list")
    for field in ("promote_patched_line", "promote_executions"):
        _require(isinstance(reg[field], int) and reg[field] >= 1, f"regression.{field}", "must be >= 1")

    rep = raw["reporting"]
    _require(isinstance(rep["port"], int) and 0 <= rep["port"] <= 65535, "reporting.port", "invalid port")

    ports = [p for p in (app["port"], sh["port"], rep["port"]) if p != 0]
    _require(len(ports) == len(set(ports)), "ports", "app, shadower and reporting ports must differ")


def from_dict(raw: dict[str, Any], base_dir: Path | str = ".") -> Config:
    merged = _merge(DEFAULTS, raw, "")
    validate(merged)
    return Config(merged, Path(base_dir))


def load(path: str | Path) -> Config:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return from_dict(raw, path.parent)
