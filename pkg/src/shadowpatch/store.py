"""Snapshot-able in-process key-value store backing application state.

Two counters with distinct jobs: the store's write version bumps only on
mutations (the production-integrity invariant is asserted against it), while
each snapshot gets its own strictly increasing version from the registry that
retained it.
"""

from __future__ import annotations

import copy
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Optional

from .lang.ast import Value, value_kind


@dataclass(frozen=True)
class StateSnapshot:
    """Immutable deep copy of the store contents at a point in time."""

    data: dict[str, Value] = field(repr=False)
    version: int = 0

    def __len__(self) -> int:
        return len(self.data)


class KeyValueStore:
    """String-keyed Value store; every mutation bumps the write version."""

    def __init__(self, seed: Optional[dict[str, Value]] = None):
        self._lock = threading.RLock()
        self._data: dict[str, Value] = copy.deepcopy(seed) if seed else {}
        self._write_version = 0

    @property
    def write_version(self) -> int:
        return self._write_version

    def get(self, key: str) -> Optional[Value]:
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, value: Value) -> None:
        with self._lock:
            self._data[key] = value
            self._write_version += 1

    def dump(self) -> dict[str, Value]:
        with self._lock:
            return copy.deepcopy(self._data)

    def copy_data(self) -> dict[str, Value]:
        return self.dump()

    def replace_all(self, data: dict[str, Value]) -> None:
        """Restore support: overwrite contents without touching the write version
        semantics of production (callers guard against production use)."""
        with self._lock:
            self._data = copy.deepcopy(data)


class SnapshotRegistry:
    """Retains recent snapshots with strictly increasing versions."""

    def __init__(self, capacity: int = 256):
        self._lock = threading.Lock()
        self._seq = 0
        self._capacity = capacity
        self._snapshots: OrderedDict[int, StateSnapshot] = OrderedDict()

    def take(self, store: KeyValueStore) -> StateSnapshot:
        data = store.dump()
        with self._lock:
            self._seq += 1
            snap = StateSnapshot(data=data, version=self._seq)
            self._snapshots[snap.version] = snap
            while len(self._snapshots) > self._capacity:
                self._snapshots.popitem(last=False)
            return snap

    def get(self, version: int) -> Optional[StateSnapshot]:
        with self._lock:
            return self._snapshots.get(version)

    def latest(self) -> Optional[StateSnapshot]:
        with self._lock:
            if not self._snapshots:
                return None
            return next(reversed(self._snapshots.values()))


def value_from_json(obj: Any, path: str = "$") -> Value:
    """Convert parsed JSON into a handler-language Value.

    Arrays and floats have no Value counterpart and are rejected with the
    offending path named.
    """
    if obj is None or isinstance(obj, bool) or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        raise ValueError(f"{path}: floating point values are not supported")
    if isinstance(obj, list):
        raise ValueError(f"{path}: arrays are not supported")
    if isinstance(obj, dict):
        return {str(k): value_from_json(v, f"{path}.{k}") for k, v in obj.items()}
    raise ValueError(f"{path}: unsupported JSON value {obj!r}")


def seed_from_json(obj: dict[str, Any]) -> dict[str, Value]:
    if not isinstance(obj, dict):
        raise ValueError("state seed must be a JSON object")
    return {str(k): value_from_json(v, f"$.{k}") for k, v in obj.items()}


def snapshot_to_json(snap: StateSnapshot) -> dict[str, Any]:
    return {"version": snap.version, "data": snap.data}


def values_dump_equal(a: dict[str, Value], b: dict[str, Value]) -> bool:
    if a.keys() != b.keys():
        return False
    from .lang.ast import values_equal

    return all(values_equal(a[k], b[k]) for k in a)


__all__ = [
    "KeyValueStore",
    "SnapshotRegistry",
    "StateSnapshot",
    "seed_from_json",
    "value_from_json",
    "value_kind",
    "values_dump_equal",
]
