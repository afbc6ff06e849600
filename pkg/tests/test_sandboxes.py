"""Sandbox pool: exclusive leases, restore-on-lease freshness, containment."""

import threading
import time

import pytest

from shadowpatch.lang import parse_program
from shadowpatch.messages import Request
from shadowpatch.runtime import Route, RouteTable
from shadowpatch.sandboxes import DoubleRelease, LeaseTimeout, SandboxPool
from shadowpatch.store import KeyValueStore, SnapshotRegistry, values_dump_equal

SRC = 'handler put { let v = db.put(param("k"), "dirty"); return 200, v; }'
ROUTES = RouteTable([Route("GET", "/put", "put")])


@pytest.fixture
def setup():
    program = parse_program(SRC)
    store = KeyValueStore({"base": {"name": "x"}})
    registry = SnapshotRegistry()
    pool = SandboxPool(ROUTES, size=2, lease_timeout_s=0.2)
    return program, store, registry, pool


def test_lease_observes_snapshot(setup):
    program, store, registry, pool = setup
    snap = registry.take(store)
    sb = pool.lease(snap, program)
    assert values_dump_equal(sb.runtime.dump_state(), snap.data)
    pool.release(sb)


def test_lease_after_dirty_owner_is_fresh(setup):
    program, store, registry, pool = setup
    snap = registry.take(store)
    sb = pool.lease(snap, program)
    sb.execute(Request("GET", "/put", query=[("k", "junk")]))
    assert sb.runtime.store.get("junk") == "dirty"
    pool.release(sb)
    # Lease both sandboxes; whichever was dirty must come back clean.
    sb1 = pool.lease(snap, program)
    sb2 = pool.lease(snap, program)
    for sb in (sb1, sb2):
        assert values_dump_equal(sb.runtime.dump_state(), snap.data)
        pool.release(sb)


def test_pool_exhaustion_blocks_then_times_out(setup):
    program, store, registry, pool = setup
    snap = registry.take(store)
    a = pool.lease(snap, program)
    b = pool.lease(snap, program)
    with pytest.raises(LeaseTimeout):
        pool.lease(snap, program, timeout_s=0.05)
    pool.release(a)
    c = pool.lease(snap, program, timeout_s=0.05)
    pool.release(b)
    pool.release(c)


def test_blocked_lease_wakes_on_release(setup):
    program, store, registry, pool = setup
    snap = registry.take(store)
    a = pool.lease(snap, program)
    b = pool.lease(snap, program)
    got = []

    def waiter():
        sb = pool.lease(snap, program, timeout_s=2.0)
        got.append(sb)
        pool.release(sb)

    t = threading.Thread(target=waiter)
    t.start()
    time.sleep(0.05)
    pool.release(a)
    t.join(timeout=2)
    assert got, "waiter should have acquired a sandbox after release"
    pool.release(b)


def test_double_release(setup):
    program, store, registry, pool = setup
    snap = registry.take(store)
    sb = pool.lease(snap, program)
    pool.release(sb)
    with pytest.raises(DoubleRelease):
        pool.release(sb)


def test_sandbox_mutations_never_touch_production_store(setup):
    program, store, registry, pool = setup
    snap = registry.take(store)
    version_before = store.write_version
    sb = pool.lease(snap, program)
    sb.execute(Request("GET", "/put", query=[("k", "junk")]))
    pool.release(sb)
    assert store.write_version == version_before
    assert store.get("junk") is None
