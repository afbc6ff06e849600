"""Shared test rigs: the failing-handler corpus, the independent brute-force
enumeration oracle, and an in-process production+services rig."""

from shadowpatch.envelopes import TO_PATCH_SERVICE, TO_REGRESSION, ShadowEnvelope
from shadowpatch.faults import FaultKind
from shadowpatch.lang import DictState, execute_handler, parse_program
from shadowpatch.lang.ast import AssignStmt, IfStmt, LetStmt
from shadowpatch.messages import Request
from shadowpatch.oracle import RequestOracle
from shadowpatch.patch_engine import Budget, PatchEngine
from shadowpatch.regression import PatchRegistry, RegressionService
from shadowpatch.runtime import AppRuntime, Route, RouteTable
from shadowpatch.sandboxes import SandboxPool
from shadowpatch.store import KeyValueStore, SnapshotRegistry


# --- corpus of organically-faulting fixtures -----------------------------------

def fixture(src, query=(), state=None, handler_route="h"):
    return {"src": src, "query": list(query), "state": state or {}, "handler": handler_route}


CORPUS = {
    "classic_missing_id": fixture(
        'handler h { let u = db.get(param("id")); let n = u.name; return 200, n; }',
        query=[("id", "ghost")],
    ),
    "two_prior_vars": fixture(
        'handler h { let a = 1; let b = "x"; let u = db.get("k"); let n = u.name; return 200, n; }',
    ),
    "fault_on_first_line": fixture(
        'handler h { let x = db.get("missing").name; return 200, x; }',
    ),
    "nested_if": fixture(
        'handler h { let flag = true; if flag { let u = db.get("k"); let n = u.name; } return 200, "done"; }',
    ),
    "assignment_statement": fixture(
        'handler h { let n = "init"; n = db.get("k").title; return 200, n; }',
    ),
    "fault_in_return": fixture(
        'handler h { let u = db.get("k"); return 200, u.name; }',
    ),
    "fault_in_if_condition": fixture(
        'handler h { let u = db.get("k"); if u.ok { return 200, "y"; } return 200, "n"; }',
    ),
    "chained_access": fixture(
        'handler h { let u = db.get("k"); let x = u.a.b; return 200, x; }',
        state={"k": {"a": None}},
    ),
    "later_binding_excluded": fixture(
        'handler h { let u = db.get("k"); let n = u.name; let after = "z"; return 200, n; }',
    ),
    "reassignment_counts_once": fixture(
        'handler h { let a = 1; a = 2; let b = "s"; let u = db.get("k"); let n = u.name; return 200, n; }',
    ),
    "param_base": fixture(
        'handler h { let q = param("q"); let v = q.field; return 200, v; }',
    ),
    "deep_nesting": fixture(
        "handler h { let a = true; if a { let b = true; if b { let u = db.get(\"k\"); let n = u.name; } } return 200, \"end\"; }",
    ),
}


def capture_failure_point(fx):
    """Execute the fixture's failing request and capture its failure point."""
    program = parse_program(fx["src"])
    request = Request("GET", "/h", query=fx["query"], request_id="cap")
    outcome = execute_handler(program, fx["handler"], request, DictState(dict(fx["state"])))
    assert outcome.faulted, "fixture must fault"
    assert outcome.context.kind is FaultKind.NULL_DEREFERENCE
    return program, request, outcome.context.failure_point


# --- independent brute-force enumeration oracle -------------------------------
#
# Recomputes the expected (kind, args) set from scratch: its own pre-order
# flattening, its own line numbering, its own earlier-bound-variable scan.

def brute_force_expected(program, fp, re_status=200, re_body=""):
    handler = program.handlers[fp.handler]

    flat = []

    def flatten(stmts):
        for s in stmts:
            flat.append(s)
            if isinstance(s, IfStmt):
                flatten(s.body)

    flatten(handler.body)

    earlier = set()
    for ordinal, s in enumerate(flat, start=1):
        if ordinal >= fp.line:
            continue
        if isinstance(s, (LetStmt, AssignStmt)):
            earlier.add(s.name)
    earlier.discard(fp.variable)

    expected = {("SkipStatement", ())}
    for literal in ('""', "0", "false", "{}"):
        expected.add(("ReplaceWithDefault", (("default", literal),)))
    for name in earlier:
        expected.add(("ReplaceWithVariable", (("variable", name),)))
    expected.add(("ReturnEarly", (("body", re_body), ("status", re_status))))
    return expected


# --- in-process production + services rig --------------------------------------

REG_SRC = """\
handler profile {
  let p = db.get(param("id"));
  let name = p.name;
  return 200, name;
}

handler drop {
  let gone = db.put(param("id"), null);
  return 200, "dropped";
}

handler other {
  return 200, "other";
}
"""

REG_ROUTES = RouteTable(
    [
        Route("GET", "/profile", "profile"),
        Route("POST", "/drop", "drop"),
        Route("GET", "/other", "other"),
    ]
)


class Rig:
    """Production runtime + patch engine + regression service, no HTTP."""

    def __init__(self, promote_patched_line=10, promote_executions=50):
        self.program = parse_program(REG_SRC)
        self.store = KeyValueStore({"ada": {"name": "Ada"}, "bea": {"name": "Bea"}})
        self.snapshots = SnapshotRegistry()
        self.production = AppRuntime(
            self.program, REG_ROUTES, self.store, self.snapshots, is_production=True
        )
        self.pool = SandboxPool(REG_ROUTES, size=2, lease_timeout_s=1.0)
        self.oracle = RequestOracle()
        self.registry = PatchRegistry(promote_patched_line, promote_executions)
        self.service = RegressionService(
            registry=self.registry,
            pool=self.pool,
            program=self.program,
            production_store=self.store,
            snapshots=self.snapshots,
        )
        self.engine = PatchEngine(
            program=self.program,
            pool=self.pool,
            oracle=self.oracle,
            snapshots=self.snapshots,
            production_store=self.store,
            register_candidate=self.service.register,
        )

    def envelope(self, request, kind=TO_REGRESSION):
        response, outcome = self.production.handle(request)
        verdict = self.oracle.judge(request, response, outcome)
        return ShadowEnvelope(kind, request, response, verdict, outcome.state_version)

    def seed_candidates(self):
        """Organic candidates from the missing-profile failure."""
        request = Request("GET", "/profile", query=[("id", "ghost")], request_id="fail-1")
        envelope = self.envelope(request, kind=TO_PATCH_SERVICE)
        assert not envelope.verdict.success
        return self.engine.search(envelope, Budget(5000, 256))
