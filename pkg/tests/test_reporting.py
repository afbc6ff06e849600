"""Ranking, decisions, persistence, and the HTTP JSON API."""

import json
import time

import pytest

from shadowpatch.faults import FailurePoint
from shadowpatch.messages import Request
from shadowpatch.patch_engine import CandidatePatch, Patch
from shadowpatch.regression import PatchRecord, PatchRegistry, RecordState
from shadowpatch.reporting import FailureFeed, ReportingServer, ReportingService, ordered_records, rank


def make_record(patch_id, state=RecordState.VALIDATING, patched=0, executions=0):
    patch = Patch(patch_id, "SkipStatement", FailurePoint("h", 2, 0, "u"), (), f"diff-{patch_id}")
    record = PatchRecord(
        candidate=CandidatePatch(patch=patch, request_id="r", created_at=time.time()),
        state=state,
        executions=executions,
        patched_line_executions=patched,
    )
    return record


class TestRank:
    def test_orders_by_patched_line_executions(self):
        p1 = make_record("p1", patched=10, executions=20)
        p2 = make_record("p2", patched=3, executions=50)
        assert rank([p2, p1]) == [p1, p2]

    def test_ties_break_by_executions_then_id(self):
        a = make_record("aaa", patched=5, executions=9)
        b = make_record("bbb", patched=5, executions=9)
        c = make_record("ccc", patched=5, executions=11)
        assert rank([b, a, c]) == [c, a, b]

    def test_reported_before_validating(self):
        reported = make_record("rep", state=RecordState.REPORTED, patched=1)
        validating = make_record("val", patched=99)
        assert rank([validating, reported]) == [reported, validating]

    def test_empty(self):
        assert rank([]) == []

    def test_determinism(self):
        records = [make_record(f"p{i}", patched=i % 3, executions=i % 5) for i in range(12)]
        first = [r.patch_id for r in rank(records)]
        for _ in range(5):
            assert [r.patch_id for r in rank(list(reversed(records)))] == first

    def test_terminal_records_listed_separately_after_actives(self):
        active = make_record("act", patched=1)
        invalid = make_record("inv", state=RecordState.INVALIDATED)
        rejected = make_record("rej", state=RecordState.REJECTED)
        approved = make_record("app", state=RecordState.APPROVED)
        out = ordered_records([invalid, active, rejected, approved])
        assert [r.patch_id for r in out] == ["act", "app", "rej", "inv"]


@pytest.fixture
def service(tmp_path):
    registry = PatchRegistry(promote_patched_line=1, promote_executions=1)
    svc = ReportingService(
        registry,
        FailureFeed(),
        diff_dir=str(tmp_path / "diffs"),
        decisions_log=str(tmp_path / "decisions.jsonl"),
        reported_log=str(tmp_path / "reported.jsonl"),
    )
    return svc, registry, tmp_path


def promote(registry, patch_id):
    registry.record_match(patch_id, patched_ran=True)


class TestDecide:
    def test_approve_writes_diff_and_log(self, service):
        svc, registry, tmp = service
        record = registry.register(make_record("abc123").candidate)
        promote(registry, "abc123")
        assert record.state is RecordState.REPORTED
        decided = svc.decide("abc123", "Approve", "dev@example")
        assert decided.state is RecordState.APPROVED
        diff_file = tmp / "diffs" / "patch-abc123.diff"
        assert diff_file.is_file() and "diff-abc123" in diff_file.read_text()
        entries = [json.loads(l) for l in (tmp / "decisions.jsonl").read_text().splitlines()]
        assert entries[0]["patch_id"] == "abc123" and entries[0]["actor"] == "dev@example"

    def test_reported_log_written_on_promotion(self, service):
        svc, registry, tmp = service
        registry.register(make_record("xyz").candidate)
        promote(registry, "xyz")
        lines = (tmp / "reported.jsonl").read_text().splitlines()
        assert json.loads(lines[0])["id"] == "xyz"

    def test_approve_validating_is_not_reportable(self, service):
        svc, registry, _ = service
        registry.register(make_record("v1").candidate)
        from shadowpatch.regression import NotReportable

        with pytest.raises(NotReportable):
            svc.decide("v1", "Approve", "dev")

    def test_reject_then_approve_forbidden(self, service):
        svc, registry, _ = service
        registry.register(make_record("r1").candidate)
        promote(registry, "r1")
        svc.decide("r1", "Reject", "dev")
        from shadowpatch.regression import NotReportable

        with pytest.raises(NotReportable):
            svc.decide("r1", "Approve", "dev")


@pytest.fixture
def api(service):
    svc, registry, tmp = service
    submitted = []
    server = ReportingServer(
        svc,
        submit_candidate=lambda c: submitted.append(("candidate", c)) or registry.register(c),
        submit_envelope=lambda e: submitted.append(("envelope", e)),
    )
    server.start()
    yield server, svc, registry, submitted
    server.stop()


def get_json(url, path):
    import http.client
    from urllib.parse import urlsplit

    split = urlsplit(url)
    conn = http.client.HTTPConnection(split.hostname, split.port, timeout=5)
    conn.request("GET", path)
    resp = conn.getresponse()
    body = resp.read()
    headers = dict(resp.getheaders())
    conn.close()
    return resp.status, json.loads(body), headers


def post_json(url, path, payload):
    import http.client
    from urllib.parse import urlsplit

    split = urlsplit(url)
    conn = http.client.HTTPConnection(split.hostname, split.port, timeout=5)
    body = json.dumps(payload).encode()
    conn.request("POST", path, body=body, headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    out = (resp.status, json.loads(resp.read()))
    conn.close()
    return out


class TestApi:
    def test_fresh_system_has_no_patches(self, api):
        server, *_ = api
        status, payload, headers = get_json(server.url, "/api/patches")
        assert status == 200 and payload == []
        assert headers.get("Access-Control-Allow-Origin") == "*"

    def test_patches_listing_and_detail(self, api):
        server, svc, registry, _ = api
        registry.register(make_record("abc").candidate)
        status, payload, _ = get_json(server.url, "/api/patches")
        assert status == 200 and payload[0]["id"] == "abc"
        assert payload[0]["state"] == "Validating"
        assert payload[0]["diff"] == "diff-abc"
        status, detail, _ = get_json(server.url, "/api/patches/abc")
        assert status == 200 and detail["id"] == "abc"

    def test_unknown_patch_404(self, api):
        server, *_ = api
        status, payload, _ = get_json(server.url, "/api/patches/nope")
        assert status == 404
        status, payload = post_json(server.url, "/api/patches/nope/decision",
                                    {"decision": "Approve", "actor": "dev"})
        assert status == 404

    def test_decision_conflict_409_on_validating(self, api):
        server, svc, registry, _ = api
        registry.register(make_record("val").candidate)
        status, payload = post_json(server.url, "/api/patches/val/decision",
                                    {"decision": "Approve", "actor": "dev"})
        assert status == 409

    def test_decision_approve_flow(self, api):
        server, svc, registry, _ = api
        registry.register(make_record("okp").candidate)
        promote(registry, "okp")
        status, payload = post_json(server.url, "/api/patches/okp/decision",
                                    {"decision": "Approve", "actor": "dev"})
        assert status == 200 and payload["state"] == "Approved"
        assert (svc.diff_dir / "patch-okp.diff").is_file()

    def test_invalid_decision_400(self, api):
        server, svc, registry, _ = api
        registry.register(make_record("q").candidate)
        status, _ = post_json(server.url, "/api/patches/q/decision", {"decision": "Maybe"})
        assert status == 400

    def test_metrics_endpoint(self, api):
        server, svc, *_ = api
        svc.metrics.incr("shadower.forwarded", 3)
        status, payload, _ = get_json(server.url, "/api/metrics")
        assert status == 200 and payload["shadower.forwarded"] == 3

    def test_failures_endpoint(self, api):
        server, svc, *_ = api
        from shadowpatch.faults import FailureContext, FaultKind

        svc.failures.record(
            Request("GET", "/users", request_id="r9"),
            FailureContext("r9", FaultKind.NULL_DEREFERENCE, FailurePoint("h", 2, 0, "u"), 1),
        )
        status, payload, _ = get_json(server.url, "/api/failures")
        assert status == 200
        assert payload["counts"] == {"h:2:u": 1}
        assert payload["recent"][0]["context"]["request_id"] == "r9"

    def test_candidate_intake_endpoint(self, api):
        server, svc, registry, submitted = api
        candidate = make_record("wire1").candidate
        status, _ = post_json(server.url, "/itzal/candidates", candidate.to_json())
        assert status == 202
        assert registry.get("wire1") is not None

    def test_patch_search_intake_endpoint(self, api):
        server, svc, registry, submitted = api
        from shadowpatch.envelopes import TO_PATCH_SERVICE, ShadowEnvelope
        from shadowpatch.messages import Response
        from shadowpatch.oracle import Verdict
        from shadowpatch.faults import FailureContext, FaultKind

        envelope = ShadowEnvelope(
            TO_PATCH_SERVICE,
            Request("GET", "/users", query=[("id", "g")], request_id="r1"),
            Response(500, [], b"internal error"),
            Verdict.failure(
                FailureContext("r1", FaultKind.NULL_DEREFERENCE, FailurePoint("h", 2, 0, "u"), 1)
            ),
            snapshot_version=1,
        )
        status, _ = post_json(server.url, "/itzal/patch-search", envelope.to_json())
        assert status == 202
        kinds = [k for k, _ in submitted]
        assert "envelope" in kinds

    def test_malformed_bodies_rejected(self, api):
        server, *_ = api
        status, _ = post_json(server.url, "/itzal/candidates", {"nope": 1})
        assert status == 400

    def test_static_dashboard_serving(self, service, tmp_path):
        svc, registry, _ = service
        static = tmp_path / "dist"
        static.mkdir()
        (static / "index.html").write_text("<html><body>dash</body></html>")
        (static / "main.js").write_text("console.log('dash');")
        server = ReportingServer(svc, static_dir=str(static))
        server.start()
        try:
            import http.client
            from urllib.parse import urlsplit

            split = urlsplit(server.url)
            conn = http.client.HTTPConnection(split.hostname, split.port, timeout=5)
            conn.request("GET", "/")
            resp = conn.getresponse()
            assert resp.status == 200 and b"dash" in resp.read()
            conn.request("GET", "/main.js")
            resp = conn.getresponse()
            assert resp.status == 200
            assert resp.getheader("Content-Type").startswith("text/javascript")
            resp.read()
            # Path traversal stays inside the static root.
            conn.request("GET", "/../secret")
            resp = conn.getresponse()
            assert resp.status == 404
            resp.read()
            conn.close()
        finally:
            server.stop()

    def test_options_preflight(self, api):
        server, *_ = api
        import http.client
        from urllib.parse import urlsplit

        split = urlsplit(server.url)
        conn = http.client.HTTPConnection(split.hostname, split.port, timeout=5)
        conn.request("OPTIONS", "/api/patches")
        resp = conn.getresponse()
        resp.read()
        assert resp.status == 204
        assert resp.getheader("Access-Control-Allow-Methods") == "GET, POST, OPTIONS"
        conn.close()
