"""Request-oracle judgement: default rule, custom checks, imperfection tolerance."""

import pytest

from shadowpatch.faults import FailureContext, FailurePoint, FaultKind
from shadowpatch.lang.interpreter import ExecOutcome
from shadowpatch.messages import Request, Response
from shadowpatch.oracle import ConfigError, RequestOracle, build_checks

REQ = Request("GET", "/users", request_id="r1")


def completed(status=200, body=b"ok", version=4):
    return ExecOutcome(True, Response(status, [], body), None, (), version)


def faulted(kind=FaultKind.NULL_DEREFERENCE, version=4):
    fp = FailurePoint("h", 2, 0, "u") if kind is FaultKind.NULL_DEREFERENCE else None
    ctx = FailureContext("r1", kind, fp, version)
    return ExecOutcome(False, None, ctx, (), version)


class TestDefaultRule:
    def test_status_500_is_failure(self):
        verdict = RequestOracle().judge(REQ, Response(500, [], b""), completed(500))
        assert not verdict.success
        assert verdict.context.kind is FaultKind.STATUS_ONLY

    def test_200_completed_is_success(self):
        assert RequestOracle().judge(REQ, Response(200, [], b"ok"), completed()).success

    def test_faulted_is_failure_with_failure_point(self):
        verdict = RequestOracle().judge(REQ, Response(200, [], b"x"), faulted())
        assert not verdict.success
        assert verdict.context.failure_point == FailurePoint("h", 2, 0, "u")

    def test_4xx_is_success_by_default(self):
        assert RequestOracle().judge(REQ, Response(404, [], b"nope"), completed(404)).success

    def test_5xx_without_outcome_is_status_only_failure(self):
        verdict = RequestOracle().judge(REQ, Response(503, [], b""), None)
        assert not verdict.success and verdict.context.failure_point is None

    def test_null_dereference_context_requires_failure_point(self):
        with pytest.raises(ValueError):
            FailureContext("r", FaultKind.NULL_DEREFERENCE, None, 0)


class TestCustomChecks:
    def test_non_empty_body_check_flags_empty_200(self):
        oracle = RequestOracle(build_checks([{"name": "non-empty-body"}]))
        verdict = oracle.judge(REQ, Response(200, [], b""), completed(200, b""))
        assert not verdict.success

    def test_json_body_check(self):
        oracle = RequestOracle(build_checks([{"name": "json-body"}]))
        assert oracle.judge(REQ, Response(200, [], b'{"a": 1}'), completed()).success
        assert not oracle.judge(REQ, Response(200, [], b"<html>"), completed()).success

    def test_regex_check(self):
        oracle = RequestOracle(
            build_checks([{"name": "regex-on-body", "params": {"pattern": "^ok"}}])
        )
        assert oracle.judge(REQ, Response(200, [], b"ok fine"), completed()).success
        assert not oracle.judge(REQ, Response(200, [], b"meh"), completed()).success

    def test_max_latency_check(self):
        oracle = RequestOracle(build_checks([{"name": "max-latency-ms", "params": {"limit": 50}}]))
        assert oracle.judge(REQ, Response(200, [], b"x"), completed(), latency_ms=10).success
        assert not oracle.judge(REQ, Response(200, [], b"x"), completed(), latency_ms=80).success

    def test_crashing_check_counts_as_pass(self):
        from shadowpatch.oracle import NamedCheck

        def boom(request, response, latency_ms):
            raise RuntimeError("broken check")

        oracle = RequestOracle([NamedCheck("boom", boom)])
        assert oracle.judge(REQ, Response(200, [], b"x"), completed()).success

    def test_unknown_check_rejected_at_load(self):
        with pytest.raises(ConfigError):
            build_checks([{"name": "divination"}])

    def test_invalid_regex_rejected_at_load(self):
        with pytest.raises(ConfigError):
            build_checks([{"name": "regex-on-body", "params": {"pattern": "("}}])

    def test_monotone_detection(self):
        """Adding a check never converts a Failure into Success."""
        base = RequestOracle()
        extended = RequestOracle(build_checks([{"name": "non-empty-body"}]))
        cases = [
            (Response(500, [], b"x"), completed(500)),
            (Response(200, [], b""), completed(200, b"")),
            (Response(200, [], b"full"), completed()),
            (Response(200, [], b"y"), faulted()),
        ]
        for response, outcome in cases:
            if not base.judge(REQ, response, outcome).success:
                assert not extended.judge(REQ, response, outcome).success

    def test_always_success_oracle_never_dispatches_to_patching(self):
        """Disabling the default rule is not possible, but an oracle with no
        checks on an app that never faults yields zero failures."""
        oracle = RequestOracle()
        verdicts = [
            oracle.judge(REQ, Response(s, [], b"ok"), completed(s)) for s in (200, 201, 301, 404)
        ]
        assert all(v.success for v in verdicts)
