import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderApp,
  renderDetail,
  renderFailures,
  renderPatches,
  type ViewState,
} from "../src/render.js";
import type { FailuresPayload, PatchRecord } from "../src/types.js";

function record(overrides: Partial<PatchRecord> = {}): PatchRecord {
  return {
    id: "abc123",
    state: "Validating",
    kind: "SkipStatement",
    site: { handler: "get_user", line: 2, expr_index: 0, variable: "u" },
    args: {},
    diff: "--- a/handlers\n+++ b/handlers\n+  if u != null {",
    fixes: 1,
    executions: 12,
    patched_line_executions: 4,
    triggering_request_id: "r1",
    created_at: 0,
    reported_at: null,
    mismatch: null,
    decided_by: null,
    decided_at: null,
    decision: null,
    promotion: {
      patched_line: { have: 4, need: 10 },
      executions: { have: 12, need: 50 },
    },
    ...overrides,
  };
}

function baseState(overrides: Partial<ViewState> = {}): ViewState {
  return {
    view: "patches",
    detailId: null,
    failures: null,
    patches: null,
    detail: null,
    error: null,
    notice: null,
    ...overrides,
  };
}

describe("escapeHtml", () => {
  it("escapes markup-significant characters", () => {
    expect(escapeHtml(`if a < b && "x" > 'y'`)).toBe(
      "if a &lt; b &amp;&amp; &quot;x&quot; &gt; &#39;y&#39;",
    );
  });
});

describe("renderPatches", () => {
  it("shows an empty message on a fresh system", () => {
    expect(renderPatches([])).toContain("No candidate patches yet");
  });

  it("renders rows in the order the API ranked them", () => {
    const html = renderPatches([record({ id: "first" }), record({ id: "second" })]);
    expect(html.indexOf("first")).toBeLessThan(html.indexOf("second"));
  });

  it("renders state, counts, and promotion progress", () => {
    const html = renderPatches([record()]);
    expect(html).toContain("state-validating");
    expect(html).toContain("4/10");
    expect(html).toContain("SkipStatement");
    expect(html).toContain("get_user:2");
  });

  it("escapes handler-language code in the detail view", () => {
    const html = renderDetail(
      record({ site: { handler: "h", line: 1, expr_index: 0, variable: 'db.get("k")' } }),
    );
    expect(html).toContain("db.get(&quot;k&quot;)");
  });
});

describe("renderDetail", () => {
  it("shows approve and reject only in the Reported state", () => {
    const reported = renderDetail(record({ state: "Reported" }));
    expect(reported).toContain('data-action="approve"');
    expect(reported).toContain('data-action="reject"');
    for (const state of ["Validating", "Invalidated", "Approved", "Rejected"] as const) {
      const html = renderDetail(record({ state }));
      expect(html).not.toContain('data-action="approve"');
      expect(html).toContain("only in the Reported state");
    }
  });

  it("escapes the diff", () => {
    const html = renderDetail(record({ diff: "+  if u != null { x < 4 }" }));
    expect(html).toContain("if u != null { x &lt; 4 }");
  });

  it("shows mismatch detail for invalidated records", () => {
    const html = renderDetail(
      record({
        state: "Invalidated",
        mismatch: {
          request: {},
          production_response: { status: 200, headers: [], body_b64: "" },
          patched_response: { status: 200, headers: [], body_b64: "" },
          detail: "body mismatch: production b'Ada' vs patched b'null'",
          snapshot_version: 9,
          at: 0,
        },
      }),
    );
    expect(html).toContain("Invalidating mismatch");
    expect(html).toContain("body mismatch");
    expect(html).toContain("snapshot v9");
  });

  it("shows who decided", () => {
    const html = renderDetail(record({ state: "Approved", decision: "Approve", decided_by: "dev" }));
    expect(html).toContain("Decision: <b>Approve</b> by <b>dev</b>");
  });
});

describe("renderFailures", () => {
  const payload: FailuresPayload = {
    recent: [
      {
        at: 1700000000,
        signature: "get_user:2:u",
        method: "GET",
        path: "/users",
        context: {
          request_id: "r1",
          kind: "NullDereference",
          failure_point: { handler: "get_user", line: 2, expr_index: 0, variable: "u" },
          state_version: 3,
        },
      },
    ],
    counts: { "get_user:2:u": 7 },
  };

  it("renders per-failure-point counts", () => {
    const html = renderFailures(payload);
    expect(html).toContain("get_user:2:u");
    expect(html).toContain("7");
  });

  it("renders empty tables on a fresh system", () => {
    const html = renderFailures({ recent: [], counts: {} });
    expect(html.match(/none yet/g)?.length).toBe(2);
  });
});

describe("renderApp", () => {
  it("is a pure function of the state", () => {
    const state = baseState({ patches: [record()] });
    expect(renderApp(state)).toBe(renderApp(state));
  });

  it("shows the unreachable banner over stale data", () => {
    const html = renderApp(baseState({ patches: [record()], error: "fetch failed" }));
    expect(html).toContain("API unreachable");
    expect(html).toContain("abc123"); // stale table still visible
  });

  it("shows decision conflict notices", () => {
    const html = renderApp(baseState({ notice: "Decision rejected (409): record is Validating" }));
    expect(html).toContain("Decision rejected (409)");
  });
});
