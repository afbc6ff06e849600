/** Pure rendering: the whole UI is a function of the last successful API
 * payload plus transient banner state. No DOM access here. */

import type { FailuresPayload, PatchRecord, ProgressPair } from "./types.js";

export interface ViewState {
  view: "failures" | "patches" | "detail";
  detailId: string | null;
  failures: FailuresPayload | null;
  patches: PatchRecord[] | null;
  detail: PatchRecord | null;
  error: string | null; // API unreachable banner
  notice: string | null; // e.g. decision conflict message
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function stateBadge(state: string): string {
  return `<span class="state state-${state.toLowerCase()}">${escapeHtml(state)}</span>`;
}

function progressCell(progress: ProgressPair | undefined, label: string): string {
  if (!progress) {
    return "<td>—</td>";
  }
  const pct = progress.need <= 0 ? 100 : Math.min(100, Math.round((100 * progress.have) / progress.need));
  return (
    `<td><div class="progress" title="${label}: ${progress.have}/${progress.need}">` +
    `<div class="bar" style="width:${pct}%"></div>` +
    `<span>${progress.have}/${progress.need}</span></div></td>`
  );
}

export function renderBanner(state: ViewState): string {
  const parts: string[] = [];
  if (state.error) {
    parts.push(
      `<div class="banner banner-error">API unreachable: ${escapeHtml(state.error)} — retrying…</div>`,
    );
  }
  if (state.notice) {
    parts.push(`<div class="banner banner-notice">${escapeHtml(state.notice)}</div>`);
  }
  return parts.join("");
}

export function renderNav(state: ViewState): string {
  const tab = (view: string, label: string) =>
    `<button data-action="view" data-view="${view}" class="${state.view === view ? "active" : ""}">${label}</button>`;
  return `<nav>${tab("failures", "Failures")}${tab("patches", "Patches")}</nav>`;
}

export function renderFailures(payload: FailuresPayload | null): string {
  if (!payload) {
    return "<p class=muted>Loading failures…</p>";
  }
  const counts = Object.entries(payload.counts).sort((a, b) => b[1] - a[1]);
  const countRows = counts
    .map(
      ([sig, n]) =>
        `<tr><td><code>${escapeHtml(sig)}</code></td><td class=num>${n}</td></tr>`,
    )
    .join("");
  const recent = [...payload.recent].reverse().slice(0, 25);
  const recentRows = recent
    .map(
      (f) =>
        `<tr><td>${escapeHtml(new Date(f.at * 1000).toISOString())}</td>` +
        `<td>${escapeHtml(f.method)} ${escapeHtml(f.path)}</td>` +
        `<td>${escapeHtml(f.context.kind)}</td>` +
        `<td><code>${escapeHtml(f.signature)}</code></td></tr>`,
    )
    .join("");
  return `
    <section>
      <h2>Failures by failure point</h2>
      <table><thead><tr><th>failure point</th><th>count</th></tr></thead>
      <tbody>${countRows || '<tr><td colspan=2 class=muted>none yet</td></tr>'}</tbody></table>
      <h2>Recent failures</h2>
      <table><thead><tr><th>at</th><th>request</th><th>kind</th><th>signature</th></tr></thead>
      <tbody>${recentRows || '<tr><td colspan=4 class=muted>none yet</td></tr>'}</tbody></table>
    </section>`;
}

export function renderPatches(records: PatchRecord[] | null): string {
  if (!records) {
    return "<p class=muted>Loading patches…</p>";
  }
  if (records.length === 0) {
    return "<p class=muted>No candidate patches yet.</p>";
  }
  const rows = records
    .map(
      (r) =>
        `<tr data-action="detail" data-id="${escapeHtml(r.id)}">` +
        `<td><code>${escapeHtml(r.id)}</code></td>` +
        `<td>${stateBadge(r.state)}</td>` +
        `<td>${escapeHtml(r.kind)}</td>` +
        `<td><code>${escapeHtml(r.site.handler)}:${r.site.line}</code></td>` +
        `<td class=num>${r.fixes}</td>` +
        `<td class=num>${r.executions}</td>` +
        progressCell(r.promotion?.patched_line, "patched-line executions") +
        `</tr>`,
    )
    .join("");
  return `
    <section>
      <h2>Candidate patches</h2>
      <table><thead><tr>
        <th>id</th><th>state</th><th>template</th><th>site</th>
        <th>fixes</th><th>executions</th><th>patched-line progress</th>
      </tr></thead><tbody>${rows}</tbody></table>
    </section>`;
}

export function renderDetail(record: PatchRecord | null): string {
  if (!record) {
    return "<p class=muted>Loading patch…</p>";
  }
  const reportable = record.state === "Reported";
  const buttons = reportable
    ? `<button data-action="approve" data-id="${escapeHtml(record.id)}" class="approve">Approve</button>
       <button data-action="reject" data-id="${escapeHtml(record.id)}" class="reject">Reject</button>`
    : `<p class=muted>Decisions are available only in the Reported state.</p>`;
  const mismatch = record.mismatch
    ? `<h3>Invalidating mismatch</h3>
       <p><code>${escapeHtml(record.mismatch.detail)}</code></p>
       <p class=muted>production ${record.mismatch.production_response.status}
          vs patched ${record.mismatch.patched_response.status},
          snapshot v${record.mismatch.snapshot_version}</p>`
    : "";
  const decided = record.decision
    ? `<p>Decision: <b>${escapeHtml(record.decision)}</b> by <b>${escapeHtml(record.decided_by ?? "?")}</b></p>`
    : "";
  return `
    <section>
      <p><button data-action="view" data-view="patches">&larr; back to patches</button></p>
      <h2><code>${escapeHtml(record.id)}</code> ${stateBadge(record.state)}</h2>
      <p>${escapeHtml(record.kind)} at <code>${escapeHtml(record.site.handler)}:${record.site.line}</code>
         on <code>${escapeHtml(record.site.variable)}</code>;
         fixed ${record.fixes} failure(s), replayed ${record.executions} time(s),
         patched line ran ${record.patched_line_executions} time(s).</p>
      <pre class="diff">${escapeHtml(record.diff)}</pre>
      ${mismatch}
      ${decided}
      <div class="actions">${buttons}</div>
    </section>`;
}

export function renderApp(state: ViewState): string {
  let body: string;
  if (state.view === "failures") {
    body = renderFailures(state.failures);
  } else if (state.view === "patches") {
    body = renderPatches(state.patches);
  } else {
    body = renderDetail(state.detail);
  }
  return `${renderBanner(state)}${renderNav(state)}<main>${body}</main>`;
}
