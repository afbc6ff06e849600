/** Poll loop and interaction glue. Holds the last successful payloads so an
 * unreachable API degrades to a banner over stale data, never a blank page. */

import { ApiError, type ApiClient } from "./api.js";
import { renderApp, type ViewState } from "./render.js";
import type { Decision } from "./types.js";

export interface DashboardOptions {
  api: ApiClient;
  render: (html: string) => void;
  pollIntervalMs?: number;
  actor?: string;
  schedule?: (fn: () => void, ms: number) => unknown;
  cancel?: (handle: unknown) => void;
}

export const DEFAULT_POLL_INTERVAL_MS = 2000;

export class Dashboard {
  readonly state: ViewState = {
    view: "patches",
    detailId: null,
    failures: null,
    patches: null,
    detail: null,
    error: null,
    notice: null,
  };

  private readonly api: ApiClient;
  private readonly renderSink: (html: string) => void;
  private readonly pollIntervalMs: number;
  private readonly actor: string;
  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private readonly cancel: (handle: unknown) => void;
  private timer: unknown = null;
  private polling = false;

  constructor(options: DashboardOptions) {
    this.api = options.api;
    this.renderSink = options.render;
    this.pollIntervalMs = options.pollIntervalMs ?? DEFAULT_POLL_INTERVAL_MS;
    this.actor = options.actor ?? "dashboard";
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = options.cancel ?? ((handle) => clearTimeout(handle as number));
  }

  start(): void {
    void this.poll();
  }

  stop(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
  }

  /** One poll of whatever the current view needs, then re-render and re-arm. */
  async poll(): Promise<void> {
    if (this.polling) {
      return; // at most one in-flight poll
    }
    this.polling = true;
    try {
      if (this.state.view === "failures") {
        this.state.failures = await this.api.failures();
      } else if (this.state.view === "patches") {
        this.state.patches = await this.api.patches();
      } else if (this.state.detailId) {
        this.state.detail = await this.api.patch(this.state.detailId);
      }
      this.state.error = null;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.polling = false;
    }
    this.render();
    this.timer = this.schedule(() => void this.poll(), this.pollIntervalMs);
  }

  render(): void {
    this.renderSink(renderApp(this.state));
  }

  show(view: "failures" | "patches"): void {
    this.state.view = view;
    this.state.detailId = null;
    this.state.detail = null;
    this.state.notice = null;
    this.restartPolling();
  }

  showDetail(id: string): void {
    this.state.view = "detail";
    this.state.detailId = id;
    this.state.detail = this.state.patches?.find((r) => r.id === id) ?? null;
    this.state.notice = null;
    this.restartPolling();
  }

  async decide(id: string, decision: Decision): Promise<void> {
    try {
      const record = await this.api.decide(id, decision, this.actor);
      this.state.notice = `${decision} recorded for ${id}`;
      if (this.state.view === "detail" && this.state.detailId === id) {
        this.state.detail = record;
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Decision conflict: someone got there first or the state moved on.
        this.state.notice = `Decision rejected (409): ${err.message}`;
      } else if (err instanceof ApiError && err.status === 404) {
        this.state.notice = `Unknown patch ${id}`;
      } else {
        this.state.error = err instanceof Error ? err.message : String(err);
      }
    }
    this.render();
    this.restartPolling();
  }

  /** Entry point for DOM event delegation. */
  handleAction(action: string, dataset: Record<string, string | undefined>): void {
    if (action === "view" && (dataset.view === "failures" || dataset.view === "patches")) {
      this.show(dataset.view);
    } else if (action === "detail" && dataset.id) {
      this.showDetail(dataset.id);
    } else if (action === "approve" && dataset.id) {
      void this.decide(dataset.id, "Approve");
    } else if (action === "reject" && dataset.id) {
      void this.decide(dataset.id, "Reject");
    }
  }

  private restartPolling(): void {
    this.stop();
    this.render();
    void this.poll();
  }
}
