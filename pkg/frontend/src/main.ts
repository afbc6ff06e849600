import { createApi } from "./api.js";
import { Dashboard } from "./controller.js";

function baseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? window.location.origin;
}

function pollInterval(): number | undefined {
  const params = new URLSearchParams(window.location.search);
  const raw = params.get("poll");
  if (!raw) {
    return undefined;
  }
  const ms = Number(raw);
  return Number.isFinite(ms) && ms > 0 ? ms : undefined;
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}

const dashboard = new Dashboard({
  api: createApi(baseUrl()),
  render: (html) => {
    root.innerHTML = html;
  },
  pollIntervalMs: pollInterval(),
});

document.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement | null)?.closest<HTMLElement>("[data-action]");
  if (!target || !target.dataset.action) {
    return;
  }
  dashboard.handleAction(target.dataset.action, { ...target.dataset });
});

dashboard.start();
