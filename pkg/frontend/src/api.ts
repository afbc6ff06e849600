/** Typed client for the reporting API. The dashboard is read-only except for
 * the decision endpoint. */

import type { Decision, FailuresPayload, PatchRecord } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ApiClient {
  failures(): Promise<FailuresPayload>;
  patches(): Promise<PatchRecord[]>;
  patch(id: string): Promise<PatchRecord>;
  decide(id: string, decision: Decision, actor: string): Promise<PatchRecord>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function asJson<T>(response: Response): Promise<T> {
  let payload: unknown = null;
  try {
    payload = await response.json();
  } catch {
    // non-JSON error body; fall through with the status alone
  }
  if (!response.ok) {
    const detail =
      payload && typeof payload === "object" && "error" in payload
        ? String((payload as { error: unknown }).error)
        : `HTTP ${response.status}`;
    throw new ApiError(response.status, detail);
  }
  return payload as T;
}

export function createApi(baseUrl: string, fetchFn?: FetchLike): ApiClient {
  const base = baseUrl.replace(/\/+$/, "");
  const doFetch: FetchLike = fetchFn ?? ((input, init) => fetch(input, init));
  return {
    failures: () => doFetch(`${base}/api/failures`).then((r) => asJson<FailuresPayload>(r)),
    patches: () => doFetch(`${base}/api/patches`).then((r) => asJson<PatchRecord[]>(r)),
    patch: (id) =>
      doFetch(`${base}/api/patches/${encodeURIComponent(id)}`).then((r) =>
        asJson<PatchRecord>(r),
      ),
    decide: (id, decision, actor) =>
      doFetch(`${base}/api/patches/${encodeURIComponent(id)}/decision`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ decision, actor }),
      }).then((r) => asJson<PatchRecord>(r)),
  };
}
