/** Payload shapes served by the reporting API. */

export type RecordState =
  | "Validating"
  | "Invalidated"
  | "Reported"
  | "Approved"
  | "Rejected";

export interface FailurePoint {
  handler: string;
  line: number;
  expr_index: number;
  variable: string;
}

export interface MismatchTriple {
  request: unknown;
  production_response: WireResponse;
  patched_response: WireResponse;
  detail: string;
  snapshot_version: number;
  at: number;
}

export interface WireResponse {
  status: number;
  headers: [string, string][];
  body_b64: string;
}

export interface ProgressPair {
  have: number;
  need: number;
}

export interface PatchRecord {
  id: string;
  state: RecordState;
  kind: string;
  site: FailurePoint;
  args: Record<string, unknown>;
  diff: string;
  fixes: number;
  executions: number;
  patched_line_executions: number;
  triggering_request_id: string;
  created_at: number;
  reported_at: number | null;
  mismatch: MismatchTriple | null;
  decided_by: string | null;
  decided_at: number | null;
  decision: string | null;
  promotion?: {
    patched_line: ProgressPair;
    executions: ProgressPair;
  };
}

export interface FailureEntry {
  at: number;
  signature: string;
  method: string;
  path: string;
  context: {
    request_id: string;
    kind: string;
    failure_point: FailurePoint | null;
    state_version: number;
  };
}

export interface FailuresPayload {
  recent: FailureEntry[];
  counts: Record<string, number>;
}

export type Decision = "Approve" | "Reject";
