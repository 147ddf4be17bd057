// Wire types mirroring the detection service's JSON schemas field-for-field.

export interface StreamRecord {
  t: number;
  filtering_loss: number;
  log_belief: number;
  zeta: number;
  tau: number;
  y_hat: 1 | -1;
  queried: boolean;
  feedback: 1 | -1 | null;
  z?: number[];
  h?: number[];
  true_loss?: number;
  y_true?: 1 | -1;
}

export interface StateResponse {
  head: number;
  mode: string;
  running: boolean;
  records: StreamRecord[];
}

export interface PendingQuery {
  id: string;
  t: number;
  z_summary: { dim: number; norm: number };
  log_belief: number;
  zeta: number;
  tau: number;
  y_hat: 1 | -1;
  created_at: number;
  deadline: number;
}

export interface QueriesResponse {
  mode: string;
  queries: PendingQuery[];
}

export interface FeedbackAck {
  applied: boolean;
  tau?: number;
  error?: string;
}

export type Verdict = "anomalous" | "nominal";

export function verdictLabel(v: Verdict): 1 | -1 {
  return v === "anomalous" ? 1 : -1;
}
