// Console view state: a ring buffer of records keyed by timestep, the
// pending-query list, connection status, and the submitted-feedback log.
//
// The store never fabricates data: records enter exactly as the server
// sent them (same parsed JSON values) and are deduplicated by timestep, so
// reconnects and overlapping polls cannot duplicate or mutate points.

import type { PendingQuery, StreamRecord } from "./types.js";

export interface FeedbackLogEntry {
  key: string; // query id or "t<ts>"
  t: number;
  y: 1 | -1;
  applied: boolean;
  tau?: number;
  error?: string;
}

export class ConsoleStore {
  private records = new Map<number, StreamRecord>();
  private order: number[] = [];
  pending: PendingQuery[] = [];
  feedbackLog: FeedbackLogEntry[] = [];
  connected = false;
  head = 0;
  mode = "unknown";
  running = false;

  constructor(readonly capacity: number = 2000) {
    if (capacity < 1) throw new Error("capacity must be positive");
  }

  /** Highest timestep seen; the next poll asks for records after it. */
  get since(): number {
    return this.order.length ? this.order[this.order.length - 1]! : 0;
  }

  get size(): number {
    return this.order.length;
  }

  /** Records in timestep order (the ring keeps the newest `capacity`). */
  all(): StreamRecord[] {
    return this.order.map((t) => this.records.get(t)!);
  }

  get(t: number): StreamRecord | undefined {
    return this.records.get(t);
  }

  ingestState(state: {
    head: number;
    mode: string;
    running: boolean;
    records: StreamRecord[];
  }): number {
    this.connected = true;
    this.head = state.head;
    this.mode = state.mode;
    this.running = state.running;
    let added = 0;
    for (const rec of state.records) {
      if (this.records.has(rec.t)) continue; // emitted records never mutate
      this.records.set(rec.t, rec);
      this.order.push(rec.t);
      added += 1;
    }
    this.order.sort((a, b) => a - b);
    while (this.order.length > this.capacity) {
      const evicted = this.order.shift()!;
      this.records.delete(evicted);
    }
    return added;
  }

  ingestQueries(queries: PendingQuery[]): void {
    // answered/expired queries drop out server-side; mirror that here but
    // keep anything we already answered out of the list regardless
    const answered = new Set(
      this.feedbackLog.filter((f) => f.applied).map((f) => f.key),
    );
    this.pending = queries.filter((q) => !answered.has(q.id));
  }

  markDisconnected(): void {
    this.connected = false;
  }

  recordFeedback(entry: FeedbackLogEntry): void {
    this.feedbackLog.push(entry);
    if (entry.applied) {
      this.pending = this.pending.filter((q) => q.id !== entry.key);
    }
  }

  /** True when a submission for this key was already applied (guards the
   * double-click path before the server round-trip). */
  alreadyAnswered(key: string): boolean {
    return this.feedbackLog.some((f) => f.key === key && f.applied);
  }

  appliedCount(): number {
    return this.feedbackLog.filter((f) => f.applied).length;
  }
}
