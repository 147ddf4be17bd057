import { describe, expect, it } from "vitest";
import { ConsoleStore } from "../src/store.js";
import type { PendingQuery, StreamRecord } from "../src/types.js";

function rec(t: number, extra: Partial<StreamRecord> = {}): StreamRecord {
  return {
    t,
    filtering_loss: 1.0 + t,
    log_belief: -(1.0 + t),
    zeta: -0.5 - t / 100,
    tau: -1.0,
    y_hat: -1,
    queried: false,
    feedback: null,
    ...extra,
  };
}

function state(records: StreamRecord[], head?: number) {
  return {
    head: head ?? (records.length ? records[records.length - 1]!.t : 0),
    mode: "label",
    running: true,
    records,
  };
}

describe("ConsoleStore", () => {
  it("ingests records in order and tracks since", () => {
    const store = new ConsoleStore();
    expect(store.since).toBe(0);
    store.ingestState(state([rec(1), rec(2), rec(3)]));
    expect(store.since).toBe(3);
    expect(store.all().map((r) => r.t)).toEqual([1, 2, 3]);
  });

  it("deduplicates overlapping polls (reconnect safety)", () => {
    const store = new ConsoleStore();
    store.ingestState(state([rec(1), rec(2)]));
    const added = store.ingestState(state([rec(1), rec(2), rec(3)]));
    expect(added).toBe(1);
    expect(store.size).toBe(3);
  });

  it("never mutates an already-emitted record", () => {
    const store = new ConsoleStore();
    store.ingestState(state([rec(5, { tau: -1.0 })]));
    store.ingestState(state([rec(5, { tau: -99.0 })]));
    expect(store.get(5)!.tau).toBe(-1.0);
  });

  it("stores server values verbatim (no fabrication)", () => {
    const store = new ConsoleStore();
    const wire = JSON.stringify(rec(7, { zeta: -0.123456789012345, tau: -1.4 }));
    const parsed = JSON.parse(wire) as StreamRecord;
    store.ingestState(state([parsed]));
    expect(JSON.stringify(store.get(7))).toBe(wire);
  });

  it("evicts oldest beyond capacity", () => {
    const store = new ConsoleStore(3);
    store.ingestState(state([rec(1), rec(2), rec(3), rec(4), rec(5)]));
    expect(store.all().map((r) => r.t)).toEqual([3, 4, 5]);
  });

  it("marks disconnects without dropping data", () => {
    const store = new ConsoleStore();
    store.ingestState(state([rec(1)]));
    store.markDisconnected();
    expect(store.connected).toBe(false);
    expect(store.size).toBe(1);
  });

  it("reconciles pending queries against applied feedback", () => {
    const store = new ConsoleStore();
    const q = (id: string, t: number): PendingQuery => ({
      id,
      t,
      z_summary: { dim: 4, norm: 1 },
      log_belief: -3,
      zeta: -0.5,
      tau: -1,
      y_hat: 1,
      created_at: 0,
      deadline: 1e12,
    });
    store.ingestQueries([q("q1", 1), q("q2", 2)]);
    expect(store.pending.length).toBe(2);
    store.recordFeedback({ key: "q1", t: 1, y: 1, applied: true, tau: -0.9 });
    expect(store.pending.map((p) => p.id)).toEqual(["q2"]);
    store.ingestQueries([q("q1", 1), q("q2", 2)]); // stale server view
    expect(store.pending.map((p) => p.id)).toEqual(["q2"]);
  });

  it("double answers are observable and countable", () => {
    const store = new ConsoleStore();
    store.recordFeedback({ key: "q1", t: 1, y: 1, applied: true, tau: -0.9 });
    expect(store.alreadyAnswered("q1")).toBe(true);
    store.recordFeedback({
      key: "q1",
      t: 1,
      y: 1,
      applied: false,
      error: "duplicate submission",
    });
    expect(store.appliedCount()).toBe(1);
  });
});
