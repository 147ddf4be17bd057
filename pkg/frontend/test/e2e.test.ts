// End-to-end: a scripted console session against a live detection service.
//
// Spawns the real server on the label-efficient preset, answers ten
// queries through the console's own client/store code paths, and checks
// that (a) the service log shows exactly ten applied updates, (b) a
// duplicate answer is rejected, and (c) the threshold/belief trace the
// console renders equals the server's record log value-for-value.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { ConsoleApi } from "../src/api.js";
import { ConsoleStore } from "../src/store.js";
import { renderChart } from "../src/chart.js";

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, "..", "..");

let child: ChildProcess | null = null;
let workDir = "";

async function waitForServer(deadlineMs: number): Promise<void> {
  const end = Date.now() + deadlineMs;
  while (Date.now() < end) {
    try {
      const res = await fetch(`${BASE}/state?since=0`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("service did not come up");
}

describe.skipIf(process.env.SKIP_E2E === "1")("live console session", () => {
  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "console-e2e-"));
    child = spawn(
      "python3",
      ["-m", "streamhedge.cli", "serve", "--preset", "exp2a", "--serve", `127.0.0.1:${PORT}`],
      { cwd: workDir, env: { ...process.env, PYTHONPATH: join(REPO_ROOT, "src") } },
    );
    await waitForServer(20000);
  }, 30000);

  afterAll(() => {
    child?.kill("SIGINT");
  });

  it("answers 10 queries; server applies exactly 10 updates; traces agree", async () => {
    const api = new ConsoleApi(BASE);
    const store = new ConsoleStore();

    let lastQueryId = "";
    const answered = new Set<string>();
    const deadline = Date.now() + 60000;
    while (store.appliedCount() < 10 && Date.now() < deadline) {
      const queries = await api.getQueries();
      store.ingestQueries(queries.queries);
      for (const q of store.pending) {
        if (store.appliedCount() >= 10) break;
        if (answered.has(q.id)) continue;
        const verdict = q.y_hat === 1 ? "anomalous" : "nominal"; // agreeability
        const ack = await api.answerQuery(q.id, verdict);
        answered.add(q.id);
        store.recordFeedback({
          key: q.id,
          t: q.t,
          y: verdict === "anomalous" ? 1 : -1,
          applied: ack.applied,
          tau: ack.tau,
          error: ack.error,
        });
        lastQueryId = q.id;
      }
      await new Promise((r) => setTimeout(r, 50));
    }
    expect(store.appliedCount()).toBe(10);

    // a duplicate answer must be rejected and not double-apply
    const dup = await api.answerQuery(lastQueryId, "nominal");
    expect(dup.applied).toBe(false);

    // pull the whole stream into the console state
    const state = await api.getState(0);
    store.ingestState(state);
    expect(store.size).toBeGreaterThanOrEqual(10);

    // the chart renders one point per record
    const svg = renderChart(store.all());
    expect(svg).toContain(`data-points="${store.size}"`);

    // server-side log: exactly 10 applied feedback entries, and the
    // console's (t, zeta, tau) trace equals the logged records exactly
    const logPath = join(workDir, "runs", "exp2a", "service_log.jsonl");
    const lines = readFileSync(logPath, "utf8")
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l));
    const feedback = lines.filter((l) => l.kind === "feedback");
    expect(feedback.length).toBe(10);
    const records = lines.filter((l) => l.kind === "record");
    expect(records.length).toBeGreaterThanOrEqual(10);
    for (const logged of records) {
      const mine = store.get(logged.t);
      if (!mine) continue; // ring capacity: only absent if evicted
      expect(mine.zeta).toBe(logged.zeta);
      expect(mine.tau).toBe(logged.tau);
      expect(mine.y_hat).toBe(logged.y_hat);
      expect(mine.log_belief).toBe(logged.log_belief);
    }
  }, 90000);
});
