import { describe, expect, it } from "vitest";
import { renderChart, tauChangePoints } from "../src/chart.js";
import type { StreamRecord } from "../src/types.js";

function rec(t: number, zeta: number, tau: number, y_hat: 1 | -1 = -1,
             extra: Partial<StreamRecord> = {}): StreamRecord {
  return {
    t,
    filtering_loss: -zeta,
    log_belief: zeta,
    zeta,
    tau,
    y_hat,
    queried: false,
    feedback: null,
    ...extra,
  };
}

describe("renderChart", () => {
  it("renders an empty chart for an empty stream", () => {
    const svg = renderChart([]);
    expect(svg).toContain('data-points="0"');
    expect(svg).not.toContain("path");
  });

  it("draws one point per record and flags anomalies", () => {
    const records: StreamRecord[] = [];
    for (let t = 1; t <= 100; t++) {
      records.push(rec(t, -1 - t / 200, -1.2, t % 10 === 0 ? 1 : -1));
    }
    const svg = renderChart(records);
    expect(svg).toContain('data-points="100"');
    const markers = svg.match(/class="flag"/g) ?? [];
    expect(markers.length).toBe(10);
  });

  it("tau is stepwise constant between feedback events", () => {
    // tau changes only at t=4 and t=8
    const taus = [-1, -1, -1, -0.9, -0.9, -0.9, -0.9, -1.0, -1.0];
    const records = taus.map((tau, i) => rec(i + 1, -0.95, tau));
    expect(tauChangePoints(records)).toEqual([4, 8]);
    const svg = renderChart(records);
    // a step path uses H/V segments, never diagonal L segments
    const tauPath = svg.match(/class="tau" d="([^"]+)"/)![1]!;
    expect(tauPath).toMatch(/^M[\d.,-]+( H[\d.-]+( V[\d.-]+)?)+$/);
  });

  it("hollow markers mark flagged rounds that ground truth contradicts", () => {
    const records = [
      rec(1, -1.3, -1.2, 1, { y_true: 1 }),
      rec(2, -1.3, -1.2, 1, { y_true: -1 }),
    ];
    const svg = renderChart(records);
    expect(svg).toContain('fill="#c0392b"');
    expect(svg).toContain('fill="none"');
  });
});
