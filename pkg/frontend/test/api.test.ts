import { describe, expect, it, vi } from "vitest";
import { ConsoleApi } from "../src/api.js";

function fakeFetch(status: number, body: unknown) {
  return vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  })) as unknown as typeof fetch;
}

describe("ConsoleApi", () => {
  it("requests state with the since cursor", async () => {
    const f = fakeFetch(200, { head: 3, mode: "label", running: true, records: [] });
    const api = new ConsoleApi("http://x", f);
    const state = await api.getState(17);
    expect(state.head).toBe(3);
    expect((f as any).mock.calls[0][0]).toBe("http://x/state?since=17");
  });

  it("maps verdicts onto +1/-1 labels", async () => {
    const f = fakeFetch(200, { applied: true, tau: -0.9 });
    const api = new ConsoleApi("http://x", f);
    await api.answerQuery("q4", "anomalous");
    let body = JSON.parse((f as any).mock.calls[0][1].body);
    expect(body).toMatchObject({ id: "q4", y: 1 });
    await api.volunteerFeedback(9, "nominal", "tester");
    body = JSON.parse((f as any).mock.calls[1][1].body);
    expect(body).toMatchObject({ t: 9, y: -1, submitter: "tester" });
  });

  it("surfaces rejected submissions from 400 responses", async () => {
    const f = fakeFetch(400, { applied: false, error: "duplicate submission" });
    const api = new ConsoleApi("http://x", f);
    const ack = await api.answerQuery("q4", "nominal");
    expect(ack.applied).toBe(false);
    expect(ack.error).toContain("duplicate");
  });

  it("raises on transport-level state failures", async () => {
    const f = fakeFetch(500, {});
    const api = new ConsoleApi("http://x", f);
    await expect(api.getState(0)).rejects.toThrow("state request failed");
  });
});
