// Browser wiring: 1-second polling of /state and /queries, chart refresh,
// query cards with anomalous/nominal buttons, and a volunteer-correction
// form for arbitrary mode.  All state lives in ConsoleStore; every
// mutation goes through a server acknowledgement.

import { ConsoleApi } from "./api.js";
import { renderChart } from "./chart.js";
import { ConsoleStore } from "./store.js";
import type { PendingQuery, Verdict } from "./types.js";

const POLL_MS = 1000;

export class ConsoleApp {
  readonly store = new ConsoleStore(2000);
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ConsoleApi,
    private readonly root: Document = document,
  ) {}

  start(): void {
    void this.tick();
    this.timer = setInterval(() => void this.tick(), POLL_MS);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async tick(): Promise<void> {
    try {
      const state = await this.api.getState(this.store.since);
      this.store.ingestState(state);
      const queries = await this.api.getQueries();
      this.store.ingestQueries(queries.queries);
    } catch {
      this.store.markDisconnected();
    }
    this.render();
  }

  async answer(query: PendingQuery, verdict: Verdict): Promise<void> {
    if (this.store.alreadyAnswered(query.id)) return; // double-click guard
    const ack = await this.api.answerQuery(query.id, verdict);
    this.store.recordFeedback({
      key: query.id,
      t: query.t,
      y: verdict === "anomalous" ? 1 : -1,
      applied: ack.applied,
      tau: ack.tau,
      error: ack.error,
    });
    this.render();
  }

  async volunteer(t: number, verdict: Verdict): Promise<void> {
    const key = `t${t}`;
    if (this.store.alreadyAnswered(key)) return;
    const ack = await this.api.volunteerFeedback(t, verdict);
    this.store.recordFeedback({
      key,
      t,
      y: verdict === "anomalous" ? 1 : -1,
      applied: ack.applied,
      tau: ack.tau,
      error: ack.error,
    });
    this.render();
  }

  render(): void {
    const chartEl = this.root.getElementById("chart");
    if (chartEl) chartEl.innerHTML = renderChart(this.store.all());

    const banner = this.root.getElementById("banner");
    if (banner) {
      banner.textContent = this.store.connected
        ? this.store.running
          ? `live — ${this.store.size} records, head t=${this.store.head}`
          : `stream finished — ${this.store.size} records`
        : "disconnected — showing stale data";
      banner.className = this.store.connected ? "ok" : "stale";
    }

    const list = this.root.getElementById("queries");
    if (list) {
      list.innerHTML = "";
      for (const q of this.store.pending) {
        const card = this.root.createElement("div");
        card.className = "query";
        const text = this.root.createElement("span");
        text.textContent =
          `t=${q.t}  log-belief=${q.log_belief.toFixed(2)}  ` +
          `zeta=${q.zeta.toFixed(4)}  tau=${q.tau.toFixed(4)}  ` +
          `flagged=${q.y_hat === 1 ? "yes" : "no"}`;
        card.appendChild(text);
        for (const verdict of ["anomalous", "nominal"] as const) {
          const btn = this.root.createElement("button");
          btn.textContent = verdict;
          btn.addEventListener("click", () => void this.answer(q, verdict));
          card.appendChild(btn);
        }
        list.appendChild(card);
      }
    }

    const log = this.root.getElementById("feedback-log");
    if (log) {
      log.textContent = this.store.feedbackLog
        .map(
          (f) =>
            `${f.key}: y=${f.y} ${f.applied ? `applied, tau=${f.tau}` : `rejected (${f.error})`}`,
        )
        .join("\n");
    }
  }
}

export function mount(baseUrl: string): ConsoleApp {
  const app = new ConsoleApp(new ConsoleApi(baseUrl));
  const form = document.getElementById("volunteer-form") as HTMLFormElement | null;
  if (form) {
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const t = Number((document.getElementById("volunteer-t") as HTMLInputElement).value);
      const verdict = (document.getElementById("volunteer-verdict") as HTMLSelectElement)
        .value as Verdict;
      if (Number.isInteger(t) && t >= 1) void app.volunteer(t, verdict);
    });
  }
  app.start();
  return app;
}
