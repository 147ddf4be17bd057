// Typed client for the three service endpoints.

import type {
  FeedbackAck,
  QueriesResponse,
  StateResponse,
  Verdict,
} from "./types.js";
import { verdictLabel } from "./types.js";

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async getState(since: number): Promise<StateResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/state?since=${since}`);
    if (!res.ok) throw new Error(`state request failed: ${res.status}`);
    return (await res.json()) as StateResponse;
  }

  async getQueries(): Promise<QueriesResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/queries`);
    if (!res.ok) throw new Error(`queries request failed: ${res.status}`);
    return (await res.json()) as QueriesResponse;
  }

  /** Answer a pending query (label-efficient mode). */
  async answerQuery(
    id: string,
    verdict: Verdict,
    submitter = "console",
  ): Promise<FeedbackAck> {
    return this.postFeedback({ id, y: verdictLabel(verdict), submitter });
  }

  /** Volunteer a correction for a past timestep (arbitrary mode). */
  async volunteerFeedback(
    t: number,
    verdict: Verdict,
    submitter = "console",
  ): Promise<FeedbackAck> {
    return this.postFeedback({ t, y: verdictLabel(verdict), submitter });
  }

  private async postFeedback(body: object): Promise<FeedbackAck> {
    const res = await this.fetchFn(`${this.baseUrl}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    // the service answers rejected submissions with 400 + a JSON body
    return (await res.json()) as FeedbackAck;
  }
}
