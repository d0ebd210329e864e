/** Typed client for the collection service. All calls go through an
 * injectable transport so tests can fault-inject; the default transport is
 * fetch with JSON bodies. */

import type { Answer, ScreeningAnswers, SessionPlan, SubmitResult, Transport } from "./types.js";

export function fetchTransport(fetchImpl: typeof fetch = fetch): Transport {
  return async (method, url, body) => {
    const response = await fetchImpl(url, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: unknown = null;
    const text = await response.text();
    if (text.length > 0) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = text;
      }
    }
    return { status: response.status, body: parsed };
  };
}

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly body: unknown,
  ) {
    super(message);
  }
}

export class SurveyClient {
  constructor(
    private readonly baseUrl: string,
    private readonly transport: Transport,
  ) {}

  async health(): Promise<boolean> {
    try {
      const r = await this.transport("GET", `${this.baseUrl}/api/health`);
      return r.status === 200;
    } catch {
      return false;
    }
  }

  async createSession(screening: ScreeningAnswers): Promise<SessionPlan> {
    const r = await this.transport("POST", `${this.baseUrl}/api/sessions`, { screening });
    if (r.status !== 201) {
      throw new ServiceError(`session creation failed (${r.status})`, r.status, r.body);
    }
    return r.body as SessionPlan;
  }

  async resumeSession(sessionId: string): Promise<SessionPlan> {
    const r = await this.transport("GET", `${this.baseUrl}/api/sessions/${sessionId}`);
    if (r.status !== 200) {
      throw new ServiceError(`session ${sessionId} not found (${r.status})`, r.status, r.body);
    }
    return r.body as SessionPlan;
  }

  /** Submit one answer. 201 = stored, 200 = idempotent duplicate; both count
   * as acknowledged. Anything else is a ServiceError with the status. */
  async submitAnswer(sessionId: string, answer: Answer): Promise<SubmitResult> {
    const r = await this.transport(
      "POST",
      `${this.baseUrl}/api/sessions/${sessionId}/answers`,
      answer,
    );
    if (r.status !== 201 && r.status !== 200) {
      throw new ServiceError(`answer rejected (${r.status})`, r.status, r.body);
    }
    return r;
  }
}

/** Deterministic idempotency key for one task position within a session. */
export function answerId(sessionId: string, position: string): string {
  return `${sessionId}:${position}`;
}
