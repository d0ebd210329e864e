/** Retry queue for answer submission with exponential backoff.
 *
 * Answers keep their idempotency key across retries, so a submission that
 * actually reached the server before the connection dropped is acknowledged
 * as a duplicate on retry and never stored twice. 4xx responses other than
 * the duplicate case are permanent failures and are surfaced, not retried.
 */

import { ServiceError, SurveyClient } from "./client.js";
import type { Answer } from "./types.js";

export interface RetryPolicy {
  baseDelayMs: number;
  maxDelayMs: number;
  maxAttempts: number;
}

export const DEFAULT_POLICY: RetryPolicy = {
  baseDelayMs: 250,
  maxDelayMs: 8_000,
  maxAttempts: 8,
};

export type Sleeper = (ms: number) => Promise<void>;

const realSleep: Sleeper = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class RetryQueue {
  private queue: Answer[] = [];
  private draining = false;

  constructor(
    private readonly client: SurveyClient,
    private readonly sessionId: string,
    private readonly policy: RetryPolicy = DEFAULT_POLICY,
    private readonly sleep: Sleeper = realSleep,
  ) {}

  get pending(): number {
    return this.queue.length;
  }

  /** Submit now; on network failure park the answer and drain with backoff.
   * Resolves once this answer has been acknowledged by the server. */
  async submit(answer: Answer): Promise<void> {
    this.queue.push(answer);
    await this.drain();
  }

  async drain(): Promise<void> {
    if (this.draining) return;
    this.draining = true;
    try {
      while (this.queue.length > 0) {
        const answer = this.queue[0]!;
        let delay = this.policy.baseDelayMs;
        let attempt = 0;
        for (;;) {
          attempt += 1;
          try {
            await this.client.submitAnswer(this.sessionId, answer);
            break;
          } catch (error) {
            if (error instanceof ServiceError && error.status < 500) {
              // the server understood us and said no; retrying cannot help
              this.queue.shift();
              throw error;
            }
            if (attempt >= this.policy.maxAttempts) {
              throw error;
            }
            await this.sleep(delay);
            delay = Math.min(delay * 2, this.policy.maxDelayMs);
          }
        }
        this.queue.shift();
      }
    } finally {
      this.draining = false;
    }
  }
}
