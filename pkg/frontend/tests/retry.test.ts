import { describe, expect, it } from "vitest";

import { ServiceError, SurveyClient } from "../src/client.js";
import { SurveyFlow } from "../src/flow.js";
import { alwaysFirstOption, completeFlow } from "../src/headless.js";
import { RetryQueue } from "../src/retryQueue.js";
import type { Transport } from "../src/types.js";
import { FakeServer } from "./fakeServer.js";

const instantSleep = async () => {};

/** Drops the response after the server processed the request: the classic
 * lost-ack failure that produces duplicates without idempotency keys. */
function lossyTransport(server: FakeServer, dropResponses: number): Transport {
  const inner = server.transport();
  let remaining = dropResponses;
  return async (method, url, body) => {
    const result = await inner(method, url, body);
    if (method === "POST" && url.includes("/answers") && remaining > 0) {
      remaining -= 1;
      throw new Error("socket hang up");
    }
    return result;
  };
}

/** Fails before the request reaches the server. */
function offlineTransport(server: FakeServer, failures: number): Transport {
  const inner = server.transport();
  let remaining = failures;
  return async (method, url, body) => {
    if (method === "POST" && url.includes("/answers") && remaining > 0) {
      remaining -= 1;
      throw new Error("network unreachable");
    }
    return inner(method, url, body);
  };
}

describe("RetryQueue", () => {
  it("retries lost acknowledgements without double-writing", async () => {
    const server = new FakeServer();
    const client = new SurveyClient("", lossyTransport(server, 5));
    const flow = await SurveyFlow.begin(client, { resident: true, uses_delivery: true }, { sleep: instantSleep });
    await completeFlow(flow, alwaysFirstOption);
    expect(server.writes).toBe(12);
    for (const byPosition of server.answersByPosition.values()) {
      expect(byPosition.size).toBe(12);
    }
  });

  it("recovers from offline periods via backoff", async () => {
    const server = new FakeServer();
    const delays: number[] = [];
    const client = new SurveyClient("", offlineTransport(server, 4));
    const plan = await client.createSession({ resident: true, uses_delivery: true });
    const queue = new RetryQueue(client, plan.session_id, { baseDelayMs: 100, maxDelayMs: 800, maxAttempts: 8 }, async (ms) => {
      delays.push(ms);
    });
    await queue.submit({ answer_id: `${plan.session_id}:sbdc/1`, kind: "sbdc", task_no: 1, accepted: true, dwell_ms: 10 });
    expect(server.writes).toBe(1);
    expect(delays).toEqual([100, 200, 400, 800]);
    expect(queue.pending).toBe(0);
  });

  it("gives up after max attempts when the network stays down", async () => {
    const server = new FakeServer();
    const client = new SurveyClient("", offlineTransport(server, 100));
    const plan = await client.createSession({ resident: true, uses_delivery: true });
    const queue = new RetryQueue(client, plan.session_id, { baseDelayMs: 1, maxDelayMs: 2, maxAttempts: 3 }, instantSleep);
    await expect(
      queue.submit({ answer_id: "x", kind: "sbdc", task_no: 1, accepted: true, dwell_ms: 0 }),
    ).rejects.toThrow(/network unreachable/);
    expect(server.writes).toBe(0);
  });

  it("does not retry permanent rejections", async () => {
    const server = new FakeServer();
    let calls = 0;
    const counting: Transport = async (method, url, body) => {
      if (method === "POST" && url.includes("/answers")) calls += 1;
      return server.transport()(method, url, body);
    };
    const client = new SurveyClient("", counting);
    const plan = await client.createSession({ resident: true, uses_delivery: true });
    const queue = new RetryQueue(client, plan.session_id, { baseDelayMs: 1, maxDelayMs: 2, maxAttempts: 5 }, instantSleep);
    await expect(
      queue.submit({ answer_id: "bad", kind: "sbdc", task_no: 9, accepted: true, dwell_ms: 0 }),
    ).rejects.toThrow(ServiceError);
    expect(calls).toBe(1);
  });
});
