import { describe, expect, it } from "vitest";

import { SurveyClient } from "../src/client.js";
import { SurveyFlow } from "../src/flow.js";
import { alwaysFirstOption, completeFlow, runScriptedSession } from "../src/headless.js";
import { FakeServer } from "./fakeServer.js";

function makeClock(start = 1000, step = 500): () => number {
  let t = start;
  return () => {
    t += step;
    return t;
  };
}

function clientFor(server: FakeServer): SurveyClient {
  return new SurveyClient("", server.transport());
}

describe("SurveyFlow", () => {
  it("walks screening, four compensation screens, then four tasks per scenario", async () => {
    const server = new FakeServer();
    const flow = await SurveyFlow.begin(clientFor(server), { resident: true, uses_delivery: true });
    const seen: string[] = [];
    while (flow.screen.kind !== "done") {
      const screen = flow.screen;
      seen.push(screen.kind === "sce" ? `${screen.kind}/${screen.scenario}` : screen.kind);
      if (screen.kind === "sbdc") await flow.answerSbdc(true);
      else if (screen.kind === "sce") await flow.answerSce(0);
    }
    expect(seen).toEqual([
      "sbdc", "sbdc", "sbdc", "sbdc",
      "sce/work", "sce/work", "sce/work", "sce/work",
      "sce/home", "sce/home", "sce/home", "sce/home",
    ]);
    expect(flow.progress).toEqual({ done: 12, total: 12 });
    expect(server.writes).toBe(12);
  });

  it("ends immediately with zero task answers when screening fails", async () => {
    const server = new FakeServer();
    const flow = await SurveyFlow.begin(clientFor(server), { resident: false, uses_delivery: true });
    expect(flow.screen.kind).toBe("screened_out");
    expect(flow.progress.total).toBe(0);
    expect(server.writes).toBe(0);
    await expect(flow.answerSbdc(true)).rejects.toThrow(/not on a compensation screen/);
  });

  it("refuses a second answer for the same position", async () => {
    const server = new FakeServer();
    const flow = await SurveyFlow.begin(clientFor(server), { resident: true, uses_delivery: true });
    await flow.answerSbdc(true);
    // the flow has advanced; submitting to the old position is impossible by
    // construction, and the screen guard rejects mismatched kinds
    expect(flow.screen).toMatchObject({ kind: "sbdc", taskNo: 2 });
    await flow.answerSbdc(false);
    expect(server.writes).toBe(2);
  });

  it("attaches monotone non-negative dwell times from the injected clock", async () => {
    const server = new FakeServer();
    const flow = await SurveyFlow.begin(
      clientFor(server),
      { resident: true, uses_delivery: true },
      { clock: makeClock(0, 250) },
    );
    await completeFlow(flow, alwaysFirstOption);
    for (const positionAnswers of server.answersByPosition.values()) {
      for (const answer of positionAnswers.values()) {
        expect(answer.dwell_ms).toBeGreaterThanOrEqual(0);
      }
    }
    expect(server.writes).toBe(12);
  });

  it("resumes at the first unanswered screen without duplicating rows", async () => {
    const server = new FakeServer();
    const client = clientFor(server);
    const flow = await SurveyFlow.begin(client, { resident: true, uses_delivery: true });
    await flow.answerSbdc(true);
    await flow.answerSbdc(false);

    const resumed = await SurveyFlow.resume(client, flow.plan.session_id);
    expect(resumed.screen).toMatchObject({ kind: "sbdc", taskNo: 3 });
    await completeFlow(resumed, alwaysFirstOption);
    expect(server.writes).toBe(12);
    expect(resumed.screen.kind).toBe("done");
  });

  it("renders task content exactly as planned (no client-side mutation)", async () => {
    const server = new FakeServer();
    const flow = await runScriptedSession(clientFor(server), alwaysFirstOption);
    const plan = server.sessions.get(flow.plan.session_id)!;
    for (const scenario of ["work", "home"] as const) {
      plan.sce_tasks[scenario].forEach((task, i) => {
        const position = flow.positions.find((p) => p.key === `sce/${scenario}/${i + 1}`)!;
        expect(position.screen).toMatchObject({ kind: "sce", task });
      });
    }
  });

  it("uses deterministic answer ids per position", async () => {
    const server = new FakeServer();
    const flow = await runScriptedSession(clientFor(server), alwaysFirstOption);
    const ids = Array.from(server.answersById.get(flow.plan.session_id)!.keys());
    expect(new Set(ids).size).toBe(12);
    for (const id of ids) {
      expect(id.startsWith(`${flow.plan.session_id}:`)).toBe(true);
    }
  });
});
