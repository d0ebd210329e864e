/** End-to-end suite against the real collection service.
 *
 * Starts the Python service on a free port, drives scripted respondents
 * through the full flow over HTTP (including a lost-acknowledgement fault
 * injection), then checks that the export ingests and fits cleanly through
 * the estimation CLI and that session assignment is statistically uniform.
 */

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SurveyClient, fetchTransport } from "../src/client.js";
import { SurveyFlow } from "../src/flow.js";
import { completeFlow, type ScriptedRespondent } from "../src/headless.js";
import type { Transport } from "../src/types.js";

const execFileAsync = promisify(execFile);
const PYTHON = process.env.PYTHON ?? "python3";
const LEVELS = [100, 500, 1000, 1500, 2000, 2500, 3000];

let proc: ChildProcess | null = null;
let baseUrl = "";
let workDir = "";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    server.listen(0, "127.0.0.1", () => {
      const port = (server.address() as net.AddressInfo).port;
      server.close(() => resolve(port));
    });
    server.on("error", reject);
  });
}

function randomRespondent(seed: number): ScriptedRespondent {
  let state = seed >>> 0 || 1;
  const next = () => {
    // xorshift32: deterministic choices without pulling in a dependency
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 2 ** 32;
  };
  const logistic = (x: number) => 1 / (1 + Math.exp(-x));
  return {
    screening: { resident: true, uses_delivery: true },
    // acceptance rises with the stated amount, like a real respondent
    acceptCompensation: (_taskNo, amount) => next() < logistic(0.96 * Math.log(amount) - 6.1),
    // mild preference for fast, cheap, reliable options plus noise
    chooseAlternative: (_scenario, _taskNo, alternatives) => {
      const utility = (a: { wait: number; cost: number; unrel: number }) =>
        -0.034 * a.wait - 0.021 * a.cost - 0.102 * a.unrel;
      const delta = utility(alternatives[0]!) - utility(alternatives[1]!);
      return next() < logistic(delta) ? 0 : 1;
    },
  };
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "survey-e2e-"));
  const designPath = join(workDir, "design.json");
  await execFileAsync(PYTHON, [
    "-m", "choiceval.cli", "design", "generate",
    "--n-tasks", "16", "--seed", "0", "--n-restarts", "5", "--out", designPath,
  ]);
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  proc = spawn(PYTHON, [
    "-m", "choiceval.cli", "serve",
    "--design", designPath, "--seed", "42", "--port", String(port),
  ], { stdio: ["ignore", "pipe", "pipe"] });
  proc.stderr?.on("data", () => {});

  const client = new SurveyClient(baseUrl, fetchTransport());
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    if (await client.health()) return;
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("collection service did not come up");
});

afterAll(() => {
  proc?.kill("SIGTERM");
});

describe("end-to-end collection", () => {
  it("a scripted session produces exactly 4 access rows and 8 task observations", async () => {
    const client = new SurveyClient(baseUrl, fetchTransport());
    const flow = await SurveyFlow.begin(client, { resident: true, uses_delivery: true });
    await completeFlow(flow, randomRespondent(7));
    expect(flow.screen.kind).toBe("done");

    const sid = flow.plan.session_id;
    const sbdcCsv = await (await fetch(`${baseUrl}/api/export?schema=sbdc`)).text();
    const sceCsv = await (await fetch(`${baseUrl}/api/export?schema=sce`)).text();
    const sbdcRows = sbdcCsv.trim().split("\n").filter((line) => line.startsWith(`${sid},`));
    const sceRows = sceCsv.trim().split("\n").filter((line) => line.startsWith(`${sid},`));
    expect(sbdcRows).toHaveLength(4);
    expect(sceRows).toHaveLength(8 * 2); // long format: one row per alternative
  });

  it("screened-out respondents leave no task rows", async () => {
    const client = new SurveyClient(baseUrl, fetchTransport());
    const flow = await SurveyFlow.begin(client, { resident: false, uses_delivery: true });
    expect(flow.screen.kind).toBe("screened_out");
    const sbdcCsv = await (await fetch(`${baseUrl}/api/export?schema=sbdc`)).text();
    expect(sbdcCsv).not.toContain(flow.plan.session_id);
  });

  it("lost acknowledgements after network failure yield zero duplicate rows", async () => {
    let dropRemaining = 6;
    const inner = fetchTransport();
    const lossy: Transport = async (method, url, body) => {
      const result = await inner(method, url, body);
      if (method === "POST" && url.includes("/answers") && dropRemaining > 0) {
        dropRemaining -= 1;
        throw new Error("connection reset mid-response");
      }
      return result;
    };
    const client = new SurveyClient(baseUrl, lossy);
    const flow = await SurveyFlow.begin(
      client,
      { resident: true, uses_delivery: true },
      { sleep: async () => {} },
    );
    await completeFlow(flow, randomRespondent(11));
    expect(flow.screen.kind).toBe("done");
    expect(dropRemaining).toBe(0);

    const sid = flow.plan.session_id;
    const sceCsv = await (await fetch(`${baseUrl}/api/export?schema=sce`)).text();
    const mine = sceCsv.trim().split("\n").filter((line) => line.startsWith(`${sid},`));
    expect(mine).toHaveLength(16);
    const positions = mine.map((line) => line.split(",").slice(1, 4).join("/"));
    expect(new Set(positions).size).toBe(16); // every (scenario, task, alt) row exactly once
  });

  it("a batch of sessions exports data that ingests and fits end to end", async () => {
    const client = new SurveyClient(baseUrl, fetchTransport());
    for (let i = 0; i < 40; i += 1) {
      const flow = await SurveyFlow.begin(client, { resident: true, uses_delivery: true });
      await completeFlow(flow, randomRespondent(1000 + i));
    }
    const sbdcCsv = await (await fetch(`${baseUrl}/api/export?schema=sbdc`)).text();
    const sceCsv = await (await fetch(`${baseUrl}/api/export?schema=sce`)).text();
    const sbdcPath = join(workDir, "responses_sbdc.csv");
    const scePath = join(workDir, "responses_sce.csv");
    writeFileSync(sbdcPath, sbdcCsv);
    writeFileSync(scePath, sceCsv);

    const fitSbdc = await execFileAsync(PYTHON, [
      "-m", "choiceval.cli", "fit", "sbdc",
      "--data", sbdcPath, "--out", join(workDir, "fit_sbdc.json"),
    ]);
    expect(fitSbdc.stdout).toContain("wrote");
    const fitCl = await execFileAsync(PYTHON, [
      "-m", "choiceval.cli", "fit", "clogit",
      "--data", scePath, "--scenario", "work", "--out", join(workDir, "fit_clogit_work.json"),
    ]);
    expect(fitCl.stdout).toContain("wrote");
  }, 180_000);

  it("assigns compensation levels uniformly across 10,000 sessions", async () => {
    const counts = new Map<number, number>(LEVELS.map((level) => [level, 0]));
    const batch = 200;
    const total = 10_000;
    for (let done = 0; done < total; done += batch) {
      const created = await Promise.all(
        Array.from({ length: batch }, () =>
          fetch(`${baseUrl}/api/sessions`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ screening: { resident: true, uses_delivery: true } }),
          }).then((resp) => resp.json() as Promise<{ compensations: number[] }>),
        ),
      );
      for (const plan of created) {
        for (const level of plan.compensations) {
          counts.set(level, (counts.get(level) ?? 0) + 1);
        }
      }
    }
    const p = 4 / 7;
    const expected = total * p;
    const sigma = Math.sqrt(total * p * (1 - p));
    for (const level of LEVELS) {
      expect(Math.abs(counts.get(level)! - expected)).toBeLessThan(3 * sigma);
    }
  }, 300_000);
});
