/** Session state machine: screening, four compensation screens, four
 * attribute tasks per scenario, completion.
 *
 * One screen is active at a time. An answer must be acknowledged by the
 * server (directly or through the retry queue) before the flow advances, a
 * position can only be answered once, and there is no back navigation.
 * Dwell time is measured per screen with an injectable clock and attached to
 * every answer. Answer ids are deterministic per (session, position), so
 * retries and resumed sessions never create duplicate rows.
 */

import { SurveyClient, answerId } from "./client.js";
import { RetryQueue, type RetryPolicy } from "./retryQueue.js";
import type { Answer, SceTaskPlan, Scenario, ScreeningAnswers, SessionPlan } from "./types.js";

export type Screen =
  | { kind: "sbdc"; taskNo: number; amount: number }
  | { kind: "sce"; scenario: Scenario; taskNo: number; task: SceTaskPlan }
  | { kind: "screened_out" }
  | { kind: "done" };

export type Clock = () => number;

export interface FlowOptions {
  clock?: Clock;
  retryPolicy?: RetryPolicy;
  sleep?: (ms: number) => Promise<void>;
}

interface Position {
  key: string;
  screen: Screen;
}

const SCENARIO_ORDER: Scenario[] = ["work", "home"];

function positionsOf(plan: SessionPlan): Position[] {
  const positions: Position[] = [];
  for (let t = 1; t <= plan.sbdc_task_count; t += 1) {
    positions.push({
      key: `sbdc/${t}`,
      screen: { kind: "sbdc", taskNo: t, amount: plan.compensations[t - 1]! },
    });
  }
  for (const scenario of SCENARIO_ORDER) {
    const tasks = plan.sce_tasks[scenario] ?? [];
    tasks.forEach((task, i) => {
      positions.push({
        key: `sce/${scenario}/${i + 1}`,
        screen: { kind: "sce", scenario, taskNo: i + 1, task },
      });
    });
  }
  return positions;
}

export class SurveyFlow {
  private index = 0;
  private shownAt: number;
  private submitting = false;
  readonly positions: Position[];
  private readonly answered = new Set<string>();
  private readonly queue: RetryQueue;

  private constructor(
    private readonly client: SurveyClient,
    readonly plan: SessionPlan,
    private readonly clock: Clock,
    options: FlowOptions,
  ) {
    this.positions = plan.eligible ? positionsOf(plan) : [];
    this.queue = new RetryQueue(client, plan.session_id, options.retryPolicy, options.sleep);
    for (const key of plan.answered ?? []) {
      this.answered.add(key);
    }
    while (this.index < this.positions.length && this.answered.has(this.positions[this.index]!.key)) {
      this.index += 1;
    }
    this.shownAt = this.clock();
  }

  /** Run screening and create the session; ineligible answers still create a
   * session (so refusals are counted) but end with zero task screens. */
  static async begin(
    client: SurveyClient,
    screening: ScreeningAnswers,
    options: FlowOptions = {},
  ): Promise<SurveyFlow> {
    const plan = await client.createSession(screening);
    return new SurveyFlow(client, plan, options.clock ?? Date.now, options);
  }

  /** Re-attach to an existing session after a reload or network loss; the
   * flow resumes at the first unanswered screen. */
  static async resume(
    client: SurveyClient,
    sessionId: string,
    options: FlowOptions = {},
  ): Promise<SurveyFlow> {
    const plan = await client.resumeSession(sessionId);
    return new SurveyFlow(client, plan, options.clock ?? Date.now, options);
  }

  get screen(): Screen {
    if (!this.plan.eligible) return { kind: "screened_out" };
    const position = this.positions[this.index];
    return position ? position.screen : { kind: "done" };
  }

  get busy(): boolean {
    return this.submitting;
  }

  get progress(): { done: number; total: number } {
    return { done: Math.min(this.index, this.positions.length), total: this.positions.length };
  }

  get pendingRetries(): number {
    return this.queue.pending;
  }

  async answerSbdc(accepted: boolean): Promise<void> {
    const screen = this.screen;
    if (screen.kind !== "sbdc") throw new Error(`not on a compensation screen (${screen.kind})`);
    await this.submit({
      answer_id: answerId(this.plan.session_id, `sbdc/${screen.taskNo}`),
      kind: "sbdc",
      task_no: screen.taskNo,
      accepted,
      dwell_ms: this.dwell(),
    });
  }

  async answerSce(chosenIndex: number): Promise<void> {
    const screen = this.screen;
    if (screen.kind !== "sce") throw new Error(`not on an attribute screen (${screen.kind})`);
    if (chosenIndex < 0 || chosenIndex >= screen.task.alternatives.length) {
      throw new Error(`chosen index ${chosenIndex} out of range`);
    }
    await this.submit({
      answer_id: answerId(this.plan.session_id, `sce/${screen.scenario}/${screen.taskNo}`),
      kind: "sce",
      scenario: screen.scenario,
      task_no: screen.taskNo,
      chosen_index: chosenIndex,
      dwell_ms: this.dwell(),
    });
  }

  private dwell(): number {
    return Math.max(0, this.clock() - this.shownAt);
  }

  private async submit(answer: Answer): Promise<void> {
    const key = this.positions[this.index]!.key;
    if (this.answered.has(key)) throw new Error(`position ${key} already answered`);
    if (this.submitting) throw new Error("an answer is already in flight");
    this.submitting = true;
    try {
      await this.queue.submit(answer);
      this.answered.add(key);
      this.index += 1;
      this.shownAt = this.clock();
    } finally {
      this.submitting = false;
    }
  }
}
