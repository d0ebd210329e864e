/** Wire types shared with the collection service. */

export type Scenario = "work" | "home";

export interface AlternativeView {
  wait: number;
  cost: number;
  unrel: number;
}

export interface SceTaskPlan {
  task_id: string;
  alternatives: AlternativeView[];
}

export interface SessionPlan {
  session_id: string;
  eligible: boolean;
  compensations: number[];
  sce_tasks: Record<Scenario, SceTaskPlan[]>;
  sbdc_task_count: number;
  created_at: number;
  answered?: string[];
}

export interface ScreeningAnswers {
  resident: boolean;
  uses_delivery: boolean;
}

export interface SbdcAnswer {
  answer_id: string;
  kind: "sbdc";
  task_no: number;
  accepted: boolean;
  dwell_ms: number;
}

export interface SceAnswer {
  answer_id: string;
  kind: "sce";
  scenario: Scenario;
  task_no: number;
  chosen_index: number;
  dwell_ms: number;
}

export type Answer = SbdcAnswer | SceAnswer;

export interface SubmitResult {
  status: number;
  body: unknown;
}

/** Minimal transport the client needs; injectable for tests and fault injection. */
export type Transport = (
  method: "GET" | "POST",
  url: string,
  body?: unknown,
) => Promise<SubmitResult>;
