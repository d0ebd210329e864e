/** Scripted respondent: drives a full session through the same flow code the
 * UI uses, without a DOM. Used by the end-to-end tests and handy for loading
 * a service with synthetic traffic. */

import { SurveyClient } from "./client.js";
import { SurveyFlow, type FlowOptions } from "./flow.js";
import type { ScreeningAnswers } from "./types.js";

export interface ScriptedRespondent {
  screening: ScreeningAnswers;
  /** Accept the stated compensation? Called once per compensation screen. */
  acceptCompensation: (taskNo: number, amount: number) => boolean;
  /** Pick an alternative index for an attribute task. */
  chooseAlternative: (scenario: string, taskNo: number, alternatives: { wait: number; cost: number; unrel: number }[]) => number;
}

export const alwaysFirstOption: ScriptedRespondent = {
  screening: { resident: true, uses_delivery: true },
  acceptCompensation: () => false,
  chooseAlternative: () => 0,
};

export async function runScriptedSession(
  client: SurveyClient,
  respondent: ScriptedRespondent,
  options: FlowOptions = {},
): Promise<SurveyFlow> {
  const flow = await SurveyFlow.begin(client, respondent.screening, options);
  await completeFlow(flow, respondent);
  return flow;
}

export async function completeFlow(flow: SurveyFlow, respondent: ScriptedRespondent): Promise<void> {
  for (;;) {
    const screen = flow.screen;
    if (screen.kind === "done" || screen.kind === "screened_out") return;
    if (screen.kind === "sbdc") {
      await flow.answerSbdc(respondent.acceptCompensation(screen.taskNo, screen.amount));
    } else {
      await flow.answerSce(
        respondent.chooseAlternative(screen.scenario, screen.taskNo, screen.task.alternatives),
      );
    }
  }
}
