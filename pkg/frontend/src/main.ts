/** Browser entry point: screening form, then one task per screen. The
 * service URL comes from the page's own origin unless ?service= overrides
 * it; ?lang=zh switches the instrument language. */

import { SurveyClient, fetchTransport } from "./client.js";
import { SurveyFlow } from "./flow.js";
import { STRINGS, type Language } from "./strings.js";
import { SurveyView, renderScreeningForm } from "./view.js";

export async function mount(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const serviceUrl = params.get("service") ?? "";
  const language = (params.get("lang") === "zh" ? "zh" : "en") as Language;
  const client = new SurveyClient(serviceUrl, fetchTransport());

  const resumeId = window.sessionStorage.getItem("survey_session_id");
  if (resumeId) {
    try {
      const flow = await SurveyFlow.resume(client, resumeId);
      new SurveyView(root, flow, language).render();
      return;
    } catch {
      window.sessionStorage.removeItem("survey_session_id");
    }
  }

  renderScreeningForm(root, language, async (answers) => {
    const flow = await SurveyFlow.begin(client, answers);
    window.sessionStorage.setItem("survey_session_id", flow.plan.session_id);
    new SurveyView(root, flow, language).render();
  });
}

if (typeof document !== "undefined" && document.getElementById("survey-root")) {
  void mount(document.getElementById("survey-root")!);
}

export { STRINGS };
