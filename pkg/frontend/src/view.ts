/** DOM rendering: one screen at a time, two option cards, fixed attribute
 * row order across every task, progress line, buttons disabled while an
 * answer is in flight. */

import type { SurveyFlow, Screen } from "./flow.js";
import { STRINGS, type Language } from "./strings.js";
import type { AlternativeView } from "./types.js";

export class SurveyView {
  private readonly strings;

  constructor(
    private readonly root: HTMLElement,
    private readonly flow: SurveyFlow,
    language: Language = "en",
    private readonly doc: Document = root.ownerDocument,
  ) {
    this.strings = STRINGS[language];
  }

  render(): void {
    this.root.replaceChildren();
    const screen = this.flow.screen;
    const { done, total } = this.flow.progress;
    if (screen.kind === "sbdc" || screen.kind === "sce") {
      this.root.appendChild(this.el("p", this.strings.progress(done + 1, total), "progress"));
    }
    switch (screen.kind) {
      case "screened_out":
        this.root.appendChild(this.el("p", this.strings.screeningFailed, "screened-out"));
        break;
      case "sbdc":
        this.renderSbdc(screen);
        break;
      case "sce":
        this.renderSce(screen);
        break;
      case "done":
        this.root.appendChild(this.el("p", this.strings.completed, "completed"));
        break;
    }
  }

  private renderSbdc(screen: Extract<Screen, { kind: "sbdc" }>): void {
    this.root.appendChild(this.el("h2", this.strings.accessTitle));
    const cards = this.el("div", null, "cards");
    cards.appendChild(this.optionCard(this.strings.optionA, [this.strings.accessKeep], () =>
      this.answer(() => this.flow.answerSbdc(false)),
    ));
    cards.appendChild(
      this.optionCard(this.strings.optionB, [this.strings.accessForgo(screen.amount)], () =>
        this.answer(() => this.flow.answerSbdc(true)),
      ),
    );
    this.root.appendChild(cards);
  }

  private renderSce(screen: Extract<Screen, { kind: "sce" }>): void {
    const scenarioLabel =
      screen.scenario === "work" ? this.strings.scenarioWork : this.strings.scenarioHome;
    this.root.appendChild(this.el("h2", this.strings.attributeTitle(scenarioLabel)));
    const cards = this.el("div", null, "cards");
    screen.task.alternatives.forEach((alternative, index) => {
      const title = index === 0 ? this.strings.optionA : this.strings.optionB;
      cards.appendChild(
        this.optionCard(title, this.attributeRows(alternative), () =>
          this.answer(() => this.flow.answerSce(index)),
        ),
      );
    });
    this.root.appendChild(cards);
  }

  /** Attribute rows in fixed order: waiting time, cost, arrival window. */
  private attributeRows(alternative: AlternativeView): string[] {
    return [
      `${this.strings.waitingLabel}: ${this.strings.minutes(alternative.wait)}`,
      `${this.strings.costLabel}: ${this.strings.yuan(alternative.cost)}`,
      `${this.strings.unrelLabel}: ${this.strings.plusMinusMinutes(alternative.unrel)}`,
    ];
  }

  private optionCard(title: string, rows: string[], onPick: () => void): HTMLElement {
    const card = this.el("div", null, "card");
    card.appendChild(this.el("h3", title));
    for (const row of rows) {
      card.appendChild(this.el("p", row, "attribute-row"));
    }
    const button = this.doc.createElement("button");
    button.textContent = title;
    button.addEventListener("click", onPick);
    card.appendChild(button);
    return card;
  }

  private async answer(submit: () => Promise<void>): Promise<void> {
    if (this.flow.busy) return;
    this.setButtonsDisabled(true);
    this.root.appendChild(this.el("p", this.strings.submitting, "submitting"));
    try {
      await submit();
    } finally {
      this.render();
    }
  }

  private setButtonsDisabled(disabled: boolean): void {
    for (const button of Array.from(this.root.querySelectorAll("button"))) {
      (button as HTMLButtonElement).disabled = disabled;
    }
  }

  private el(tag: string, text: string | null, className?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    if (text !== null) node.textContent = text;
    if (className) node.className = className;
    return node;
  }
}

/** The pre-session screening form: two yes/no questions, one submission. */
export function renderScreeningForm(
  root: HTMLElement,
  language: Language,
  onSubmit: (answers: { resident: boolean; uses_delivery: boolean }) => void,
  doc: Document = root.ownerDocument,
): void {
  const strings = STRINGS[language];
  root.replaceChildren();
  const title = doc.createElement("h2");
  title.textContent = strings.screeningTitle;
  root.appendChild(title);

  const answers: { resident?: boolean; uses_delivery?: boolean } = {};
  const questions: Array<[keyof typeof answers, string]> = [
    ["resident", strings.screeningResident],
    ["uses_delivery", strings.screeningUsesDelivery],
  ];
  for (const [field, label] of questions) {
    const p = doc.createElement("p");
    p.textContent = label;
    root.appendChild(p);
    for (const value of [true, false]) {
      const button = doc.createElement("button");
      button.textContent = value ? strings.yes : strings.no;
      button.dataset.field = field;
      button.dataset.value = String(value);
      button.addEventListener("click", () => {
        answers[field] = value;
        if (answers.resident !== undefined && answers.uses_delivery !== undefined) {
          onSubmit({ resident: answers.resident, uses_delivery: answers.uses_delivery });
        }
      });
      root.appendChild(button);
    }
  }
}
