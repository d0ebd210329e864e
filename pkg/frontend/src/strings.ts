/** Instrument text, externalized so both language renderings ship together. */

export type Language = "en" | "zh";

export interface InstrumentStrings {
  screeningTitle: string;
  screeningResident: string;
  screeningUsesDelivery: string;
  screeningFailed: string;
  yes: string;
  no: string;
  accessTitle: string;
  accessKeep: string;
  accessForgo: (amount: number) => string;
  attributeTitle: (scenario: string) => string;
  scenarioWork: string;
  scenarioHome: string;
  optionA: string;
  optionB: string;
  waitingLabel: string;
  costLabel: string;
  unrelLabel: string;
  minutes: (n: number) => string;
  yuan: (n: number) => string;
  plusMinusMinutes: (n: number) => string;
  progress: (done: number, total: number) => string;
  completed: string;
  submitting: string;
}

export const STRINGS: Record<Language, InstrumentStrings> = {
  en: {
    screeningTitle: "Before we start",
    screeningResident: "Do you live in this city?",
    screeningUsesDelivery: "Do you order food delivery regularly?",
    screeningFailed: "Thanks for your interest. This survey needs regular delivery users living in the city.",
    yes: "Yes",
    no: "No",
    accessTitle: "Keep the service or take the payment?",
    accessKeep: "Keep using food delivery as usual for the next month.",
    accessForgo: (amount) =>
      `Give up all food delivery for one month and receive ¥${amount} in cash.`,
    attributeTitle: (scenario) => `Choose a delivery option (ordering at ${scenario})`,
    scenarioWork: "work",
    scenarioHome: "home",
    optionA: "Option A",
    optionB: "Option B",
    waitingLabel: "Waiting time",
    costLabel: "Cost",
    unrelLabel: "Arrival window",
    minutes: (n) => `${n} minutes`,
    yuan: (n) => `¥${n}`,
    plusMinusMinutes: (n) => `±${n} minutes`,
    progress: (done, total) => `Question ${done} of ${total}`,
    completed: "All done. Thank you!",
    submitting: "Saving your answer…",
  },
  zh: {
    screeningTitle: "开始之前",
    screeningResident: "您居住在本市吗？",
    screeningUsesDelivery: "您经常点外卖吗？",
    screeningFailed: "感谢您的参与。本问卷面向居住在本市且经常使用外卖的用户。",
    yes: "是",
    no: "否",
    accessTitle: "继续使用外卖，还是接受补偿？",
    accessKeep: "下个月像往常一样继续使用外卖服务。",
    accessForgo: (amount) => `下个月放弃所有外卖服务，并获得 ¥${amount} 现金补偿。`,
    attributeTitle: (scenario) => `请选择一个外卖方案（${scenario}场景）`,
    scenarioWork: "工作",
    scenarioHome: "居家",
    optionA: "方案 A",
    optionB: "方案 B",
    waitingLabel: "等待时间",
    costLabel: "费用",
    unrelLabel: "送达误差",
    minutes: (n) => `${n} 分钟`,
    yuan: (n) => `¥${n}`,
    plusMinusMinutes: (n) => `±${n} 分钟`,
    progress: (done, total) => `第 ${done} 题，共 ${total} 题`,
    completed: "全部完成，感谢您的参与！",
    submitting: "正在保存您的回答…",
  },
};
