import { ApiClient } from "./api.js";
import { DashboardController } from "./controller.js";
import { funnelBars } from "./funnel.js";

const SLIDER_STEPS = 200;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmt(value: number | null): string {
  return value === null ? "—" : String(Math.round(value * 10000) / 10000);
}

export function mountDashboard(root: HTMLElement, baseUrl: string): DashboardController {
  const api = new ApiClient(baseUrl);
  const controller = new DashboardController(api, { onRender: render });

  const banner = el("div", "banner hidden");
  const header = el("div", "header");
  const trialSelect = el("select", "trial-select");
  const policySelect = el("select", "policy-select");
  const presetRow = el("div", "presets");
  const scoreBox = el("div", "score");
  const slidersBox = el("div", "sliders");
  const funnelBox = el("div", "funnel");
  const pinButton = el("button", "", "Pin scenario");
  const compareButton = el("button", "", "Compare pinned");
  const compareBox = el("div", "comparison");
  header.append(trialSelect, policySelect, presetRow);
  root.append(banner, header, scoreBox, slidersBox, funnelBox, pinButton, compareButton, compareBox);

  trialSelect.addEventListener("change", () => {
    void controller.loadTrial(trialSelect.value);
  });
  policySelect.addEventListener("change", () => {
    controller.state.missingPolicy = policySelect.value;
    controller.scheduleEvaluate();
  });
  pinButton.addEventListener("click", () => controller.pinCurrent());
  compareButton.addEventListener("click", () => void controller.compare());

  let optionsBuilt = false;

  function buildStatics(): void {
    const state = controller.state;
    trialSelect.replaceChildren();
    policySelect.replaceChildren();
    presetRow.replaceChildren();
    for (const policy of ["exclude", "include"]) {
      const option = el("option", "", policy);
      option.value = policy;
      policySelect.append(option);
    }
    policySelect.value = state.missingPolicy;
    for (const grade of Object.keys(controller.presetThresholdsAll())) {
      const button = el("button", "preset", `CTCAE ${grade}`);
      button.addEventListener("click", () => controller.applyPreset(grade));
      presetRow.append(button);
    }
    optionsBuilt = true;
  }

  function render(): void {
    const state = controller.state;
    if (state.status === "unreachable") {
      banner.textContent = "Service unreachable — controls disabled.";
      banner.classList.remove("hidden");
      slidersBox.querySelectorAll("input").forEach((i) => (i.disabled = true));
      return;
    }
    banner.classList.toggle("hidden", !state.validationError && !controller.serviceMessage);
    banner.textContent = state.validationError ?? controller.serviceMessage ?? "";

    if (!optionsBuilt && state.status === "ready") buildStatics();

    scoreBox.textContent = state.displayedScore;
    scoreBox.title = state.lastReport
      ? `${state.lastReport.sc_count} of ${state.lastReport.tc_count} target patients`
      : "";

    slidersBox.replaceChildren();
    if (state.variables.length === 0 && state.status === "ready") {
      slidersBox.append(el("p", "empty", "No computable variables in the patient store."));
    }
    for (const control of state.sliderPlan()) {
      const row = el("div", "slider-row");
      const comparator = control.side === "lower" ? "≥" : "≤";
      const shown = control.value === null ? "no threshold" : `${comparator} ${fmt(control.value)}`;
      const label = el("label", "", `${control.variable} ${shown} ${control.unit}`);
      const input = el("input");
      input.type = "range";
      input.min = String(control.min);
      input.max = String(control.max);
      input.step = String((control.max - control.min) / SLIDER_STEPS);
      input.value = String(control.value ?? control.min);
      if (control.value === null) input.classList.add("inactive");
      input.addEventListener("input", () => {
        controller.onThresholdChange(control.variable, control.side, Number(input.value));
      });
      row.append(label, input);
      slidersBox.append(row);
    }

    funnelBox.replaceChildren(el("h3", "", "Attrition"));
    if (state.lastReport) {
      for (const bar of funnelBars(state.lastReport.attrition)) {
        const row = el("div", "funnel-row");
        const fill = el("div", "funnel-fill");
        fill.style.width = `${(bar.fraction * 100).toFixed(1)}%`;
        fill.textContent = `${bar.remaining}`;
        row.append(fill, el("span", "funnel-label", bar.label));
        funnelBox.append(row);
      }
    }

    compareButton.disabled = !state.canCompare();
    compareBox.replaceChildren();
    if (controller.comparison) {
      const table = el("table");
      const head = el("tr");
      for (const column of ["scenario", "study", "target", "score", "delta"]) {
        head.append(el("th", "", column));
      }
      table.append(head);
      for (const row of controller.comparison) {
        const tr = el("tr");
        tr.append(
          el("td", "", row.label),
          el("td", "", String(row.sc_count)),
          el("td", "", String(row.tc_count)),
          el("td", "", row.percent),
          el("td", "", row.delta),
        );
        table.append(tr);
      }
      compareBox.append(table);
    }
  }

  void api.getVariables().then((variables) => {
    controller.setPresets(variables.grade_presets);
    for (const trialId of variables.trials) {
      const option = el("option", "", trialId);
      option.value = trialId;
      trialSelect.append(option);
    }
  }).catch(() => undefined);
  void controller.start();
  return controller;
}
