import type {
  CriterionJson,
  IndexPeriodJson,
  OverrideJson,
  Report,
  ScenarioPayload,
  TrialCriteriaResponse,
  VariableInfo,
  VariablesResponse,
} from "./types.js";

export type Side = "lower" | "upper";

export interface SliderSetting {
  lower: number | null;
  upper: number | null;
}

export interface SliderControl {
  variable: string;
  side: Side;
  /** Current threshold; null renders an inactive control (no criterion yet). */
  value: number | null;
  min: number;
  max: number;
  unit: string;
}

export type Status = "loading" | "ready" | "unreachable";

export interface PinnedScenario {
  label: string;
  payload: ScenarioPayload;
}

/**
 * Dashboard scenario state. Slider values are clamped to the observed value
 * range the service reported; every displayed score is a verbatim service
 * string (the client never computes one itself).
 */
export class ScenarioState {
  status: Status = "loading";
  variables: VariableInfo[] = [];
  trialId = "";
  icdPrefix = "C50";
  indexPeriod: IndexPeriodJson | null = null;
  missingPolicy = "exclude";

  private base: CriterionJson[] = [];
  private sliders = new Map<string, SliderSetting>();

  /** Verbatim percent string from the last accepted report. */
  displayedScore = "—";
  lastReport: Report | null = null;
  validationError: string | null = null;

  pinned: PinnedScenario[] = [];

  loadVariables(response: VariablesResponse): void {
    this.variables = response.variables;
    this.icdPrefix = response.default_icd_prefix;
    this.indexPeriod = response.default_index_period;
    this.status = "ready";
  }

  markUnreachable(): void {
    this.status = "unreachable";
  }

  loadTrial(response: TrialCriteriaResponse): void {
    this.trialId = response.trial_id;
    this.base = response.criteria;
    this.icdPrefix = response.icd_prefix;
    this.indexPeriod = response.index_period;
    this.missingPolicy = response.missing_policy;
    this.sliders.clear();
    for (const criterion of response.criteria) {
      this.sliders.set(criterion.variable, {
        lower: criterion.lower,
        upper: criterion.upper,
      });
    }
    this.validationError = null;
  }

  variableInfo(name: string): VariableInfo | undefined {
    return this.variables.find((v) => v.name === name);
  }

  setting(variable: string): SliderSetting {
    return this.sliders.get(variable) ?? { lower: null, upper: null };
  }

  baseCriteria(): CriterionJson[] {
    return this.base;
  }

  clamp(variable: string, value: number): number {
    const info = this.variableInfo(variable);
    if (!info) return value;
    if (info.observed_min !== null && value < info.observed_min) return info.observed_min;
    if (info.observed_max !== null && value > info.observed_max) return info.observed_max;
    return value;
  }

  /**
   * Move one threshold. Returns false (and sets validationError, leaving the
   * previous value and score untouched) when the move would put the lower
   * bound above the upper bound.
   */
  setThreshold(variable: string, side: Side, rawValue: number): boolean {
    const value = this.clamp(variable, rawValue);
    const current = this.setting(variable);
    const next: SliderSetting = { ...current, [side]: value };
    if (next.lower !== null && next.upper !== null && next.lower > next.upper) {
      this.validationError =
        `${variable}: lower bound ${next.lower} exceeds upper bound ${next.upper}`;
      return false;
    }
    this.validationError = null;
    this.sliders.set(variable, next);
    return true;
  }

  applyPreset(thresholds: Record<string, number>): void {
    for (const [variable, value] of Object.entries(thresholds)) {
      this.setThreshold(variable, "lower", value);
    }
  }

  /**
   * One control per computable variable: sliders for each bound the current
   * setting carries, or a single inactive lower-bound control for variables
   * with no threshold yet (moving it adds an additive criterion).
   */
  sliderPlan(): SliderControl[] {
    const plan: SliderControl[] = [];
    for (const info of this.variables) {
      const min = info.observed_min ?? 0;
      const max = info.observed_max ?? 100;
      const common = { variable: info.name, min, max, unit: info.canonical_unit };
      const setting = this.sliders.get(info.name);
      if (!setting || (setting.lower === null && setting.upper === null)) {
        plan.push({ ...common, side: "lower", value: null });
        continue;
      }
      if (setting.lower !== null) plan.push({ ...common, side: "lower", value: setting.lower });
      if (setting.upper !== null) plan.push({ ...common, side: "upper", value: setting.upper });
    }
    return plan;
  }

  /** Overrides: every slider value that differs from the base criterion. */
  private overrides(): OverrideJson[] {
    const overrides: OverrideJson[] = [];
    const baseByVariable = new Map(this.base.map((c) => [c.variable, c]));
    const sides: Side[] = ["lower", "upper"];
    for (const [variable, setting] of this.sliders) {
      const base = baseByVariable.get(variable);
      for (const side of sides) {
        const value = setting[side];
        const baseValue = base ? base[side] : null;
        if (value === null && baseValue !== null) {
          overrides.push({ variable, side, remove: true });
        } else if (value !== null && value !== baseValue) {
          overrides.push({ variable, side, value, additive: base === undefined });
        }
      }
    }
    return overrides;
  }

  toScenario(label: string): ScenarioPayload {
    if (!this.indexPeriod) {
      throw new Error("no index period loaded");
    }
    return {
      label,
      base: this.base,
      overrides: this.overrides(),
      index_period: this.indexPeriod,
      icd_prefix: this.icdPrefix,
      missing_policy: this.missingPolicy,
    };
  }

  /** Accept a service report; the displayed score is its percent verbatim. */
  applyReport(report: Report): void {
    this.lastReport = report;
    this.displayedScore = report.percent;
  }

  pin(label: string): void {
    this.pinned.push({ label, payload: this.toScenario(label) });
  }

  canCompare(): boolean {
    return this.pinned.length >= 2;
  }
}
