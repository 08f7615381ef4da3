/** JSON shapes of the what-if service API. */

export interface IndexPeriodJson {
  start: string;
  end: string;
  enrollment_start: string | null;
  enrollment_end: string | null;
  lookback_years: number | null;
}

export interface VariableInfo {
  name: string;
  canonical_unit: string;
  observed_min: number | null;
  observed_max: number | null;
  uln: number | null;
}

export interface VariablesResponse {
  variables: VariableInfo[];
  n_patients: number;
  missing_policies: string[];
  grade_presets: Record<string, Record<string, number>>;
  default_icd_prefix: string;
  default_index_period: IndexPeriodJson;
  trials: string[];
}

export interface CriterionJson {
  variable: string;
  lower: number | null;
  upper: number | null;
  lower_inclusive: boolean;
  upper_inclusive: boolean;
  unit: string;
  source?: unknown;
}

export interface NonComputableJson {
  variable: string;
  reason: string;
  detail: string;
}

export interface TrialCriteriaResponse {
  trial_id: string;
  title: string;
  criteria: CriterionJson[];
  non_computable: NonComputableJson[];
  unattached_bounds: number;
  icd_prefix: string;
  index_period: IndexPeriodJson;
  missing_policy: string;
}

export interface OverrideJson {
  variable: string;
  side: "lower" | "upper";
  value?: number;
  remove?: boolean;
  additive?: boolean;
}

export interface ScenarioPayload {
  label: string;
  base: CriterionJson[];
  overrides: OverrideJson[];
  index_period: IndexPeriodJson;
  icd_prefix: string;
  missing_policy: string;
}

export interface AttritionStep {
  criterion: string;
  remaining: number;
}

export interface Report {
  scenario_label: string;
  sc_count: number;
  tc_count: number;
  score: number;
  percent: string;
  attrition: AttritionStep[];
  missing_policy: string;
  warnings: string[];
  scenario_hash: string | null;
}

export interface ComparisonRow {
  label: string;
  sc_count: number;
  tc_count: number;
  score: number;
  percent: string;
  delta_pp: number;
  delta: string;
}

export interface CompareResponse {
  rows: ComparisonRow[];
  reports: Report[];
}

export interface ApiError {
  error: string;
  detail: string;
}
