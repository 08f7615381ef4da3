import type { AttritionStep } from "./types.js";

export interface FunnelBar {
  label: string;
  remaining: number;
  /** Width relative to the target count, in [0, 1]. */
  fraction: number;
}

/** Geometry for the attrition funnel; widths are relative to the target. */
export function funnelBars(steps: AttritionStep[]): FunnelBar[] {
  if (steps.length === 0) return [];
  const total = steps[0].remaining;
  return steps.map((step) => ({
    label: step.criterion,
    remaining: step.remaining,
    fraction: total > 0 ? step.remaining / total : 0,
  }));
}
