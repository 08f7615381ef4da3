import { ApiClient, ServiceError } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { ScenarioState, type Side } from "./state.js";
import type { ComparisonRow } from "./types.js";

export interface ControllerOptions {
  debounceMs?: number;
  onRender?: () => void;
}

/**
 * Wires state, debounce, and the API client together. Threshold changes are
 * debounced into a single evaluation; responses apply latest-wins via the
 * client's sequence numbers.
 */
export class DashboardController {
  readonly state: ScenarioState;
  readonly scheduleEvaluate: Debounced<[]>;
  comparison: ComparisonRow[] | null = null;
  serviceMessage: string | null = null;

  private renderHook: () => void;

  constructor(
    readonly api: ApiClient,
    options: ControllerOptions = {},
  ) {
    this.state = new ScenarioState();
    this.renderHook = options.onRender ?? (() => undefined);
    this.scheduleEvaluate = debounce(() => {
      void this.evaluateNow();
    }, options.debounceMs ?? 150);
  }

  private render(): void {
    this.renderHook();
  }

  async start(trialId?: string): Promise<void> {
    try {
      const variables = await this.api.getVariables();
      this.state.loadVariables(variables);
      const chosen = trialId ?? variables.trials[0];
      if (chosen) {
        await this.loadTrial(chosen);
      }
    } catch {
      this.state.markUnreachable();
    }
    this.render();
  }

  async loadTrial(trialId: string): Promise<void> {
    this.state.loadTrial(await this.api.getTrialCriteria(trialId));
    this.comparison = null;
    await this.evaluateNow();
  }

  /** Slider handler: validate + clamp, then debounce one evaluation. */
  onThresholdChange(variable: string, side: Side, value: number): void {
    if (!this.state.setThreshold(variable, side, value)) {
      this.render(); // inline validation message; previous score retained
      return;
    }
    this.scheduleEvaluate();
    this.render();
  }

  applyPreset(grade: string): void {
    const thresholds = this.presetThresholds(grade);
    if (!thresholds) return;
    this.state.applyPreset(thresholds);
    this.scheduleEvaluate();
    this.render();
  }

  private presets: Record<string, Record<string, number>> = {};

  setPresets(presets: Record<string, Record<string, number>>): void {
    this.presets = presets;
  }

  presetThresholds(grade: string): Record<string, number> | undefined {
    return this.presets[grade];
  }

  presetThresholdsAll(): Record<string, Record<string, number>> {
    return this.presets;
  }

  async evaluateNow(): Promise<void> {
    let payload;
    try {
      payload = this.state.toScenario(this.state.trialId || "scenario");
    } catch {
      return; // nothing loaded yet
    }
    try {
      const { seq, report } = await this.api.evaluate(payload);
      if (seq !== this.api.latestSeq()) {
        return; // a newer evaluation superseded this one
      }
      this.state.applyReport(report);
      this.serviceMessage = null;
    } catch (error) {
      if (error instanceof ServiceError) {
        this.serviceMessage = `${error.kind}: ${error.detail}`;
      } else if ((error as Error).name === "AbortError") {
        return; // canceled by a newer request; keep previous score
      } else {
        this.state.markUnreachable();
      }
    }
    this.render();
  }

  /** Waits until no evaluation is pending or in flight (test hook). */
  async settled(pollMs = 10): Promise<void> {
    for (;;) {
      if (
        !this.scheduleEvaluate.pending() &&
        this.api.activeCount() === 0 &&
        this.state.lastReport !== null
      ) {
        return;
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }

  pinCurrent(label?: string): void {
    const name = label ?? `${this.state.trialId} #${this.state.pinned.length + 1}`;
    this.state.pin(name);
    this.render();
  }

  async compare(): Promise<void> {
    if (!this.state.canCompare()) {
      return;
    }
    try {
      const response = await this.api.compare(this.state.pinned.map((p) => p.payload));
      this.comparison = response.rows;
      this.serviceMessage = null;
    } catch (error) {
      if (error instanceof ServiceError) {
        this.serviceMessage = `${error.kind}: ${error.detail}`;
      } else {
        this.state.markUnreachable();
      }
    }
    this.render();
  }
}
