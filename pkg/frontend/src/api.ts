import type {
  ApiError,
  CompareResponse,
  Report,
  ScenarioPayload,
  TrialCriteriaResponse,
  VariablesResponse,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly kind: string,
    public readonly detail: string,
    public readonly status: number,
  ) {
    super(`${kind}: ${detail}`);
  }
}

interface EvaluateResult {
  seq: number;
  report: Report;
}

/**
 * Typed client for the what-if service. Evaluation requests carry sequence
 * numbers and cancel their predecessor, so at most one evaluation is in
 * flight and concurrent responses resolve latest-wins.
 */
export class ApiClient {
  private seq = 0;
  private controller: AbortController | null = null;
  private activeEvaluations = 0;

  /** High-water mark of concurrently active (non-canceled) evaluations. */
  maxActiveEvaluations = 0;

  constructor(readonly baseUrl: string) {}

  latestSeq(): number {
    return this.seq;
  }

  activeCount(): number {
    return this.activeEvaluations;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      const err = body as ApiError;
      throw new ServiceError(err.error ?? "HttpError", err.detail ?? "", response.status);
    }
    return body as T;
  }

  getVariables(): Promise<VariablesResponse> {
    return this.request<VariablesResponse>("/variables");
  }

  getTrialCriteria(trialId: string): Promise<TrialCriteriaResponse> {
    return this.request<TrialCriteriaResponse>(`/trials/${encodeURIComponent(trialId)}/criteria`);
  }

  /**
   * POST /scenarios/evaluate with cancellation of any in-flight evaluation.
   * Returns the sequence number so callers can drop stale responses.
   */
  async evaluate(payload: ScenarioPayload): Promise<EvaluateResult> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const seq = ++this.seq;

    let counted = true;
    this.activeEvaluations += 1;
    this.maxActiveEvaluations = Math.max(this.maxActiveEvaluations, this.activeEvaluations);
    const release = () => {
      if (counted) {
        counted = false;
        this.activeEvaluations -= 1;
      }
    };
    controller.signal.addEventListener("abort", release);

    try {
      const report = await this.request<Report>("/scenarios/evaluate", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
        signal: controller.signal,
      });
      return { seq, report };
    } finally {
      release();
    }
  }

  compare(payloads: ScenarioPayload[]): Promise<CompareResponse> {
    return this.request<CompareResponse>("/scenarios/compare", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ scenarios: payloads }),
    });
  }
}
