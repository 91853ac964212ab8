import { EngineError, raiseForStatus } from "./errors.js";
import type {
  AuditMetrics,
  CriterionLabel,
  FilterInstance,
  GenrmReward,
  RolloutBreakdown,
  Rubric,
  ScoreGroupOptions,
  ScoreResult,
  ScoringOutput,
  TaskRequest,
  VerifyResult,
} from "./types.js";

export interface BoundEngineOptions {
  /** Service base URL, e.g. http://127.0.0.1:8000 */
  baseUrl: string;
  /** Default remap threshold used by scoreGroup when none is given. */
  tau?: number;
  /** Per-request timeout in milliseconds. */
  timeoutMs?: number;
}

/**
 * A client bound to one rubric-rewards service instance. All state
 * (base URL, default tau) is per-engine; engines never share anything.
 */
export class BoundEngine {
  private readonly baseUrl: string;
  private readonly tau: number | undefined;
  private readonly timeoutMs: number;

  constructor(options: BoundEngineOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.tau = options.tau;
    this.timeoutMs = options.timeoutMs ?? 30_000;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal: AbortSignal.timeout(this.timeoutMs),
    });
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    const response = await fetch(`${this.baseUrl}/health`, {
      signal: AbortSignal.timeout(this.timeoutMs),
    });
    await raiseForStatus(response);
    return (await response.json()) as { status: string; version: string };
  }

  /** Score one target/predict verifier-call pair. */
  async verifyCall(targetCall: string, predictCall: string): Promise<VerifyResult> {
    return this.post<VerifyResult>("/verify", {
      target_call: targetCall,
      predict_call: predictCall,
    });
  }

  /** Score a single rubric/scoring pair. */
  async score(rubric: Rubric, scoring: ScoringOutput, strict = false): Promise<ScoreResult> {
    return this.post<ScoreResult>("/score", { rubric, scoring, strict });
  }

  /** Full group pipeline: per-rollout reward breakdowns with advantages. */
  async scoreGroup(
    rubric: Rubric,
    scorings: ScoringOutput[],
    responseLengths: number[],
    options: ScoreGroupOptions = {},
  ): Promise<RolloutBreakdown[]> {
    const tau = options.tau ?? this.tau;
    const body: Record<string, unknown> = {
      rubric,
      scorings,
      response_lengths: responseLengths,
    };
    if (tau !== undefined) body.tau = tau;
    if (options.responses !== undefined) body.responses = options.responses;
    if (options.maxLength !== undefined) body.max_length = options.maxLength;
    if (options.strict !== undefined) body.strict = options.strict;
    if (options.remap !== undefined) body.remap = options.remap;
    if (options.formatRules !== undefined) body.format_rules = options.formatRules;
    const result = await this.post<{ rollouts: RolloutBreakdown[] }>("/score-group", body);
    return result.rollouts;
  }

  /** Offline instance filtering; returns retained instance ids. */
  async filter(instances: FilterInstance[], mode: "any" | "essential" = "any"): Promise<string[]> {
    const result = await this.post<{ retained: string[] }>("/filter", { instances, mode });
    return result.retained;
  }

  async audit(records: unknown[]): Promise<{ metrics: AuditMetrics; report: string }> {
    return this.post<{ metrics: AuditMetrics; report: string }>("/audit", { records });
  }

  async aggregateLabels(
    rubric: Rubric,
    teachers: { teacher_id: string; scoring: ScoringOutput }[],
  ): Promise<CriterionLabel[]> {
    const result = await this.post<{ labels: CriterionLabel[] }>("/labels", { rubric, teachers });
    return result.labels;
  }

  async genrmReward(rubric: Rubric, output: string, labels: CriterionLabel[]): Promise<GenrmReward> {
    return this.post<GenrmReward>("/genrm-reward", { rubric, output, labels });
  }

  /** Ask the service to obtain a scoring through its configured transport. */
  async requestScoring(task: TaskRequest): Promise<ScoringOutput> {
    const result = await this.post<{ scoring: ScoringOutput }>("/request-scoring", task);
    return result.scoring;
  }
}

export { EngineError };
