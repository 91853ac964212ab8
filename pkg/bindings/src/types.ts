/** Wire types mirroring the rubric-rewards service models. */

export interface CriterionSpec {
  criterion: string;
  /** Ground-truth text, or a target-side verifier call string. */
  reference: string;
  weight: number;
}

export interface Rubric {
  essential: CriterionSpec[];
  additional?: CriterionSpec[];
}

export interface CriterionRecord {
  criterion: string;
  rationale: string;
  /** Discrete credit (0 | 0.5 | 1) or a predict-side verifier call string. */
  credit: number | string;
}

export interface ScoringOutput {
  thought: string;
  essential: CriterionRecord[];
  additional?: CriterionRecord[];
}

export interface VerifyResult {
  score: number;
  verifier: string;
}

export interface CriterionScore {
  raw: number;
  path: "verifier" | "judge";
  rationale: string;
}

export interface ScoreResult {
  scores: CriterionScore[];
  pairing_ok: boolean;
}

export interface FormatRules {
  repetition_enabled?: boolean;
  repetition_ngram?: number;
  max_repetition_ngram_fraction?: number;
  language_enabled?: boolean;
  expected_script?: string | null;
  max_foreign_char_fraction?: number;
}

export interface RolloutBreakdown {
  raw: number[];
  remapped: number[];
  base: number;
  content_mask: number;
  format_mask: number;
  final: number;
  advantage: number;
}

export interface ScoreGroupOptions {
  responses?: string[];
  tau?: number;
  maxLength?: number;
  strict?: boolean;
  remap?: boolean;
  formatRules?: FormatRules;
}

export interface FilterInstance {
  id: string;
  ctypes: string[];
  scores: number[][];
}

export interface CategoryFpr {
  average: number;
  arguments: number;
  credit: number;
}

export interface AuditMetrics {
  schema_acc: number;
  criterion_acc: number;
  execution_acc: number;
  execution_acc_by_record: number;
  argument_acc: number;
  credit_acc: number;
  criterion_level_acc: number;
  sample_level_acc: number;
  fpr_by_category: Record<string, CategoryFpr>;
}

export interface CriterionLabel {
  credit: number;
  extracted_value?: unknown;
}

export interface GenrmReward {
  format_reward: number;
  content_reward: number;
  reward: number;
}

export interface TaskRequest {
  prompt_text: string;
  response: string;
  response_length?: number;
  image_ref?: string;
  instance_id?: string;
  rubric: Rubric;
  exposure?: "minimal" | "unlimited";
  retries?: number;
}
