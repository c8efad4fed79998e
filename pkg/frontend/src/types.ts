/**
 * Client-side mirrors of the API payloads.
 *
 * Every displayed number originates from one of these documents as
 * delivered by the server; the console never recomputes pass/fail
 * semantics or rates.
 */

export interface TagDoc {
  kind: "domain" | "task_type" | "custom";
  value: string;
}

export interface IssueDoc {
  id: string;
  title: string;
  description: string;
  status: "open" | "monitoring" | "resolved" | "wontfix";
  tags: TagDoc[];
  feedback_ids: string[];
  created_at: string;
  updated_at: string;
  status_history?: { from_status: string; to_status: string; at: string }[];
  hidden?: boolean;
}

export interface TestDoc {
  id: string;
  issue_id: string;
  input_prompt: string;
  reference_answer: string | null;
  judge_template: "T1" | "T2" | "T3";
  judge_guidelines: string[];
  created_at: string;
}

export interface FeedbackDoc {
  id: string;
  user_input: string;
  model_output: string;
  signal: "thumbs_down" | "thumbs_up" | "note";
  source_model: string;
  received_at: string;
}

export interface IssueDetailDoc extends IssueDoc {
  tests: TestDoc[];
  feedback: FeedbackDoc[];
}

export interface IssueListDoc {
  issues: IssueDoc[];
  total: number;
}

export interface ProgressDoc {
  total: number;
  inferred: number;
  judged: number;
  errored: number;
}

export interface ModelRefDoc {
  provider: "openai_compatible" | "ollama";
  base_url: string;
  model_name: string;
  generation_params?: { temperature: number; max_tokens: number; seed: number | null };
}

export interface RunDoc {
  id: string;
  target_model: ModelRefDoc;
  judge_models: ModelRefDoc[];
  status: "pending" | "running" | "completed" | "failed";
  resolved_test_ids: string[];
  result_ids?: string[];
  progress: ProgressDoc;
  created_at: string;
  started_at?: string | null;
  finished_at?: string | null;
}

export interface VerdictDoc {
  judge_model: string;
  score: number | null;
  justification: string;
  raw_reply: string;
  validity: "valid" | "invalid";
  invalid_reason?: string | null;
}

export interface OverrideDoc {
  score: number;
  justification: string;
  annotator: string;
  created_at: string;
}

export interface ResultDoc {
  id: string;
  run_id: string;
  test_id: string;
  model_output: string;
  verdicts: VerdictDoc[];
  mean_score: number | null;
  determination: "pass" | "fail" | "undetermined" | "inference_error";
  override?: OverrideDoc | null;
  override_history?: OverrideDoc[];
  error_detail?: string | null;
  created_at: string;
}

export interface TotalsDoc {
  passed: number;
  failed: number;
  undetermined: number;
  inference_error: number;
}

export interface GroupBreakdownDoc {
  key: string;
  counts: TotalsDoc;
  pass_rate_pct: number | null;
  failure_rate_pct: number | null;
  mean_score_pct: number | null;
}

export interface ReportDoc {
  run_id: string;
  model: string;
  totals: TotalsDoc;
  pass_rate_pct: number | null;
  mean_score_pct: number | null;
  per_issue: GroupBreakdownDoc[];
  per_tag: GroupBreakdownDoc[];
  generated_at: string;
  multi_domain_issue_ids?: string[];
}

export type Relation = "outperform" | "underperform" | "match";

export interface RelationCountsDoc {
  outperform: number;
  underperform: number;
  match: number;
}

export interface TestComparisonDoc {
  test_id: string;
  issue_id: string;
  domains: string[];
  score_a: number;
  score_b: number;
  relation: Relation;
}

export interface ComparisonDoc {
  run_a: string;
  run_b: string;
  shared_test_ids: string[];
  per_test: TestComparisonDoc[];
  counts: RelationCountsDoc;
  per_tag: Record<string, RelationCountsDoc>;
}

export interface TrendPointDoc {
  run_id: string;
  started_at: string;
  pass_rate_pct: number | null;
  mean_score_pct: number | null;
}

export interface TrendSeriesDoc {
  group_key: string;
  points: TrendPointDoc[];
}

export interface TrendDoc {
  series: TrendSeriesDoc[];
}

export interface LaunchDoc {
  run_id: string;
  status: string;
}

export interface ApiErrorDoc {
  code: "not_found" | "validation_failed" | "conflict" | "upstream_unavailable" | "internal";
  message: string;
  detail?: unknown;
}
