import type {
  ApiErrorDoc,
  ComparisonDoc,
  IssueDetailDoc,
  IssueDoc,
  IssueListDoc,
  LaunchDoc,
  ReportDoc,
  ResultDoc,
  RunDoc,
  TestDoc,
  TrendDoc,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: ApiErrorDoc["code"],
    message: string,
    public detail?: unknown,
  ) {
    super(message);
  }

  /** Field-level violations as delivered by the server, when present. */
  violations(): { field: string; rule: string }[] {
    if (Array.isArray(this.detail)) {
      return this.detail.filter(
        (entry): entry is { field: string; rule: string } =>
          typeof entry === "object" && entry !== null && "field" in entry && "rule" in entry,
      );
    }
    return [];
  }
}

export interface IssueQuery {
  tag?: string;
  status?: string;
  q?: string;
}

export interface CreateIssuePayload {
  title: string;
  description: string;
  tags: string[];
  feedback?: Partial<{ user_input: string; model_output: string; signal: string; source_model: string }>[];
}

export interface CreateTestPayload {
  input_prompt: string;
  reference_answer?: string;
  judge_template: string;
  judge_guidelines: string[];
  inherit_from?: string;
}

export interface LaunchRunPayload {
  target_model: string | object;
  judge_models: (string | object)[];
  selection: { tags?: string[]; test_ids?: string[]; issue_ids?: string[] };
}

export interface OverridePayload {
  score: number;
  justification: string;
  annotator: string;
}

/** Everything the console needs from the server; views depend only on this. */
export interface Api {
  listIssues(query?: IssueQuery): Promise<IssueListDoc>;
  getIssue(issueId: string): Promise<IssueDetailDoc>;
  createIssue(payload: CreateIssuePayload): Promise<IssueDoc>;
  addTest(issueId: string, payload: CreateTestPayload): Promise<TestDoc>;
  attachFeedback(issueId: string, payload: object): Promise<IssueDoc>;
  launchRun(payload: LaunchRunPayload): Promise<LaunchDoc>;
  listRuns(): Promise<{ runs: RunDoc[] }>;
  getRun(runId: string): Promise<RunDoc>;
  getReport(runId: string): Promise<ReportDoc>;
  getResults(runId: string): Promise<{ results: ResultDoc[] }>;
  overrideResult(resultId: string, payload: OverridePayload): Promise<ResultDoc>;
  compare(runA: string, runB: string): Promise<ComparisonDoc>;
  trend(runIds: string[], groupBy: "overall" | "domain"): Promise<TrendDoc>;
}

export class HttpApi implements Api {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: object): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body ? { "Content-Type": "application/json" } : undefined,
      body: body ? JSON.stringify(body) : undefined,
    });
    const payload = await response.json();
    if (!response.ok) {
      const err = payload as ApiErrorDoc;
      throw new ApiError(response.status, err.code ?? "internal", err.message ?? "error", err.detail);
    }
    return payload as T;
  }

  listIssues(query: IssueQuery = {}) {
    const params = new URLSearchParams();
    if (query.tag) params.set("tag", query.tag);
    if (query.status) params.set("status", query.status);
    if (query.q) params.set("q", query.q);
    const suffix = params.toString() ? `?${params}` : "";
    return this.request<IssueListDoc>("GET", `/issues${suffix}`);
  }

  getIssue(issueId: string) {
    return this.request<IssueDetailDoc>("GET", `/issues/${issueId}`);
  }

  createIssue(payload: CreateIssuePayload) {
    return this.request<IssueDoc>("POST", "/issues", payload);
  }

  addTest(issueId: string, payload: CreateTestPayload) {
    return this.request<TestDoc>("POST", `/issues/${issueId}/tests`, payload);
  }

  attachFeedback(issueId: string, payload: object) {
    return this.request<IssueDoc>("POST", `/issues/${issueId}/feedback`, payload);
  }

  launchRun(payload: LaunchRunPayload) {
    return this.request<LaunchDoc>("POST", "/runs", payload);
  }

  listRuns() {
    return this.request<{ runs: RunDoc[] }>("GET", "/runs");
  }

  getRun(runId: string) {
    return this.request<RunDoc>("GET", `/runs/${runId}`);
  }

  getReport(runId: string) {
    return this.request<ReportDoc>("GET", `/runs/${runId}/report`);
  }

  getResults(runId: string) {
    return this.request<{ results: ResultDoc[] }>("GET", `/runs/${runId}/results`);
  }

  overrideResult(resultId: string, payload: OverridePayload) {
    return this.request<ResultDoc>("POST", `/results/${resultId}/override`, payload);
  }

  compare(runA: string, runB: string) {
    return this.request<ComparisonDoc>(
      "GET",
      `/compare?a=${encodeURIComponent(runA)}&b=${encodeURIComponent(runB)}`,
    );
  }

  trend(runIds: string[], groupBy: "overall" | "domain" = "overall") {
    return this.request<TrendDoc>(
      "GET",
      `/trend?runs=${encodeURIComponent(runIds.join(","))}&group_by=${groupBy}`,
    );
  }
}
