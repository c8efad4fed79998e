import { ApiError, type Api } from "./api";
import { clear, fmtPct, h, svg } from "./dom";
import { pollRun } from "./poll";
import type { ReportDoc, ResultDoc, RunDoc, TotalsDoc } from "./types";

const SEGMENTS: (keyof TotalsDoc)[] = ["passed", "failed", "undetermined", "inference_error"];
const SEGMENT_COLORS: Record<string, string> = {
  passed: "#2e7d32",
  failed: "#c62828",
  undetermined: "#f9a825",
  inference_error: "#757575",
};

/**
 * Run launcher and test report: progress polling, pass/fail pie, per-issue
 * failure rates, per-result verdicts with justifications, and the human
 * override dialog. All numbers come from API payloads verbatim.
 */
export class RunAndReportView {
  private launchPanel: HTMLElement;
  private progressPanel: HTMLElement;
  private reportPanel: HTMLElement;
  private banner: HTMLElement;
  private currentRunId: string | null = null;

  constructor(
    private root: HTMLElement,
    private api: Api,
    private pollIntervalMs?: number,
  ) {
    this.launchPanel = h("section", { class: "launch-panel" });
    this.progressPanel = h("section", { class: "progress-panel" });
    this.reportPanel = h("section", { class: "report-panel" });
    this.banner = h("div", { class: "banner-slot" });
  }

  init(): void {
    clear(this.root).append(this.banner, this.renderLaunchForm(), this.progressPanel, this.reportPanel);
  }

  private renderLaunchForm(): HTMLElement {
    const model = h("input", { class: "launch-model", placeholder: "target model name" }) as HTMLInputElement;
    const judges = h("input", { class: "launch-judges", placeholder: "judge names, comma-separated" }) as HTMLInputElement;
    const tags = h("input", { class: "launch-tags", placeholder: "tag filter (optional)" }) as HTMLInputElement;
    const issueIds = h("input", { class: "launch-issue-ids", placeholder: "issue ids (optional)" }) as HTMLInputElement;
    const testIds = h("input", { class: "launch-test-ids", placeholder: "test ids (optional)" }) as HTMLInputElement;
    const form = h(
      "form",
      {
        class: "launch-form",
        onsubmit: (event) => {
          event.preventDefault();
          void this.launch({
            model: model.value.trim(),
            judges: judges.value.split(",").map((j) => j.trim()).filter(Boolean),
            tags: tags.value.split(",").map((t) => t.trim()).filter(Boolean),
            issueIds: issueIds.value.split(",").map((i) => i.trim()).filter(Boolean),
            testIds: testIds.value.split(",").map((t) => t.trim()).filter(Boolean),
          });
        },
      },
      h("h3", {}, "Launch run"),
      h("label", {}, "Target model", model),
      h("label", {}, "Judge panel", judges),
      h("label", {}, "Tags", tags),
      h("label", {}, "Issue ids", issueIds),
      h("label", {}, "Test ids", testIds),
      h("button", { type: "submit", class: "launch-submit" }, "Start run"),
    );
    clear(this.launchPanel).append(form);
    return this.launchPanel;
  }

  async launch(spec: {
    model: string;
    judges: string[];
    tags: string[];
    issueIds: string[];
    testIds: string[];
  }): Promise<void> {
    clear(this.banner);
    try {
      const launched = await this.api.launchRun({
        target_model: spec.model,
        judge_models: spec.judges,
        selection: { tags: spec.tags, issue_ids: spec.issueIds, test_ids: spec.testIds },
      });
      await this.track(launched.run_id);
    } catch (error) {
      if (error instanceof ApiError && error.code === "upstream_unavailable") {
        this.showRetryBanner(error, () => void this.launch(spec));
        return;
      }
      if (error instanceof ApiError) {
        this.banner.append(h("div", { class: "error-banner" }, `${error.code}: ${error.message}`));
        return;
      }
      throw error;
    }
  }

  /** Poll an existing run to completion, then render its report. */
  async track(runId: string): Promise<void> {
    this.currentRunId = runId;
    this.renderProgress(await this.api.getRun(runId));
    const finished = await pollRun(this.api, runId, {
      intervalMs: this.pollIntervalMs,
      onProgress: (run) => this.renderProgress(run),
    });
    this.renderProgress(finished);
    if (finished.status === "completed") {
      await this.loadReport(runId);
    }
  }

  private renderProgress(run: RunDoc): void {
    const progress = run.progress;
    const done = progress.judged + progress.errored;
    const pct = progress.total ? Math.round((done / progress.total) * 100) : 0;
    clear(this.progressPanel).append(
      h("h3", {}, `Run ${run.id}`),
      h("span", { class: "run-status", "data-status": run.status }, run.status),
      h(
        "div",
        { class: "progress-bar", role: "progressbar", "data-done": `${done}`, "data-total": `${progress.total}` },
        h("div", { class: "progress-fill", style: `width: ${pct}%` }),
      ),
      h(
        "p",
        { class: "progress-counts" },
        `${progress.judged} judged, ${progress.errored} errored of ${progress.total}`,
      ),
    );
  }

  async loadReport(runId: string): Promise<void> {
    this.currentRunId = runId;
    const [report, results] = await Promise.all([
      this.api.getReport(runId),
      this.api.getResults(runId),
    ]);
    clear(this.reportPanel).append(
      h("h3", {}, `Report for ${report.model}`),
      this.renderPie(report),
      this.renderPerIssue(report),
      this.renderResults(results.results),
    );
  }

  private renderPie(report: ReportDoc): HTMLElement {
    const totals = report.totals;
    const total = SEGMENTS.reduce((sum, key) => sum + totals[key], 0);
    const chart = svg("svg", { viewBox: "-1.1 -1.1 2.2 2.2", class: "pie-chart", width: "160", height: "160" });
    let angle = -Math.PI / 2;
    for (const key of SEGMENTS) {
      const count = totals[key];
      if (count === 0 || total === 0) continue;
      const share = count / total;
      const end = angle + share * 2 * Math.PI;
      const largeArc = share > 0.5 ? 1 : 0;
      const path = svg("path", {
        class: "pie-segment",
        "data-segment": key,
        "data-count": `${count}`,
        fill: SEGMENT_COLORS[key],
        d: share === 1
          ? "M 0 -1 A 1 1 0 1 1 -0.0001 -1 Z"
          : `M 0 0 L ${Math.cos(angle)} ${Math.sin(angle)} A 1 1 0 ${largeArc} 1 ${Math.cos(end)} ${Math.sin(end)} Z`,
      });
      chart.append(path);
      angle = end;
    }
    const legend = h(
      "ul",
      { class: "pie-legend" },
      ...SEGMENTS.map((key) =>
        h(
          "li",
          { class: "legend-item", "data-segment": key, "data-count": `${totals[key]}` },
          `${key}: ${totals[key]}`,
        ),
      ),
    );
    return h(
      "div",
      { class: "pie-block" },
      chart as unknown as HTMLElement,
      legend,
      h("p", { class: "pass-rate", "data-pass-rate": fmtPct(report.pass_rate_pct) },
        `pass rate: ${fmtPct(report.pass_rate_pct)}%`),
      h("p", { class: "mean-score", "data-mean-score": fmtPct(report.mean_score_pct) },
        `mean ensemble score: ${fmtPct(report.mean_score_pct)}%`),
    );
  }

  private renderPerIssue(report: ReportDoc): HTMLElement {
    const rows = report.per_issue.map((entry) =>
      h(
        "tr",
        { class: "issue-rate-row", "data-issue-id": entry.key, "data-failure-rate": fmtPct(entry.failure_rate_pct) },
        h("td", {}, entry.key),
        h("td", {}, `${fmtPct(entry.failure_rate_pct)}%`),
        h("td", {}, `${entry.counts.passed}/${entry.counts.passed + entry.counts.failed} passed`),
      ),
    );
    return h(
      "table",
      { class: "per-issue-table" },
      h("thead", {}, h("tr", {}, h("th", {}, "issue"), h("th", {}, "failure rate"), h("th", {}, "determined"))),
      h("tbody", {}, ...rows),
    );
  }

  private renderResults(results: ResultDoc[]): HTMLElement {
    const rows = results.map((result) => this.renderResultRow(result));
    return h("section", { class: "results-section" }, h("h4", {}, "Results"), ...rows);
  }

  private renderResultRow(result: ResultDoc): HTMLElement {
    const verdicts = result.verdicts.map((verdict) =>
      h(
        "li",
        { class: "verdict", "data-validity": verdict.validity },
        h("span", { class: "verdict-judge" }, verdict.judge_model),
        h("span", { class: "verdict-score" }, verdict.score === null ? "invalid" : `${verdict.score}`),
        h("span", { class: "verdict-justification" }, verdict.justification || verdict.invalid_reason || ""),
      ),
    );
    return h(
      "article",
      {
        class: "result-row",
        "data-result-id": result.id,
        "data-test-id": result.test_id,
        "data-determination": result.determination,
      },
      h("header", {},
        h("code", {}, result.test_id),
        h("span", { class: "determination-chip" }, result.determination),
        h("span", { class: "mean-chip" }, result.mean_score === null ? "no mean" : `mean ${result.mean_score}`),
        result.override
          ? h("span", { class: "annotator-badge" }, `overridden by ${result.override.annotator}`)
          : null,
        h("button", { type: "button", class: "override-button", onclick: () => this.openOverrideDialog(result) }, "Override"),
      ),
      h("p", { class: "model-output" }, result.model_output),
      h("ul", { class: "verdict-list" }, ...verdicts),
    );
  }

  private openOverrideDialog(result: ResultDoc): void {
    const existing = this.root.querySelector(".override-dialog");
    if (existing) existing.remove();
    const score = h("select", { class: "override-score" }) as HTMLSelectElement;
    score.append(h("option", { value: "1" }, "1 (pass)"), h("option", { value: "0" }, "0 (fail)"));
    const justification = h("textarea", { class: "override-justification" }) as HTMLTextAreaElement;
    const annotator = h("input", { class: "override-annotator" }) as HTMLInputElement;
    const dialog = h(
      "div",
      { class: "override-dialog", "data-result-id": result.id },
      h(
        "form",
        {
          onsubmit: (event) => {
            event.preventDefault();
            void (async () => {
              try {
                await this.api.overrideResult(result.id, {
                  score: Number(score.value),
                  justification: justification.value,
                  annotator: annotator.value,
                });
                dialog.remove();
                if (this.currentRunId) await this.loadReport(this.currentRunId);
              } catch (error) {
                if (error instanceof ApiError) {
                  const line = dialog.querySelector(".form-error");
                  if (line) line.textContent = `${error.code}: ${error.message}`;
                  return;
                }
                throw error;
              }
            })();
          },
        },
        h("h4", {}, `Override ${result.test_id}`),
        h("label", {}, "Score", score),
        h("label", {}, "Justification", justification),
        h("label", {}, "Annotator", annotator),
        h("button", { type: "submit", class: "override-submit" }, "Apply override"),
        h("button", { type: "button", onclick: () => dialog.remove() }, "Cancel"),
        h("p", { class: "form-error" }),
      ),
    );
    this.root.append(dialog);
  }

  private showRetryBanner(error: ApiError, retry: () => void): void {
    clear(this.banner).append(
      h(
        "div",
        { class: "error-banner", "data-retryable": "true" },
        `${error.code}: ${error.message}`,
        h("button", { type: "button", class: "retry-button", onclick: () => retry() }, "Retry"),
      ),
    );
  }
}
