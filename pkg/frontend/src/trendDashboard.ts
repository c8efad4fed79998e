import { ApiError, type Api } from "./api";
import { clear, fmtPct, h, svg } from "./dom";
import type { ComparisonDoc, RelationCountsDoc, TestComparisonDoc, TrendDoc } from "./types";

const RELATIONS: (keyof RelationCountsDoc)[] = ["outperform", "underperform", "match"];

type SortKey = "test_id" | "score_a" | "score_b" | "delta" | "relation";

/**
 * Trend dashboard with two modes: individual (metric series over runs) and
 * comparison (outperform/underperform/match charts plus a sortable per-test
 * grid). Chart counts always come from the /compare and /trend responses.
 */
export class TrendDashboard {
  private controls: HTMLElement;
  private content: HTMLElement;
  private mode: "individual" | "comparison" = "individual";
  private comparison: ComparisonDoc | null = null;
  private tagFilter = "";
  // delta = score_b - score_a: descending order surfaces run A's regressions first
  private sortKey: SortKey = "delta";
  private sortDescending = true;

  constructor(
    private root: HTMLElement,
    private api: Api,
  ) {
    this.controls = h("section", { class: "dashboard-controls" });
    this.content = h("section", { class: "dashboard-content" });
  }

  async init(): Promise<void> {
    clear(this.root).append(this.controls, this.content);
    await this.renderControls();
  }

  private async renderControls(): Promise<void> {
    const runs = (await this.api.listRuns()).runs.filter((run) => run.status === "completed");
    const modePicker = h("select", { class: "mode-picker" }) as HTMLSelectElement;
    modePicker.append(
      h("option", { value: "individual" }, "Individual mode"),
      h("option", { value: "comparison" }, "Comparison mode"),
    );
    modePicker.value = this.mode;
    modePicker.addEventListener("change", () => {
      this.mode = modePicker.value as "individual" | "comparison";
      clear(this.content);
    });

    const runOptions = () =>
      runs.map((run) => h("option", { value: run.id }, `${run.id} (${run.target_model.model_name})`));

    const individualRuns = h("select", { class: "individual-runs", multiple: true }) as HTMLSelectElement;
    individualRuns.append(...runOptions());
    const groupBy = h("select", { class: "group-by" }) as HTMLSelectElement;
    groupBy.append(h("option", { value: "overall" }, "overall"), h("option", { value: "domain" }, "by domain"));
    const individualGo = h(
      "button",
      {
        type: "button",
        class: "individual-go",
        onclick: () => {
          const selected = Array.from(individualRuns.selectedOptions).map((option) => option.value);
          void this.showIndividual(selected, groupBy.value as "overall" | "domain");
        },
      },
      "Show trend",
    );

    const runA = h("select", { class: "compare-a" }) as HTMLSelectElement;
    runA.append(...runOptions());
    const runB = h("select", { class: "compare-b" }) as HTMLSelectElement;
    runB.append(...runOptions());
    const compareGo = h(
      "button",
      {
        type: "button",
        class: "compare-go",
        onclick: () => void this.showComparison(runA.value, runB.value),
      },
      "Compare",
    );

    clear(this.controls).append(
      modePicker,
      h("div", { class: "individual-controls" }, individualRuns, groupBy, individualGo),
      h("div", { class: "comparison-controls" }, runA, runB, compareGo),
    );
  }

  async showIndividual(runIds: string[], groupBy: "overall" | "domain"): Promise<void> {
    const trend: TrendDoc = await this.api.trend(runIds, groupBy);
    clear(this.content);
    for (const series of trend.series) {
      const width = 400;
      const height = 120;
      const chart = svg("svg", {
        class: "trend-chart",
        "data-group-key": series.group_key,
        viewBox: `0 0 ${width} ${height}`,
        width: `${width}`,
        height: `${height}`,
      });
      const points = series.points;
      const step = points.length > 1 ? width / (points.length - 1) : 0;
      const y = (rate: number | null) => height - ((rate ?? 0) / 100) * height;
      const coords = points.map((point, i) => `${i * step},${y(point.pass_rate_pct)}`);
      if (points.length > 1) {
        chart.append(svg("polyline", { points: coords.join(" "), fill: "none", stroke: "#1565c0" }));
      }
      points.forEach((point, i) => {
        chart.append(
          svg("circle", {
            class: "trend-point",
            "data-run-id": point.run_id,
            "data-pass-rate": fmtPct(point.pass_rate_pct),
            "data-mean-score": fmtPct(point.mean_score_pct),
            cx: `${i * step}`,
            cy: `${y(point.pass_rate_pct)}`,
            r: "4",
          }),
        );
      });
      this.content.append(
        h("div", { class: "trend-series", "data-group-key": series.group_key },
          h("h4", {}, series.group_key),
          chart as unknown as HTMLElement),
      );
    }
  }

  async showComparison(runA: string, runB: string): Promise<void> {
    clear(this.content);
    try {
      this.comparison = await this.api.compare(runA, runB);
    } catch (error) {
      if (error instanceof ApiError && (error.code === "conflict" || error.code === "not_found")) {
        this.content.append(
          h("div", { class: "empty-state" },
            "These runs share no comparable tests. Pick runs that executed overlapping selections."),
        );
        return;
      }
      throw error;
    }
    this.tagFilter = "";
    this.renderComparison();
  }

  private activeCounts(): RelationCountsDoc {
    const comparison = this.comparison!;
    if (this.tagFilter && comparison.per_tag[this.tagFilter]) {
      return comparison.per_tag[this.tagFilter];
    }
    return comparison.counts;
  }

  private activeRows(): TestComparisonDoc[] {
    const comparison = this.comparison!;
    const rows = this.tagFilter
      ? comparison.per_test.filter((entry) => entry.domains.includes(this.tagFilter))
      : [...comparison.per_test];
    const key = this.sortKey;
    const direction = this.sortDescending ? -1 : 1;
    rows.sort((left, right) => {
      const a = key === "delta" ? left.score_b - left.score_a : left[key];
      const b = key === "delta" ? right.score_b - right.score_a : right[key];
      if (a < b) return -1 * direction;
      if (a > b) return 1 * direction;
      return left.test_id < right.test_id ? -1 : 1;
    });
    return rows;
  }

  private renderComparison(): void {
    const comparison = this.comparison!;
    const counts = this.activeCounts();
    const maxCount = Math.max(1, ...RELATIONS.map((relation) => counts[relation]));

    const tagPicker = h("select", { class: "tag-filter" }) as HTMLSelectElement;
    tagPicker.append(h("option", { value: "" }, "all domains"));
    for (const tag of Object.keys(comparison.per_tag).sort()) {
      tagPicker.append(h("option", { value: tag }, tag));
    }
    tagPicker.value = this.tagFilter;
    tagPicker.addEventListener("change", () => {
      this.tagFilter = tagPicker.value;
      this.renderComparison();
    });

    const bars = h(
      "div",
      { class: "relation-bars" },
      ...RELATIONS.map((relation) =>
        h(
          "div",
          { class: "bar-block" },
          h("div", {
            class: "bar",
            "data-relation": relation,
            "data-count": `${counts[relation]}`,
            style: `height: ${(counts[relation] / maxCount) * 100}%`,
          }),
          h("span", { class: "bar-label" }, `${relation}: ${counts[relation]}`),
        ),
      ),
    );

    const header = (label: string, key: SortKey) =>
      h(
        "th",
        {
          "data-sort-key": key,
          "data-sorted": key === this.sortKey ? (this.sortDescending ? "desc" : "asc") : "",
          onclick: () => {
            if (this.sortKey === key) {
              this.sortDescending = !this.sortDescending;
            } else {
              this.sortKey = key;
              this.sortDescending = true;
            }
            this.renderComparison();
          },
        },
        label,
      );

    const rows = this.activeRows().map((entry) =>
      h(
        "tr",
        {
          class: "grid-row",
          "data-test-id": entry.test_id,
          "data-relation": entry.relation,
          "data-payload": JSON.stringify(entry),
        },
        h("td", {}, entry.test_id),
        h("td", {}, entry.domains.join(", ")),
        h("td", {}, `${entry.score_a}`),
        h("td", {}, `${entry.score_b}`),
        h("td", {}, `${entry.score_b - entry.score_a}`),
        h("td", {}, entry.relation),
      ),
    );

    clear(this.content).append(
      h("div", { class: "comparison-header" },
        h("h4", {}, `${comparison.run_a} vs ${comparison.run_b}`),
        tagPicker),
      bars,
      h(
        "table",
        { class: "comparison-grid" },
        h("thead", {},
          h("tr", {},
            header("test", "test_id"),
            h("th", {}, "domains"),
            header("score A", "score_a"),
            header("score B", "score_b"),
            header("delta (B - A)", "delta"),
            header("relation", "relation"))),
        h("tbody", {}, ...rows),
      ),
    );
  }
}
