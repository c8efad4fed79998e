import { HttpApi, type Api } from "./api";
import { clear, h } from "./dom";
import { IssueWorkbench } from "./issueWorkbench";
import { RunAndReportView } from "./runView";
import { TrendDashboard } from "./trendDashboard";

export interface App {
  workbench: IssueWorkbench;
  runView: RunAndReportView;
  dashboard: TrendDashboard;
  show(tab: "issues" | "runs" | "trends"): Promise<void>;
}

/** Wire the three views into a tabbed single-page console. */
export function mount(root: HTMLElement, api: Api, pollIntervalMs?: number): App {
  const issuesPane = h("div", { class: "pane pane-issues" });
  const runsPane = h("div", { class: "pane pane-runs" });
  const trendsPane = h("div", { class: "pane pane-trends" });

  const workbench = new IssueWorkbench(issuesPane, api);
  const runView = new RunAndReportView(runsPane, api, pollIntervalMs);
  const dashboard = new TrendDashboard(trendsPane, api);

  const panes = { issues: issuesPane, runs: runsPane, trends: trendsPane };

  async function show(tab: "issues" | "runs" | "trends"): Promise<void> {
    for (const [name, pane] of Object.entries(panes)) {
      pane.style.display = name === tab ? "block" : "none";
    }
    if (tab === "issues") await workbench.init();
    if (tab === "runs") runView.init();
    if (tab === "trends") await dashboard.init();
  }

  const nav = h(
    "nav",
    { class: "tabs" },
    h("button", { class: "tab-issues", onclick: () => void show("issues") }, "Issues"),
    h("button", { class: "tab-runs", onclick: () => void show("runs") }, "Runs"),
    h("button", { class: "tab-trends", onclick: () => void show("trends") }, "Trends"),
  );

  clear(root).append(nav, issuesPane, runsPane, trendsPane);
  return { workbench, runView, dashboard, show };
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const api = new HttpApi("");
  void mount(root, api).show("issues");
}
