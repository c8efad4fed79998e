import { ApiError, type Api, type CreateTestPayload } from "./api";
import { clear, h } from "./dom";
import type { IssueDetailDoc, IssueDoc } from "./types";

/**
 * Issue triage and authoring: list/filter/create issues, attach feedback,
 * and author tests with a template picker and a guideline editor that can
 * inherit from a sibling test.
 */
export class IssueWorkbench {
  private list: HTMLElement;
  private detail: HTMLElement;
  private filters = { tag: "", status: "", q: "" };

  constructor(
    private root: HTMLElement,
    private api: Api,
  ) {
    this.list = h("div", { class: "issue-list" });
    this.detail = h("div", { class: "issue-detail" });
  }

  async init(): Promise<void> {
    clear(this.root).append(this.renderFilterBar(), this.renderCreateForm(), this.list, this.detail);
    await this.refresh();
  }

  private renderFilterBar(): HTMLElement {
    const tag = h("input", { class: "filter-tag", placeholder: "tag, e.g. Math" }) as HTMLInputElement;
    const status = h("select", { class: "filter-status" }) as HTMLSelectElement;
    for (const value of ["", "open", "monitoring", "resolved", "wontfix"]) {
      status.append(h("option", { value }, value || "any status"));
    }
    const text = h("input", { class: "filter-text", placeholder: "search text" }) as HTMLInputElement;
    return h(
      "form",
      {
        class: "filter-bar",
        onsubmit: (event) => {
          event.preventDefault();
          this.filters = { tag: tag.value.trim(), status: status.value, q: text.value.trim() };
          void this.refresh();
        },
      },
      tag,
      status,
      text,
      h("button", { type: "submit" }, "Filter"),
    );
  }

  async refresh(): Promise<void> {
    const query: Record<string, string> = {};
    if (this.filters.tag) query.tag = this.filters.tag;
    if (this.filters.status) query.status = this.filters.status;
    if (this.filters.q) query.q = this.filters.q;
    const body = await this.api.listIssues(query);
    clear(this.list);
    for (const issue of body.issues) {
      this.list.append(this.renderCard(issue));
    }
    this.list.append(h("p", { class: "issue-count" }, `${body.total} issue(s)`));
  }

  private renderCard(issue: IssueDoc): HTMLElement {
    const domains = issue.tags
      .filter((tag) => tag.kind === "domain")
      .map((tag) => tag.value)
      .join(", ");
    return h(
      "article",
      {
        class: "issue-card",
        "data-issue-id": issue.id,
        "data-status": issue.status,
        onclick: () => void this.showDetail(issue.id),
      },
      h("h3", {}, issue.title),
      h("span", { class: "issue-domains" }, domains),
      h("span", { class: "issue-status" }, issue.status),
      h("p", {}, issue.description),
    );
  }

  async showDetail(issueId: string): Promise<void> {
    const issue = await this.api.getIssue(issueId);
    clear(this.detail).append(
      h("h2", {}, issue.title),
      h("p", { class: "detail-description" }, issue.description),
      this.renderFeedbackSection(issue),
      this.renderTestsSection(issue),
    );
  }

  private renderFeedbackSection(issue: IssueDetailDoc): HTMLElement {
    const entries = issue.feedback.map((fb) =>
      h(
        "li",
        { class: "feedback-entry", "data-signal": fb.signal },
        h("span", { class: "feedback-input" }, fb.user_input),
        h("span", { class: "feedback-output" }, fb.model_output),
      ),
    );
    const userInput = h("textarea", { "data-field": "user_input" }) as HTMLTextAreaElement;
    const modelOutput = h("textarea", { "data-field": "model_output" }) as HTMLTextAreaElement;
    const form = h(
      "form",
      {
        class: "feedback-form",
        onsubmit: (event) => {
          event.preventDefault();
          void this.submitForm(form, async () => {
            await this.api.attachFeedback(issue.id, {
              user_input: userInput.value,
              model_output: modelOutput.value,
              signal: "thumbs_down",
            });
            await this.showDetail(issue.id);
          });
        },
      },
      h("label", {}, "User input", userInput),
      h("span", { class: "field-error", "data-error-for": "user_input" }),
      h("label", {}, "Model output", modelOutput),
      h("button", { type: "submit" }, "Attach feedback"),
      h("p", { class: "form-error" }),
    );
    return h("section", { class: "feedback-section" }, h("h3", {}, "Feedback"), h("ul", {}, ...entries), form);
  }

  private renderTestsSection(issue: IssueDetailDoc): HTMLElement {
    const rows = issue.tests.map((test) =>
      h(
        "li",
        { class: "test-entry", "data-test-id": test.id, "data-template": test.judge_template },
        h("code", {}, test.input_prompt),
        h("span", { class: "test-template" }, test.judge_template),
      ),
    );
    return h(
      "section",
      { class: "tests-section" },
      h("h3", {}, `Tests (${issue.tests.length})`),
      h("ul", {}, ...rows),
      this.renderTestForm(issue),
    );
  }

  private renderTestForm(issue: IssueDetailDoc): HTMLElement {
    const prompt = h("textarea", { class: "test-prompt", "data-field": "input_prompt" }) as HTMLTextAreaElement;
    const template = h("select", { class: "test-template-picker", "data-field": "judge_template" }) as HTMLSelectElement;
    template.append(
      h("option", { value: "T1" }, "T1: input + output + ground truth"),
      h("option", { value: "T2" }, "T2: output + ground truth"),
      h("option", { value: "T3" }, "T3: input + output"),
    );
    const reference = h("textarea", { class: "test-reference", "data-field": "reference_answer" }) as HTMLTextAreaElement;
    const guidelines = h("textarea", {
      class: "test-guidelines",
      "data-field": "judge_guidelines",
      placeholder: "One numbered guideline per line",
    }) as HTMLTextAreaElement;

    const siblingPicker = h("select", { class: "inherit-picker" }) as HTMLSelectElement;
    for (const test of issue.tests) {
      siblingPicker.append(h("option", { value: test.id }, `${test.judge_template} ${test.id}`));
    }
    const inheritButton = h(
      "button",
      {
        type: "button",
        class: "inherit-button",
        onclick: () => {
          const sibling = issue.tests.find((t) => t.id === siblingPicker.value);
          if (sibling) {
            guidelines.value = sibling.judge_guidelines.join("\n");
          }
        },
      },
      "Inherit guidelines from sibling",
    );

    const form = h(
      "form",
      {
        class: "test-form",
        onsubmit: (event) => {
          event.preventDefault();
          const payload: CreateTestPayload = {
            input_prompt: prompt.value,
            judge_template: template.value,
            judge_guidelines: guidelines.value.split("\n").filter((line) => line.length > 0),
          };
          if (reference.value) payload.reference_answer = reference.value;
          void this.submitForm(form, async () => {
            await this.api.addTest(issue.id, payload);
            await this.showDetail(issue.id);
          });
        },
      },
      h("label", {}, "Input prompt", prompt),
      h("span", { class: "field-error", "data-error-for": "input_prompt" }),
      h("label", {}, "Judge template", template),
      h("span", { class: "field-error", "data-error-for": "judge_template" }),
      h("label", {}, "Reference answer", reference),
      h("span", { class: "field-error", "data-error-for": "reference_answer" }),
      h("label", {}, "Judge guidelines", guidelines),
      h("span", { class: "field-error", "data-error-for": "judge_guidelines" }),
      issue.tests.length ? h("div", { class: "inherit-row" }, siblingPicker, inheritButton) : null,
      h("button", { type: "submit", class: "test-submit" }, "Add test"),
      h("p", { class: "form-error" }),
    );
    return form;
  }

  private renderCreateForm(): HTMLElement {
    const title = h("input", { class: "new-title", "data-field": "title" }) as HTMLInputElement;
    const description = h("textarea", { class: "new-description", "data-field": "description" }) as HTMLTextAreaElement;
    const tags = h("input", {
      class: "new-tags",
      "data-field": "tags",
      placeholder: "comma-separated, e.g. Math, task_type:Geometry",
    }) as HTMLInputElement;
    const form = h(
      "form",
      {
        class: "create-issue-form",
        onsubmit: (event) => {
          event.preventDefault();
          void this.submitForm(form, async () => {
            await this.api.createIssue({
              title: title.value,
              description: description.value,
              tags: tags.value.split(",").map((t) => t.trim()).filter(Boolean),
            });
            form.reset();
            await this.refresh();
          });
        },
      },
      h("h3", {}, "New issue"),
      h("label", {}, "Title", title),
      h("span", { class: "field-error", "data-error-for": "title" }),
      h("label", {}, "Description", description),
      h("span", { class: "field-error", "data-error-for": "description" }),
      h("label", {}, "Tags", tags),
      h("span", { class: "field-error", "data-error-for": "tags" }),
      h("button", { type: "submit" }, "Create issue"),
      h("p", { class: "form-error" }),
    ) as HTMLFormElement;
    return form;
  }

  /** Run an API call; render validation errors inline at the offending field. */
  private async submitForm(form: HTMLElement, action: () => Promise<void>): Promise<void> {
    for (const span of form.querySelectorAll(".field-error, .form-error")) {
      span.textContent = "";
    }
    try {
      await action();
    } catch (error) {
      if (error instanceof ApiError) {
        let placed = false;
        for (const violation of error.violations()) {
          const target = form.querySelector(`[data-error-for="${violation.field}"]`);
          if (target) {
            target.textContent = violation.rule;
            placed = true;
          }
        }
        if (!placed) {
          const generic = form.querySelector(".form-error");
          if (generic) generic.textContent = `${error.code}: ${error.message}`;
        }
        return;
      }
      throw error;
    }
  }
}
