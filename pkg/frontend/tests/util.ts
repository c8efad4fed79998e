/** Test helpers: fixture loading, a fixture-backed Api, and DOM waiting. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiError, type Api } from "../src/api";
import type { ApiErrorDoc } from "../src/types";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, `${name}.json`), "utf-8")) as T;
}

export function apiErrorFrom(name: string, status: number): ApiError {
  const doc = fixture<ApiErrorDoc>(name);
  return new ApiError(status, doc.code, doc.message, doc.detail);
}

type Handler = (...args: unknown[]) => unknown;

/**
 * Api implementation backed by recorded fixtures; every view under test
 * renders from these with no server present. Calls are logged for
 * interaction assertions.
 */
export class FixtureApi implements Api {
  calls: { method: string; args: unknown[] }[] = [];
  private handlers = new Map<string, Handler>();

  on(method: keyof Api, handler: Handler): this {
    this.handlers.set(method, handler);
    return this;
  }

  private dispatch<T>(method: keyof Api, ...args: unknown[]): Promise<T> {
    this.calls.push({ method, args });
    const handler = this.handlers.get(method);
    if (!handler) {
      return Promise.reject(new Error(`FixtureApi: no handler for ${String(method)}`));
    }
    try {
      return Promise.resolve(handler(...args) as T);
    } catch (error) {
      return Promise.reject(error);
    }
  }

  callsTo(method: keyof Api) {
    return this.calls.filter((call) => call.method === method);
  }

  listIssues = (...args: unknown[]) => this.dispatch<never>("listIssues", ...args);
  getIssue = (...args: unknown[]) => this.dispatch<never>("getIssue", ...args);
  createIssue = (...args: unknown[]) => this.dispatch<never>("createIssue", ...args);
  addTest = (...args: unknown[]) => this.dispatch<never>("addTest", ...args);
  attachFeedback = (...args: unknown[]) => this.dispatch<never>("attachFeedback", ...args);
  launchRun = (...args: unknown[]) => this.dispatch<never>("launchRun", ...args);
  listRuns = (...args: unknown[]) => this.dispatch<never>("listRuns", ...args);
  getRun = (...args: unknown[]) => this.dispatch<never>("getRun", ...args);
  getReport = (...args: unknown[]) => this.dispatch<never>("getReport", ...args);
  getResults = (...args: unknown[]) => this.dispatch<never>("getResults", ...args);
  overrideResult = (...args: unknown[]) => this.dispatch<never>("overrideResult", ...args);
  compare = (...args: unknown[]) => this.dispatch<never>("compare", ...args);
  trend = (...args: unknown[]) => this.dispatch<never>("trend", ...args);
}

export function root(): HTMLElement {
  const element = document.createElement("div");
  document.body.replaceChildren(element);
  return element;
}

export async function until(
  predicate: () => boolean,
  timeoutMs = 30_000,
  message = "condition not met in time",
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  throw new Error(message);
}

export function submit(form: Element): void {
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function setValue(element: Element | null, value: string): void {
  (element as HTMLInputElement).value = value;
}
