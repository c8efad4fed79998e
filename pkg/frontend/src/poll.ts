import type { Api } from "./api";
import type { RunDoc } from "./types";

/** Default poll cadence for run progress. */
export const DEFAULT_POLL_INTERVAL_MS = 2000;

/**
 * Poll a run until it reaches a terminal state (completed / failed).
 * Reports every observed snapshot through onProgress.
 */
export async function pollRun(
  api: Api,
  runId: string,
  options: {
    intervalMs?: number;
    timeoutMs?: number;
    onProgress?: (run: RunDoc) => void;
  } = {},
): Promise<RunDoc> {
  const intervalMs = options.intervalMs ?? DEFAULT_POLL_INTERVAL_MS;
  const deadline = Date.now() + (options.timeoutMs ?? 600_000);
  for (;;) {
    const run = await api.getRun(runId);
    options.onProgress?.(run);
    if (run.status === "completed" || run.status === "failed") {
      return run;
    }
    if (Date.now() > deadline) {
      throw new Error(`run ${runId} did not finish before the deadline`);
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
