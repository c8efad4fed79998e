"""End-to-end test run execution: select, infer, judge, aggregate, persist.

Per-test unit of work so partial progress is always whole results; results
are keyed (run_id, test_id) which makes interrupted runs resumable without
re-running anything already persisted.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable

from .config import Config
from .domain import (
    Determination,
    ModelRef,
    RunProgress,
    RunStatus,
    Test,
    TestResult,
    TestRun,
    TestSelection,
    now_iso,
)
from .errors import ConfigError, Conflict, GatewayError, StorageUnavailable, UnknownId, ValidationFailed
from .gateway import CompletionRequest, InferenceGateway, Purpose
from .ids import new_id
from .judging import aggregate_verdicts, parse_judge_reply, render_judge_prompt
from .store import Store

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, RunProgress], None]


def select_tests(store: Store, selection: TestSelection) -> list[Test]:
    """Union of tag matches, explicit test ids, and issue ids.

    Empty selection means all tests. Ordered by (issue id, test id) and
    stable across calls on unchanged data. Tests of hidden issues are only
    included when named explicitly.
    """
    snap = store.snapshot()
    chosen: dict[str, Test] = {}
    if selection.is_empty():
        for test in snap.tests.values():
            issue = snap.issues.get(test.issue_id)
            if issue is not None and not issue.hidden:
                chosen[test.id] = test
    else:
        if selection.tags:
            for test in snap.tests.values():
                issue = snap.issues.get(test.issue_id)
                if issue is not None and not issue.hidden and issue.tags & selection.tags:
                    chosen[test.id] = test
        for test_id in selection.test_ids:
            test = snap.tests.get(test_id)
            if test is None:
                raise UnknownId("test", test_id)
            chosen[test.id] = test
        for issue_id in selection.issue_ids:
            if issue_id not in snap.issues:
                raise UnknownId("issue", issue_id)
            for test in snap.tests.values():
                if test.issue_id == issue_id:
                    chosen[test.id] = test
    return sorted(chosen.values(), key=lambda t: (t.issue_id, t.id))


class RunOrchestrator:
    def __init__(self, store: Store, gateway: InferenceGateway, config: Config | None = None):
        self.store = store
        self.gateway = gateway
        self.config = config or Config()
        self._run_lock = threading.Lock()  # serializes run-doc read-modify-write

    # -- lifecycle -----------------------------------------------------------

    def start_run(
        self,
        target_model: ModelRef,
        judge_models: list[ModelRef] | tuple[ModelRef, ...],
        selection: TestSelection | None = None,
    ) -> TestRun:
        """Create a pending run with the selection resolved to concrete test ids.

        Runs are immutable snapshots: later repository edits never change the
        membership of an already-started run.
        """
        judges = tuple(judge_models)
        if not judges:
            raise ValidationFailed("at least one judge model is required")
        selection = selection or TestSelection()
        for model in (target_model, *judges):
            if not model.base_url:
                raise ConfigError(f"model {model.model_name!r} has no endpoint configured")
            if not model.model_name:
                raise ConfigError("model_name must be non-empty")
            if model.generation_params.temperature < 0:
                raise ValidationFailed(
                    f"model {model.model_name!r}: temperature must be >= 0",
                    [("temperature", "must be >= 0")],
                )
        tests = select_tests(self.store, selection)
        run = TestRun(
            id=new_id(),
            target_model=target_model,
            judge_models=judges,
            selection=selection,
            resolved_test_ids=tuple(t.id for t in tests),
            status=RunStatus.PENDING,
            created_at=now_iso(),
            progress=RunProgress(total=len(tests)),
        )
        self.store.put_run(run)
        return run

    def execute_run(
        self,
        run_id: str,
        abort: threading.Event | None = None,
        progress_callback: ProgressCallback | None = None,
    ) -> TestRun:
        run = self.store.get_run(run_id)
        if run.status is not RunStatus.PENDING:
            raise Conflict(f"run {run_id} is {run.status.value}; use resume")
        return self._drive(run, abort, progress_callback)

    def resume_run(
        self,
        run_id: str,
        abort: threading.Event | None = None,
        progress_callback: ProgressCallback | None = None,
    ) -> TestRun:
        """Recompute only missing results; resuming a completed run is a no-op."""
        run = self.store.get_run(run_id)
        if run.status is RunStatus.COMPLETED:
            return run
        return self._drive(run, abort, progress_callback)

    # -- execution -----------------------------------------------------------

    def _drive(
        self,
        run: TestRun,
        abort: threading.Event | None,
        progress_callback: ProgressCallback | None,
    ) -> TestRun:
        for model in (run.target_model, *run.judge_models):
            if not model.base_url:
                raise ConfigError(f"model {model.model_name!r} has no endpoint configured")
        self.store.snapshot()  # raises StorageUnavailable before any inference

        existing = {r.test_id for r in self.store.results_for_run(run.id)}
        missing = [t for t in run.resolved_test_ids if t not in existing]

        if run.status is not RunStatus.RUNNING or run.started_at is None:
            run = replace(run, status=RunStatus.RUNNING, started_at=run.started_at or now_iso())
            self.store.put_run(run)

        aborted = False
        try:
            workers = max(1, self.config.provider_concurrency)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(self._process_test, run, test_id, abort, progress_callback)
                    for test_id in missing
                ]
                for future in futures:
                    if future.result() == "aborted":
                        aborted = True
        except StorageUnavailable:
            raise
        except GatewayError:
            raise  # per-test gateway faults are absorbed; this is a setup fault

        if aborted or (abort is not None and abort.is_set()):
            return self.store.get_run(run.id)

        with self._run_lock:
            run = self.store.get_run(run.id)
            progress = self._progress(run)
            if progress.is_complete():
                run = replace(
                    run, status=RunStatus.COMPLETED, finished_at=now_iso(), progress=progress
                )
            else:
                run = replace(run, status=RunStatus.FAILED, progress=progress)
            self.store.put_run(run)
        return run

    def _process_test(
        self,
        run: TestRun,
        test_id: str,
        abort: threading.Event | None,
        progress_callback: ProgressCallback | None,
    ) -> str | None:
        if abort is not None and abort.is_set():
            return "aborted"

        test = self.store.snapshot().tests.get(test_id)
        if test is None:
            # repository edits must not strand a long run
            result = self._error_result(
                run, test_id, f"selection_error: test {test_id} no longer in repository"
            )
            self._persist(run.id, result, progress_callback)
            return None

        try:
            completion = self.gateway.complete(
                CompletionRequest(
                    model=run.target_model,
                    prompt=test.input_prompt,
                    purpose=Purpose.TARGET_INFERENCE,
                )
            )
        except GatewayError as exc:
            result = self._error_result(run, test_id, str(exc))
            self._persist(run.id, result, progress_callback)
            return None

        # every judge sees byte-identical prompt text
        prompt = render_judge_prompt(test, completion.text)
        with ThreadPoolExecutor(max_workers=len(run.judge_models)) as judges_pool:
            verdicts = tuple(
                judges_pool.map(lambda judge: self._ask_judge(judge, prompt.text), run.judge_models)
            )

        outcome = aggregate_verdicts(verdicts)
        result = TestResult(
            id=new_id(),
            run_id=run.id,
            test_id=test_id,
            model_output=completion.text,
            verdicts=verdicts,
            mean_score=outcome.mean_score,
            determination=outcome.determination,
            created_at=now_iso(),
        )
        self._persist(run.id, result, progress_callback)
        return None

    def _ask_judge(self, judge: ModelRef, prompt_text: str):
        """One ask plus up to judge_retry re-asks; invalidity is recorded, not raised."""
        verdict = None
        for _ in range(1 + max(0, self.config.judge_retry)):
            try:
                reply = self.gateway.complete(
                    CompletionRequest(model=judge, prompt=prompt_text, purpose=Purpose.JUDGING)
                )
            except GatewayError as exc:
                verdict = parse_judge_reply("", judge.identity())
                verdict = replace(verdict, invalid_reason=f"judge call failed: {exc}")
                continue
            verdict = parse_judge_reply(reply.text, judge.identity())
            if verdict.is_valid():
                return verdict
        return verdict

    def _error_result(self, run: TestRun, test_id: str, detail: str) -> TestResult:
        return TestResult(
            id=new_id(),
            run_id=run.id,
            test_id=test_id,
            model_output="",
            verdicts=(),
            mean_score=None,
            determination=Determination.INFERENCE_ERROR,
            created_at=now_iso(),
            error_detail=detail,
        )

    def _persist(
        self, run_id: str, result: TestResult, progress_callback: ProgressCallback | None
    ) -> None:
        with self._run_lock:
            run = self.store.get_run(run_id)
            run = replace(run, result_ids=run.result_ids + (result.id,))
            progress = self._progress(run, extra=result)
            run = replace(run, progress=progress)
            self.store.persist_result(result, run)
        if progress_callback is not None:
            progress_callback(run_id, progress)

    def _progress(self, run: TestRun, extra: TestResult | None = None) -> RunProgress:
        results = {r.test_id: r for r in self.store.results_for_run(run.id)}
        if extra is not None:
            results[extra.test_id] = extra
        errored = sum(
            1 for r in results.values() if r.determination is Determination.INFERENCE_ERROR
        )
        done = len(results) - errored
        return RunProgress(
            total=len(run.resolved_test_ids), inferred=done, judged=done, errored=errored
        )
