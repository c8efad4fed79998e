"""Durable file-backed storage: the single source of truth.

One append-only journal per collection plus a commit log. Every write is a
transaction: journal lines are flushed and fsynced first, then the
transaction id is appended to the commit log. Lines whose transaction never
reached the commit log are ignored on reopen, so a write either fully
appears or not at all. Readers work on immutable snapshots; all writes are
serialized through a single lock.
"""

from __future__ import annotations

import gzip as gzip_mod
import json
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from . import domain
from .domain import (
    Feedback,
    Issue,
    Tag,
    Test,
    TestResult,
    TestRun,
    as_doc,
    feedback_from_doc,
    issue_from_doc,
    now_iso,
    require_valid,
    result_from_doc,
    run_from_doc,
    test_from_doc,
    validate_feedback,
    validate_issue,
    validate_test,
)
from .errors import Conflict, DuplicateId, IoError, StorageUnavailable, UnknownId, ValidationFailed
from .ids import new_id

COLLECTIONS = ("issues", "feedback", "tests", "runs", "results")
SEED_FORMAT_VERSION = 1
RUN_ARCHIVE_FORMAT_VERSION = 1

_FROM_DOC = {
    "issues": issue_from_doc,
    "feedback": feedback_from_doc,
    "tests": test_from_doc,
    "runs": run_from_doc,
    "results": result_from_doc,
}


def json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def pretty_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


@dataclass(frozen=True)
class StoreSnapshot:
    """Immutable view of all collections at one revision."""

    issues: dict[str, Issue]
    feedback: dict[str, Feedback]
    tests: dict[str, Test]
    runs: dict[str, TestRun]
    results: dict[str, TestResult]
    revision: int

    def collection(self, name: str) -> dict:
        return getattr(self, name)


class Store:
    def __init__(self, data_dir: str | Path, auto_compact: bool = True):
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._closed = False
        self._load()
        if auto_compact and self._dead_ratio_high():
            self.compact()

    # -- lifecycle ---------------------------------------------------------

    def _journal_path(self, collection: str) -> Path:
        return self._dir / f"{collection}.jsonl"

    def _commits_path(self) -> Path:
        return self._dir / "commits.log"

    def _load(self) -> None:
        committed: set[int] = set()
        if self._commits_path().exists():
            for line in self._commits_path().read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line.isdigit():
                    committed.add(int(line))
        revision = max(committed) if committed else 0

        data: dict[str, dict] = {}
        self._line_counts: dict[str, int] = {}
        for collection in COLLECTIONS:
            docs: dict[str, object] = {}
            count = 0
            path = self._journal_path(collection)
            if path.exists():
                for line in path.read_text(encoding="utf-8").splitlines():
                    count += 1
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError:
                        continue  # torn tail of an uncommitted transaction
                    if record.get("txn") not in committed:
                        continue
                    if record["op"] == "put":
                        doc = record["doc"]
                        docs[doc["id"]] = _FROM_DOC[collection](doc)
                    elif record["op"] == "del":
                        docs.pop(record["id"], None)
            data[collection] = docs
            self._line_counts[collection] = count

        self._snapshot = StoreSnapshot(
            issues=data["issues"],
            feedback=data["feedback"],
            tests=data["tests"],
            runs=data["runs"],
            results=data["results"],
            revision=revision,
        )

    def _dead_ratio_high(self) -> bool:
        total_lines = sum(self._line_counts.values())
        live = sum(len(self._snapshot.collection(c)) for c in COLLECTIONS)
        return total_lines > max(100, 4 * live)

    def compact(self) -> None:
        """Rewrite journals with live documents only; revision is preserved."""
        with self._lock:
            self._require_open()
            snap = self._snapshot
            for collection in COLLECTIONS:
                docs = snap.collection(collection)
                tmp = self._journal_path(collection).with_suffix(".tmp")
                with open(tmp, "w", encoding="utf-8") as fh:
                    for doc_id in sorted(docs):
                        fh.write(json_line({"txn": snap.revision, "op": "put", "doc": as_doc(docs[doc_id])}) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self._journal_path(collection))
                self._line_counts[collection] = len(docs)
            tmp = self._commits_path().with_suffix(".tmp")
            tmp.write_text(f"{snap.revision}\n" if snap.revision else "", encoding="utf-8")
            os.replace(tmp, self._commits_path())

    def close(self) -> None:
        self._closed = True

    def _require_open(self) -> None:
        if self._closed:
            raise StorageUnavailable("store is closed")

    def snapshot(self) -> StoreSnapshot:
        self._require_open()
        return self._snapshot

    # -- commit protocol ---------------------------------------------------

    def _commit(self, puts: list[tuple[str, object]], deletes: list[tuple[str, str]] = ()) -> None:
        """Append all records, fsync, then mark the transaction committed."""
        self._require_open()
        snap = self._snapshot
        txn = snap.revision + 1
        # deletes first so a replace-style transaction can reuse the same ids
        by_collection: dict[str, list[str]] = {}
        for collection, doc_id in deletes:
            by_collection.setdefault(collection, []).append(
                json_line({"txn": txn, "op": "del", "id": doc_id})
            )
        for collection, value in puts:
            by_collection.setdefault(collection, []).append(
                json_line({"txn": txn, "op": "put", "doc": as_doc(value)})
            )
        try:
            for collection, lines in by_collection.items():
                with open(self._journal_path(collection), "a", encoding="utf-8") as fh:
                    fh.write("\n".join(lines) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                self._line_counts[collection] = self._line_counts.get(collection, 0) + len(lines)
            with open(self._commits_path(), "a", encoding="utf-8") as fh:
                fh.write(f"{txn}\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageUnavailable(f"journal write failed: {exc}") from exc

        updated = {c: dict(snap.collection(c)) for c in COLLECTIONS}
        for collection, doc_id in deletes:
            updated[collection].pop(doc_id, None)
        for collection, value in puts:
            updated[collection][value.id] = value  # type: ignore[attr-defined]
        self._snapshot = StoreSnapshot(revision=txn, **updated)

    # -- issues ------------------------------------------------------------

    def create_issue(
        self,
        title: str,
        description: str,
        tags: frozenset[Tag] | set[Tag],
        status: domain.IssueStatus = domain.IssueStatus.OPEN,
        issue_id: str | None = None,
        created_at: str | None = None,
    ) -> Issue:
        with self._lock:
            at = created_at or now_iso()
            issue = Issue(
                id=issue_id or new_id(),
                title=title,
                description=description,
                status=status,
                tags=frozenset(tags),
                feedback_ids=(),
                created_at=at,
                updated_at=at,
            )
            require_valid(validate_issue(issue), "issue")
            if issue.id in self.snapshot().issues:
                raise DuplicateId(f"issue id already exists: {issue.id}")
            self._commit([("issues", issue)])
            return issue

    def get_issue(self, issue_id: str) -> Issue:
        issue = self.snapshot().issues.get(issue_id)
        if issue is None:
            raise UnknownId("issue", issue_id)
        return issue

    def update_issue(self, issue: Issue) -> Issue:
        with self._lock:
            if issue.id not in self.snapshot().issues:
                raise UnknownId("issue", issue.id)
            require_valid(validate_issue(issue), "issue")
            issue = replace(issue, updated_at=now_iso())
            self._commit([("issues", issue)])
            return issue

    def list_issues(
        self,
        tags: set[Tag] | frozenset[Tag] | None = None,
        status: domain.IssueStatus | None = None,
        text: str | None = None,
        include_hidden: bool = False,
    ) -> list[Issue]:
        issues = self.snapshot().issues.values()
        out = []
        needle = text.lower() if text else None
        for issue in issues:
            if issue.hidden and not include_hidden:
                continue
            if tags and not (issue.tags & frozenset(tags)):
                continue
            if status is not None and issue.status is not status:
                continue
            if needle and needle not in (issue.title + "\n" + issue.description).lower():
                continue
            out.append(issue)
        return sorted(out, key=lambda i: (i.created_at, i.id))

    def hide_issue(self, issue_id: str) -> Issue:
        """Soft delete: mark wontfix and hide; history and tests remain."""
        with self._lock:
            issue = self.snapshot().issues.get(issue_id)
            if issue is None:
                raise UnknownId("issue", issue_id)
            hidden = replace(
                domain.transition_issue_status(issue, domain.IssueStatus.WONTFIX), hidden=True
            )
            self._commit([("issues", hidden)])
            return hidden

    # -- tests and feedback --------------------------------------------------

    def add_test(
        self,
        issue_id: str,
        input_prompt: str,
        judge_template: domain.JudgeTemplate,
        judge_guidelines: tuple[str, ...] | list[str],
        reference_answer: str | None = None,
        test_id: str | None = None,
        created_at: str | None = None,
    ) -> Test:
        with self._lock:
            if issue_id not in self.snapshot().issues:
                raise UnknownId("issue", issue_id)
            test = Test(
                id=test_id or new_id(),
                issue_id=issue_id,
                input_prompt=input_prompt,
                reference_answer=reference_answer,
                judge_template=domain.JudgeTemplate(judge_template),
                judge_guidelines=tuple(judge_guidelines),
                created_at=created_at or now_iso(),
            )
            require_valid(validate_test(test), "test")
            if test.id in self.snapshot().tests:
                raise DuplicateId(f"test id already exists: {test.id}")
            self._commit([("tests", test)])
            return test

    def get_test(self, test_id: str) -> Test:
        test = self.snapshot().tests.get(test_id)
        if test is None:
            raise UnknownId("test", test_id)
        return test

    def list_tests(self, tags: set[Tag] | None = None) -> list[Test]:
        snap = self.snapshot()
        tests = list(snap.tests.values())
        if tags:
            wanted = frozenset(tags)
            tests = [t for t in tests if snap.issues[t.issue_id].tags & wanted]
        return sorted(tests, key=lambda t: (t.issue_id, t.id))

    def tests_for_issue(self, issue_id: str) -> list[Test]:
        self.get_issue(issue_id)
        return sorted(
            (t for t in self.snapshot().tests.values() if t.issue_id == issue_id),
            key=lambda t: t.id,
        )

    def attach_feedback(self, issue_id: str, feedback: Feedback) -> Issue:
        """Link feedback to an issue; immutable after attach, idempotent by id."""
        with self._lock:
            snap = self.snapshot()
            issue = snap.issues.get(issue_id)
            if issue is None:
                raise UnknownId("issue", issue_id)
            if feedback.id in issue.feedback_ids:
                return issue
            require_valid(validate_feedback(feedback), "feedback")
            puts: list[tuple[str, object]] = []
            if feedback.id not in snap.feedback:
                puts.append(("feedback", feedback))
            updated = replace(
                issue, feedback_ids=issue.feedback_ids + (feedback.id,), updated_at=now_iso()
            )
            puts.append(("issues", updated))
            self._commit(puts)
            return updated

    def get_feedback(self, feedback_id: str) -> Feedback:
        record = self.snapshot().feedback.get(feedback_id)
        if record is None:
            raise UnknownId("feedback", feedback_id)
        return record

    # -- runs and results -----------------------------------------------------

    def put_run(self, run: TestRun) -> TestRun:
        with self._lock:
            self._commit([("runs", run)])
            return run

    def get_run(self, run_id: str) -> TestRun:
        run = self.snapshot().runs.get(run_id)
        if run is None:
            raise UnknownId("run", run_id)
        return run

    def list_runs(self) -> list[TestRun]:
        return sorted(self.snapshot().runs.values(), key=lambda r: (r.created_at, r.id))

    def persist_result(self, result: TestResult, run: TestRun) -> None:
        """Commit a result and the run's updated progress atomically."""
        with self._lock:
            self._commit([("results", result), ("runs", run)])

    def update_result(self, result: TestResult) -> TestResult:
        with self._lock:
            if result.id not in self.snapshot().results:
                raise UnknownId("result", result.id)
            self._commit([("results", result)])
            return result

    def get_result(self, result_id: str) -> TestResult:
        result = self.snapshot().results.get(result_id)
        if result is None:
            raise UnknownId("result", result_id)
        return result

    def results_for_run(self, run_id: str) -> list[TestResult]:
        self.get_run(run_id)
        return sorted(
            (r for r in self.snapshot().results.values() if r.run_id == run_id),
            key=lambda r: (r.test_id, r.id),
        )

    # -- seed bundles ----------------------------------------------------------

    def import_seed(self, bundle: dict, replace_existing: bool = False) -> dict[str, int]:
        """All-or-nothing import of a seed bundle; returns exact counts."""
        with self._lock:
            self._require_open()
            if bundle.get("format_version") != SEED_FORMAT_VERSION:
                raise ValidationFailed(
                    f"unsupported seed format_version: {bundle.get('format_version')!r}"
                )
            issues_in = bundle.get("issues", [])
            seen_ids: set[str] = set()
            puts: list[tuple[str, object]] = []
            counts = {"issues": 0, "tests": 0, "feedback": 0}

            # Bundles may carry domains beyond the default vocabulary.
            for issue_doc in issues_in:
                for tag_doc in issue_doc.get("tags", []):
                    if tag_doc.get("kind") == "domain" and tag_doc.get("value"):
                        domain.register_domain(tag_doc["value"])

            for issue_doc in issues_in:
                issue_id = issue_doc.get("id") or new_id()
                feedback_docs = issue_doc.get("feedback", [])
                test_docs = issue_doc.get("tests", [])
                feedback_ids = []
                at = issue_doc.get("created_at") or now_iso()

                for fb_doc in feedback_docs:
                    fb = Feedback(
                        id=fb_doc.get("id") or new_id(),
                        user_input=fb_doc["user_input"],
                        model_output=fb_doc.get("model_output", ""),
                        signal=domain.FeedbackSignal(fb_doc.get("signal", "thumbs_down")),
                        source_model=fb_doc.get("source_model", ""),
                        received_at=fb_doc.get("received_at") or at,
                    )
                    if fb.id in seen_ids:
                        raise DuplicateId(f"duplicate id in bundle: {fb.id}")
                    seen_ids.add(fb.id)
                    violations = validate_feedback(fb)
                    if violations:
                        raise ValidationFailed(
                            f"feedback {fb.id}: {violations[0].field}: {violations[0].rule}"
                        )
                    puts.append(("feedback", fb))
                    feedback_ids.append(fb.id)
                    counts["feedback"] += 1

                issue = Issue(
                    id=issue_id,
                    title=issue_doc["title"],
                    description=issue_doc["description"],
                    status=domain.IssueStatus(issue_doc.get("status", "open")),
                    tags=frozenset(domain.tag_from_doc(t) for t in issue_doc.get("tags", [])),
                    feedback_ids=tuple(feedback_ids),
                    created_at=at,
                    updated_at=issue_doc.get("updated_at") or at,
                )
                if issue.id in seen_ids:
                    raise DuplicateId(f"duplicate id in bundle: {issue.id}")
                seen_ids.add(issue.id)
                violations = validate_issue(issue)
                if violations:
                    raise ValidationFailed(
                        f"issue {issue.id}: {violations[0].field}: {violations[0].rule}"
                    )
                puts.append(("issues", issue))
                counts["issues"] += 1

                for test_doc in test_docs:
                    test = Test(
                        id=test_doc.get("id") or new_id(),
                        issue_id=issue_id,
                        input_prompt=test_doc["input_prompt"],
                        reference_answer=test_doc.get("reference_answer"),
                        judge_template=domain.JudgeTemplate(test_doc["judge_template"]),
                        judge_guidelines=tuple(test_doc["judge_guidelines"]),
                        created_at=test_doc.get("created_at") or at,
                    )
                    if test.id in seen_ids:
                        raise DuplicateId(f"duplicate id in bundle: {test.id}")
                    seen_ids.add(test.id)
                    violations = validate_test(test)
                    if violations:
                        raise ValidationFailed(
                            f"test {test.id}: {violations[0].field}: {violations[0].rule}"
                        )
                    puts.append(("tests", test))
                    counts["tests"] += 1

            snap = self.snapshot()
            deletes: list[tuple[str, str]] = []
            if replace_existing:
                if snap.runs:
                    raise Conflict("cannot --replace seed data while runs exist")
                deletes = (
                    [("issues", i) for i in snap.issues]
                    + [("tests", t) for t in snap.tests]
                    + [("feedback", f) for f in snap.feedback]
                )
            else:
                for collection in ("issues", "tests", "feedback"):
                    existing = snap.collection(collection).keys() & seen_ids
                    if existing:
                        raise DuplicateId(
                            f"{collection} id already exists: {sorted(existing)[0]} (use --replace)"
                        )

            self._commit(puts, deletes)
            return counts

    def export_seed(self) -> dict:
        """Current issues/tests/feedback as an importable bundle."""
        snap = self.snapshot()
        issues = []
        for issue in sorted(snap.issues.values(), key=lambda i: (i.created_at, i.id)):
            doc = as_doc(issue)
            doc.pop("status_history", None)
            doc.pop("hidden", None)
            fb_ids = doc.pop("feedback_ids", [])
            doc["feedback"] = [as_doc(snap.feedback[f]) for f in fb_ids if f in snap.feedback]
            doc["tests"] = [
                {k: v for k, v in as_doc(t).items() if k != "issue_id"}
                for t in sorted(
                    (t for t in snap.tests.values() if t.issue_id == issue.id),
                    key=lambda t: t.id,
                )
            ]
            issues.append(doc)
        return {
            "format_version": SEED_FORMAT_VERSION,
            "provenance": "exported from gradeline store",
            "issues": issues,
        }

    # -- run archives -----------------------------------------------------------

    def export_run(self, run_id: str, destination: str | Path, gzip: bool = False) -> Path:
        """Self-contained archive: run spec, results, and tests/issues as of now.

        Output is canonical JSON (sorted keys) so repeated exports of the
        same run are byte-identical.
        """
        snap = self.snapshot()
        run = snap.runs.get(run_id)
        if run is None:
            raise UnknownId("run", run_id)
        results = sorted(
            (r for r in snap.results.values() if r.run_id == run_id),
            key=lambda r: (r.test_id, r.id),
        )
        test_ids = sorted(set(run.resolved_test_ids) | {r.test_id for r in results})
        tests = [snap.tests[t] for t in test_ids if t in snap.tests]
        issue_ids = sorted({t.issue_id for t in tests})
        issues = [snap.issues[i] for i in issue_ids if i in snap.issues]
        feedback_ids = sorted({f for issue in issues for f in issue.feedback_ids})
        archive = {
            "format_version": RUN_ARCHIVE_FORMAT_VERSION,
            "run": as_doc(run),
            "results": [as_doc(r) for r in results],
            "tests": [as_doc(t) for t in tests],
            "issues": [as_doc(i) for i in issues],
            "feedback": [as_doc(snap.feedback[f]) for f in feedback_ids if f in snap.feedback],
        }
        payload = pretty_json(archive)
        destination = Path(destination)
        try:
            if gzip:
                # mtime pinned and filename omitted so double exports are byte-identical
                with open(destination, "wb") as raw:
                    with gzip_mod.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as fh:
                        fh.write(payload.encode("utf-8"))
            else:
                destination.write_text(payload, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write archive {destination}: {exc}") from exc
        return destination

    def import_run(self, source: str | Path) -> TestRun:
        """Re-import an exported run under a fresh id for comparison.

        Test and issue ids are preserved (missing ones are created) so the
        imported run shares its test set with the original.
        """
        source = Path(source)
        try:
            raw = source.read_bytes()
        except OSError as exc:
            raise IoError(f"cannot read archive {source}: {exc}") from exc
        if raw[:2] == b"\x1f\x8b":
            raw = gzip_mod.decompress(raw)
        archive = json.loads(raw.decode("utf-8"))
        if archive.get("format_version") != RUN_ARCHIVE_FORMAT_VERSION:
            raise ValidationFailed(
                f"unsupported run archive format_version: {archive.get('format_version')!r}"
            )
        with self._lock:
            snap = self.snapshot()
            puts: list[tuple[str, object]] = []
            for fb_doc in archive.get("feedback", []):
                if fb_doc["id"] not in snap.feedback:
                    puts.append(("feedback", feedback_from_doc(fb_doc)))
            for issue_doc in archive.get("issues", []):
                if issue_doc["id"] not in snap.issues:
                    for tag_doc in issue_doc.get("tags", []):
                        if tag_doc.get("kind") == "domain" and tag_doc.get("value"):
                            domain.register_domain(tag_doc["value"])
                    puts.append(("issues", issue_from_doc(issue_doc)))
            for test_doc in archive.get("tests", []):
                if test_doc["id"] not in snap.tests:
                    puts.append(("tests", test_from_doc(test_doc)))

            new_run_id = new_id()
            result_ids = []
            for result_doc in archive.get("results", []):
                result = result_from_doc(result_doc)
                result = replace(result, id=new_id(), run_id=new_run_id)
                puts.append(("results", result))
                result_ids.append(result.id)
            run = run_from_doc(archive["run"])
            run = replace(run, id=new_run_id, result_ids=tuple(result_ids))
            puts.append(("runs", run))
            self._commit(puts)
            return run

    # -- integrity ---------------------------------------------------------------

    def check_integrity(self) -> list[str]:
        """Referential integrity violations, empty when consistent."""
        snap = self.snapshot()
        problems = []
        for test in snap.tests.values():
            if test.issue_id not in snap.issues:
                problems.append(f"test {test.id} references missing issue {test.issue_id}")
        for issue in snap.issues.values():
            for fb_id in issue.feedback_ids:
                if fb_id not in snap.feedback:
                    problems.append(f"issue {issue.id} references missing feedback {fb_id}")
        for result in snap.results.values():
            if result.run_id not in snap.runs:
                problems.append(f"result {result.id} references missing run {result.run_id}")
        return problems

    # test hook: simulate out-of-band deletion (e.g. during a live run)
    def _remove_doc(self, collection: str, doc_id: str) -> None:
        with self._lock:
            self._commit([], [(collection, doc_id)])
