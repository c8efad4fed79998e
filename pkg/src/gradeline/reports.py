"""Run reports, two-run comparisons, and trend series over stored results.

Pure functions over store snapshots. Two headline metrics are always
computed: the strict pass rate (pass iff mean verdict score > 0.5) and the
mean ensemble score. Undetermined and inference-error results are excluded
from rate denominators and reported as separate counts.

All displayed percentages are round-half-up to one decimal; internal values
stay unrounded.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from .domain import Determination, TestResult
from .errors import NoSharedTests, RunNotCompleted, UnknownId
from .store import Store, StoreSnapshot


class Relation(str, Enum):
    OUTPERFORM = "outperform"
    UNDERPERFORM = "underperform"
    MATCH = "match"


@dataclass(frozen=True)
class GroupBreakdown:
    key: str  # issue id or domain tag value
    counts: dict[str, int]
    pass_rate_pct: float | None
    failure_rate_pct: float | None
    mean_score_pct: float | None


@dataclass(frozen=True)
class RunReport:
    run_id: str
    model: str
    totals: dict[str, int]
    pass_rate_pct: float | None
    mean_score_pct: float | None
    per_issue: tuple[GroupBreakdown, ...]
    per_tag: tuple[GroupBreakdown, ...]
    generated_at: str
    multi_domain_issue_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class TestComparison:
    test_id: str
    issue_id: str
    domains: tuple[str, ...]
    score_a: float
    score_b: float
    relation: Relation


@dataclass(frozen=True)
class ComparisonReport:
    run_a: str
    run_b: str
    shared_test_ids: tuple[str, ...]
    per_test: tuple[TestComparison, ...]
    counts: dict[str, int]
    per_tag: tuple[tuple[str, dict[str, int]], ...]


@dataclass(frozen=True)
class TrendPoint:
    run_id: str
    started_at: str
    pass_rate_pct: float | None
    mean_score_pct: float | None


@dataclass(frozen=True)
class TrendSeries:
    group_key: str
    points: tuple[TrendPoint, ...]


def round_pct(value: float | None) -> float | None:
    """Round-half-up to one decimal (66.666... -> 66.7)."""
    if value is None:
        return None
    return float(Decimal(str(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _rate(numerator: int, denominator: int) -> float | None:
    if denominator == 0:
        return None
    return numerator / denominator * 100.0


def _count(results: list[TestResult]) -> dict[str, int]:
    counts = {"passed": 0, "failed": 0, "undetermined": 0, "inference_error": 0}
    for result in results:
        if result.determination is Determination.PASS:
            counts["passed"] += 1
        elif result.determination is Determination.FAIL:
            counts["failed"] += 1
        elif result.determination is Determination.UNDETERMINED:
            counts["undetermined"] += 1
        else:
            counts["inference_error"] += 1
    return counts


def _mean_score_pct(results: list[TestResult]) -> float | None:
    scores = [r.mean_score for r in results if r.mean_score is not None]
    if not scores:
        return None
    return sum(scores) / len(scores) * 100.0


def _breakdown(key: str, results: list[TestResult]) -> GroupBreakdown:
    counts = _count(results)
    determined = counts["passed"] + counts["failed"]
    return GroupBreakdown(
        key=key,
        counts=counts,
        pass_rate_pct=_rate(counts["passed"], determined),
        failure_rate_pct=_rate(counts["failed"], determined),
        mean_score_pct=_mean_score_pct(results),
    )


def build_report(store: Store, run_id: str) -> RunReport:
    snap = store.snapshot()
    run = snap.runs.get(run_id)
    if run is None:
        raise UnknownId("run", run_id)
    if run.status.value != "completed":
        raise RunNotCompleted(f"run {run_id} is {run.status.value}")

    results = sorted(
        (r for r in snap.results.values() if r.run_id == run_id), key=lambda r: (r.test_id, r.id)
    )
    totals = _count(results)

    by_issue: dict[str, list[TestResult]] = {}
    by_tag: dict[str, list[TestResult]] = {}
    multi_domain: list[str] = []
    for result in results:
        test = snap.tests.get(result.test_id)
        issue = snap.issues.get(test.issue_id) if test else None
        issue_id = issue.id if issue else "(unknown)"
        by_issue.setdefault(issue_id, []).append(result)
        domains = issue.domain_tags() if issue else ()
        if len(domains) > 1 and issue_id not in multi_domain:
            multi_domain.append(issue_id)
        for domain_tag in domains:
            by_tag.setdefault(domain_tag, []).append(result)

    determined = totals["passed"] + totals["failed"]
    return RunReport(
        run_id=run_id,
        model=run.target_model.identity(),
        totals=totals,
        pass_rate_pct=_rate(totals["passed"], determined),
        mean_score_pct=_mean_score_pct(results),
        per_issue=tuple(_breakdown(k, by_issue[k]) for k in sorted(by_issue)),
        per_tag=tuple(_breakdown(k, by_tag[k]) for k in sorted(by_tag)),
        # derived from run state, not the wall clock, so identical snapshots
        # always serialize identically
        generated_at=run.finished_at or run.created_at,
        multi_domain_issue_ids=tuple(sorted(multi_domain)),
    )


def _effective_scores(snap: StoreSnapshot, run_id: str) -> dict[str, float]:
    if run_id not in snap.runs:
        raise UnknownId("run", run_id)
    if snap.runs[run_id].status.value != "completed":
        raise RunNotCompleted(f"run {run_id} is {snap.runs[run_id].status.value}")
    scores: dict[str, float] = {}
    for result in snap.results.values():
        if result.run_id != run_id:
            continue
        score = result.effective_score()
        if score is not None:
            scores[result.test_id] = score
    return scores


def compare_reports(store: Store, run_a: str, run_b: str) -> ComparisonReport:
    """Per-test relation between two runs' effective scores.

    Effective score is the override score when present, else the ensemble
    mean; tests without an effective score on either side are excluded.
    """
    snap = store.snapshot()
    scores_a = _effective_scores(snap, run_a)
    scores_b = _effective_scores(snap, run_b)
    shared = sorted(scores_a.keys() & scores_b.keys())
    if not shared:
        raise NoSharedTests(f"runs {run_a} and {run_b} share no comparable tests")

    per_test = []
    counts = {r.value: 0 for r in Relation}
    per_tag_counts: dict[str, dict[str, int]] = {}
    for test_id in shared:
        a, b = scores_a[test_id], scores_b[test_id]
        if a > b:
            relation = Relation.OUTPERFORM
        elif a < b:
            relation = Relation.UNDERPERFORM
        else:
            relation = Relation.MATCH
        counts[relation.value] += 1
        test = snap.tests.get(test_id)
        issue = snap.issues.get(test.issue_id) if test else None
        domains = issue.domain_tags() if issue else ()
        for domain_tag in domains:
            bucket = per_tag_counts.setdefault(domain_tag, {r.value: 0 for r in Relation})
            bucket[relation.value] += 1
        per_test.append(
            TestComparison(
                test_id=test_id,
                issue_id=issue.id if issue else "(unknown)",
                domains=domains,
                score_a=a,
                score_b=b,
                relation=relation,
            )
        )
    return ComparisonReport(
        run_a=run_a,
        run_b=run_b,
        shared_test_ids=tuple(shared),
        per_test=tuple(per_test),
        counts=counts,
        per_tag=tuple((k, per_tag_counts[k]) for k in sorted(per_tag_counts)),
    )


def trend_series(store: Store, run_ids: list[str], group_by: str = "overall") -> list[TrendSeries]:
    """Pass-rate and mean-score series over chronologically ordered runs."""
    if group_by not in ("overall", "domain"):
        raise ValueError(f"group_by must be 'overall' or 'domain', got {group_by!r}")
    snap = store.snapshot()
    reports = [build_report(store, run_id) for run_id in run_ids]
    order = sorted(
        reports, key=lambda r: (snap.runs[r.run_id].started_at or "", r.run_id)
    )
    if group_by == "overall":
        points = tuple(
            TrendPoint(
                run_id=r.run_id,
                started_at=snap.runs[r.run_id].started_at or "",
                pass_rate_pct=r.pass_rate_pct,
                mean_score_pct=r.mean_score_pct,
            )
            for r in order
        )
        return [TrendSeries(group_key="overall", points=points)]

    keys = sorted({b.key for r in order for b in r.per_tag})
    series = []
    for key in keys:
        points = []
        for report in order:
            breakdown = next((b for b in report.per_tag if b.key == key), None)
            if breakdown is None:
                continue
            points.append(
                TrendPoint(
                    run_id=report.run_id,
                    started_at=snap.runs[report.run_id].started_at or "",
                    pass_rate_pct=breakdown.pass_rate_pct,
                    mean_score_pct=breakdown.mean_score_pct,
                )
            )
        series.append(TrendSeries(group_key=key, points=tuple(points)))
    return series


# -- serialization ------------------------------------------------------------


def report_to_doc(report: RunReport) -> dict:
    def group_doc(b: GroupBreakdown) -> dict:
        return {
            "key": b.key,
            "counts": b.counts,
            "pass_rate_pct": round_pct(b.pass_rate_pct),
            "failure_rate_pct": round_pct(b.failure_rate_pct),
            "mean_score_pct": round_pct(b.mean_score_pct),
        }

    return {
        "run_id": report.run_id,
        "model": report.model,
        "totals": report.totals,
        "pass_rate_pct": round_pct(report.pass_rate_pct),
        "mean_score_pct": round_pct(report.mean_score_pct),
        "per_issue": [group_doc(b) for b in report.per_issue],
        "per_tag": [group_doc(b) for b in report.per_tag],
        "generated_at": report.generated_at,
        "multi_domain_issue_ids": list(report.multi_domain_issue_ids),
    }


def comparison_to_doc(report: ComparisonReport) -> dict:
    return {
        "run_a": report.run_a,
        "run_b": report.run_b,
        "shared_test_ids": list(report.shared_test_ids),
        "per_test": [
            {
                "test_id": t.test_id,
                "issue_id": t.issue_id,
                "domains": list(t.domains),
                "score_a": t.score_a,
                "score_b": t.score_b,
                "relation": t.relation.value,
            }
            for t in report.per_test
        ],
        "counts": report.counts,
        "per_tag": {tag: counts for tag, counts in report.per_tag},
    }


def trend_to_doc(series: list[TrendSeries]) -> list[dict]:
    return [
        {
            "group_key": s.group_key,
            "points": [
                {
                    "run_id": p.run_id,
                    "started_at": p.started_at,
                    "pass_rate_pct": round_pct(p.pass_rate_pct),
                    "mean_score_pct": round_pct(p.mean_score_pct),
                }
                for p in s.points
            ],
        }
        for s in series
    ]


def report_to_json(report: RunReport) -> str:
    return json.dumps(report_to_doc(report), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def results_to_csv(store: Store, run_id: str) -> str:
    """One row per result, for spreadsheet-side analysis."""
    snap = store.snapshot()
    if run_id not in snap.runs:
        raise UnknownId("run", run_id)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "run_id",
            "result_id",
            "test_id",
            "issue_id",
            "domains",
            "determination",
            "mean_score",
            "effective_score",
            "overridden",
        ]
    )
    results = sorted(
        (r for r in snap.results.values() if r.run_id == run_id), key=lambda r: (r.test_id, r.id)
    )
    for result in results:
        test = snap.tests.get(result.test_id)
        issue = snap.issues.get(test.issue_id) if test else None
        writer.writerow(
            [
                run_id,
                result.id,
                result.test_id,
                issue.id if issue else "",
                "|".join(issue.domain_tags()) if issue else "",
                result.determination.value,
                "" if result.mean_score is None else result.mean_score,
                "" if result.effective_score() is None else result.effective_score(),
                "yes" if result.override else "no",
            ]
        )
    return buffer.getvalue()
