"""Persistent domain types and their validation rules. No I/O here.

Everything is a frozen dataclass: values are safe to share between
concurrent tasks, and updates always produce new instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, is_dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .errors import ValidationFailed


def now_iso() -> str:
    """Current UTC time as a sortable ISO-8601 string."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class IssueStatus(str, Enum):
    OPEN = "open"
    MONITORING = "monitoring"
    RESOLVED = "resolved"
    WONTFIX = "wontfix"


class TagKind(str, Enum):
    DOMAIN = "domain"
    TASK_TYPE = "task_type"
    CUSTOM = "custom"


class FeedbackSignal(str, Enum):
    THUMBS_DOWN = "thumbs_down"
    THUMBS_UP = "thumbs_up"
    NOTE = "note"


class JudgeTemplate(str, Enum):
    T1 = "T1"  # input + output + ground truth
    T2 = "T2"  # output + ground truth
    T3 = "T3"  # input + output


class Provider(str, Enum):
    OPENAI_COMPATIBLE = "openai_compatible"
    OLLAMA = "ollama"


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class Validity(str, Enum):
    VALID = "valid"
    INVALID = "invalid"


class Determination(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    UNDETERMINED = "undetermined"
    INFERENCE_ERROR = "inference_error"


# Seed vocabulary for domain tags; extensible at runtime via register_domain.
DEFAULT_DOMAINS = frozenset(
    {
        "Code",
        "Creative",
        "Factual",
        "Instruction Following",
        "Math",
        "Multilingual",
        "Reasoning",
        "Summarization",
        "Table",
        "Underspecified",
    }
)

_domain_vocabulary: set[str] = set(DEFAULT_DOMAINS)


def domain_vocabulary() -> frozenset[str]:
    return frozenset(_domain_vocabulary)


def register_domain(value: str) -> None:
    if not value:
        raise ValidationFailed("domain value must be non-empty", [("value", "non-empty")])
    _domain_vocabulary.add(value)


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str


@dataclass(frozen=True, order=True)
class Tag:
    kind: TagKind
    value: str


@dataclass(frozen=True)
class StatusChange:
    from_status: IssueStatus
    to_status: IssueStatus
    at: str


@dataclass(frozen=True)
class Issue:
    id: str
    title: str
    description: str
    status: IssueStatus
    tags: frozenset[Tag]
    feedback_ids: tuple[str, ...]
    created_at: str
    updated_at: str
    status_history: tuple[StatusChange, ...] = ()
    hidden: bool = False

    def domain_tags(self) -> tuple[str, ...]:
        return tuple(sorted(t.value for t in self.tags if t.kind is TagKind.DOMAIN))


@dataclass(frozen=True)
class Feedback:
    id: str
    user_input: str
    model_output: str
    signal: FeedbackSignal
    source_model: str
    received_at: str


@dataclass(frozen=True)
class Test:
    id: str
    issue_id: str
    input_prompt: str
    reference_answer: str | None
    judge_template: JudgeTemplate
    judge_guidelines: tuple[str, ...]
    created_at: str


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = None


@dataclass(frozen=True)
class ModelRef:
    provider: Provider
    base_url: str
    model_name: str
    generation_params: GenerationParams = GenerationParams()

    def identity(self) -> str:
        return f"{self.provider.value}:{self.model_name}@{self.base_url}"


@dataclass(frozen=True)
class TestSelection:
    tags: frozenset[Tag] = frozenset()
    test_ids: frozenset[str] = frozenset()
    issue_ids: frozenset[str] = frozenset()

    def is_empty(self) -> bool:
        return not (self.tags or self.test_ids or self.issue_ids)


@dataclass(frozen=True)
class RunProgress:
    total: int = 0
    inferred: int = 0
    judged: int = 0
    errored: int = 0

    def is_complete(self) -> bool:
        return self.judged + self.errored == self.total


@dataclass(frozen=True)
class TestRun:
    id: str
    target_model: ModelRef
    judge_models: tuple[ModelRef, ...]
    selection: TestSelection
    resolved_test_ids: tuple[str, ...]
    status: RunStatus
    created_at: str
    started_at: str | None = None
    finished_at: str | None = None
    result_ids: tuple[str, ...] = ()
    progress: RunProgress = RunProgress()


@dataclass(frozen=True)
class JudgeVerdict:
    judge_model: str
    score: int | None
    justification: str
    raw_reply: str
    validity: Validity
    invalid_reason: str | None = None

    def is_valid(self) -> bool:
        return self.validity is Validity.VALID


@dataclass(frozen=True)
class HumanOverride:
    score: int
    justification: str
    annotator: str
    created_at: str


@dataclass(frozen=True)
class TestResult:
    id: str
    run_id: str
    test_id: str
    model_output: str
    verdicts: tuple[JudgeVerdict, ...]
    mean_score: float | None
    determination: Determination
    created_at: str
    override: HumanOverride | None = None
    override_history: tuple[HumanOverride, ...] = ()
    error_detail: str | None = None

    def effective_score(self) -> float | None:
        """Override score when present, else the ensemble mean."""
        if self.override is not None:
            return float(self.override.score)
        return self.mean_score


def validate_test(test: Test) -> list[Violation]:
    """Check all Test invariants; violations are data, not faults."""
    violations: list[Violation] = []
    if not test.input_prompt:
        violations.append(Violation("input_prompt", "must be non-empty"))
    if not test.judge_guidelines:
        violations.append(Violation("judge_guidelines", "must contain at least one line"))
    for i, line in enumerate(test.judge_guidelines):
        if not line:
            violations.append(Violation("judge_guidelines", f"line {i + 1} is empty"))
    if test.judge_template in (JudgeTemplate.T1, JudgeTemplate.T2):
        if not test.reference_answer:
            violations.append(
                Violation("reference_answer", f"{test.judge_template.value} requires reference_answer")
            )
    if not test.issue_id:
        violations.append(Violation("issue_id", "test must belong to exactly one issue"))
    return violations


def validate_issue(issue: Issue) -> list[Violation]:
    violations: list[Violation] = []
    if not issue.title:
        violations.append(Violation("title", "must be non-empty"))
    if not issue.description:
        violations.append(Violation("description", "must be non-empty"))
    for tag in issue.tags:
        if not tag.value:
            violations.append(Violation("tags", "tag value must be non-empty"))
    domains = [t for t in issue.tags if t.kind is TagKind.DOMAIN]
    if not domains:
        violations.append(Violation("tags", "at least one domain tag required"))
    for tag in domains:
        if tag.value and tag.value not in _domain_vocabulary:
            violations.append(Violation("tags", f"unknown domain {tag.value!r}"))
    return violations


def validate_feedback(feedback: Feedback) -> list[Violation]:
    if not feedback.user_input:
        return [Violation("user_input", "must be non-empty")]
    return []


def validate_override(override: HumanOverride) -> list[Violation]:
    violations: list[Violation] = []
    if override.score not in (0, 1):
        violations.append(Violation("score", "must be 0 or 1"))
    if not override.justification:
        violations.append(Violation("justification", "must be non-empty"))
    return violations


def require_valid(violations: list[Violation], what: str) -> None:
    if violations:
        raise ValidationFailed(
            f"invalid {what}: " + "; ".join(f"{v.field}: {v.rule}" for v in violations),
            [(v.field, v.rule) for v in violations],
        )


def transition_issue_status(issue: Issue, new_status: IssueStatus | str) -> Issue:
    """Replace status and append the transition to the audit trail.

    All transitions are permitted, including re-opening a resolved issue.
    Unknown status values are an error.
    """
    try:
        status = IssueStatus(new_status)
    except ValueError:
        raise ValidationFailed(
            f"unknown status {new_status!r}", [("status", "unknown value")]
        ) from None
    at = now_iso()
    change = StatusChange(from_status=issue.status, to_status=status, at=at)
    return replace(
        issue,
        status=status,
        updated_at=at,
        status_history=issue.status_history + (change,),
    )


def as_doc(value: Any) -> Any:
    """Convert a domain value to a JSON-ready structure.

    Frozensets serialize as sorted lists so identical values always
    produce identical documents.
    """
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: as_doc(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, frozenset):
        items = [as_doc(v) for v in value]
        return sorted(items, key=lambda d: json.dumps(d, sort_keys=True))
    if isinstance(value, (list, tuple)):
        return [as_doc(v) for v in value]
    return value


def tag_from_doc(doc: dict) -> Tag:
    return Tag(kind=TagKind(doc["kind"]), value=doc["value"])


def issue_from_doc(doc: dict) -> Issue:
    return Issue(
        id=doc["id"],
        title=doc["title"],
        description=doc["description"],
        status=IssueStatus(doc["status"]),
        tags=frozenset(tag_from_doc(t) for t in doc["tags"]),
        feedback_ids=tuple(doc["feedback_ids"]),
        created_at=doc["created_at"],
        updated_at=doc["updated_at"],
        status_history=tuple(
            StatusChange(
                from_status=IssueStatus(c["from_status"]),
                to_status=IssueStatus(c["to_status"]),
                at=c["at"],
            )
            for c in doc.get("status_history", [])
        ),
        hidden=doc.get("hidden", False),
    )


def feedback_from_doc(doc: dict) -> Feedback:
    return Feedback(
        id=doc["id"],
        user_input=doc["user_input"],
        model_output=doc["model_output"],
        signal=FeedbackSignal(doc["signal"]),
        source_model=doc["source_model"],
        received_at=doc["received_at"],
    )


def test_from_doc(doc: dict) -> Test:
    return Test(
        id=doc["id"],
        issue_id=doc["issue_id"],
        input_prompt=doc["input_prompt"],
        reference_answer=doc.get("reference_answer"),
        judge_template=JudgeTemplate(doc["judge_template"]),
        judge_guidelines=tuple(doc["judge_guidelines"]),
        created_at=doc["created_at"],
    )


def model_ref_from_doc(doc: dict) -> ModelRef:
    params = doc.get("generation_params", {})
    return ModelRef(
        provider=Provider(doc["provider"]),
        base_url=doc["base_url"],
        model_name=doc["model_name"],
        generation_params=GenerationParams(
            temperature=params.get("temperature", 0.0),
            max_tokens=params.get("max_tokens", 1024),
            seed=params.get("seed"),
        ),
    )


def selection_from_doc(doc: dict) -> TestSelection:
    return TestSelection(
        tags=frozenset(tag_from_doc(t) for t in doc.get("tags", [])),
        test_ids=frozenset(doc.get("test_ids", [])),
        issue_ids=frozenset(doc.get("issue_ids", [])),
    )


def run_from_doc(doc: dict) -> TestRun:
    progress = doc.get("progress", {})
    return TestRun(
        id=doc["id"],
        target_model=model_ref_from_doc(doc["target_model"]),
        judge_models=tuple(model_ref_from_doc(m) for m in doc["judge_models"]),
        selection=selection_from_doc(doc["selection"]),
        resolved_test_ids=tuple(doc["resolved_test_ids"]),
        status=RunStatus(doc["status"]),
        created_at=doc["created_at"],
        started_at=doc.get("started_at"),
        finished_at=doc.get("finished_at"),
        result_ids=tuple(doc.get("result_ids", [])),
        progress=RunProgress(
            total=progress.get("total", 0),
            inferred=progress.get("inferred", 0),
            judged=progress.get("judged", 0),
            errored=progress.get("errored", 0),
        ),
    )


def verdict_from_doc(doc: dict) -> JudgeVerdict:
    return JudgeVerdict(
        judge_model=doc["judge_model"],
        score=doc.get("score"),
        justification=doc["justification"],
        raw_reply=doc["raw_reply"],
        validity=Validity(doc["validity"]),
        invalid_reason=doc.get("invalid_reason"),
    )


def override_from_doc(doc: dict) -> HumanOverride:
    return HumanOverride(
        score=doc["score"],
        justification=doc["justification"],
        annotator=doc["annotator"],
        created_at=doc["created_at"],
    )


def result_from_doc(doc: dict) -> TestResult:
    return TestResult(
        id=doc["id"],
        run_id=doc["run_id"],
        test_id=doc["test_id"],
        model_output=doc["model_output"],
        verdicts=tuple(verdict_from_doc(v) for v in doc["verdicts"]),
        mean_score=doc.get("mean_score"),
        determination=Determination(doc["determination"]),
        created_at=doc["created_at"],
        override=override_from_doc(doc["override"]) if doc.get("override") else None,
        override_history=tuple(override_from_doc(o) for o in doc.get("override_history", [])),
        error_detail=doc.get("error_detail"),
    )
