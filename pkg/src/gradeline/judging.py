"""Judge prompt rendering, reply parsing, ensemble aggregation, overrides.

Deterministic and I/O-free; the prompt templates ship as text assets and
are substituted byte-for-byte.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from functools import lru_cache

from importlib import resources

from .domain import (
    Determination,
    HumanOverride,
    JudgeTemplate,
    JudgeVerdict,
    Test,
    TestResult,
    Validity,
    require_valid,
    validate_override,
    validate_test,
)
from .errors import ValidationFailed

TEMPLATE_FILES = {
    JudgeTemplate.T1: "judge_template_1.txt",
    JudgeTemplate.T2: "judge_template_2.txt",
    JudgeTemplate.T3: "judge_template_3.txt",
}

_PLACEHOLDER_RE = re.compile(r"\{\{(prompt_text|model_response|ground_truth|judge_guidelines)\}\}")


@dataclass(frozen=True)
class JudgePrompt:
    template: JudgeTemplate
    text: str


@dataclass(frozen=True)
class AggregateOutcome:
    mean_score: float | None
    valid_count: int
    invalid_count: int
    determination: Determination


@dataclass(frozen=True)
class EffectiveOutcome:
    determination: Determination
    justification: str | None
    mean_score: float | None


@lru_cache(maxsize=None)
def template_text(template: JudgeTemplate) -> str:
    """The shipped template asset, bytes untouched."""
    return (
        resources.files("gradeline.templates")
        .joinpath(TEMPLATE_FILES[template])
        .read_text(encoding="utf-8")
    )


def render_judge_prompt(test: Test, model_output: str) -> JudgePrompt:
    """Substitute test fields and the model output into the test's template.

    Guidelines are joined by single newlines with the author's own numbering
    preserved. Substitution is single-pass, so placeholder-like sequences
    inside the substituted values are never re-expanded.
    """
    violations = validate_test(test)
    if violations:
        raise ValidationFailed(
            "cannot render prompt for invalid test",
            [(v.field, v.rule) for v in violations],
        )
    values = {
        "prompt_text": test.input_prompt,
        "model_response": model_output,
        "ground_truth": test.reference_answer or "",
        "judge_guidelines": "\n".join(test.judge_guidelines),
    }
    text = _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template_text(test.judge_template))
    return JudgePrompt(template=test.judge_template, text=text)


def parse_judge_reply(raw: str, judge_model: str = "") -> JudgeVerdict:
    """Extract the first well-formed JSON object from a judge reply.

    Tolerates surrounding prose and triple-backtick fences. Valid iff the
    object has a string "justification" and a "score" equal to 0 or 1
    (0.0/1.0 accepted and normalized to int). Invalidity is data, not a
    fault; the raw reply is always retained.
    """
    obj = _first_json_object(_strip_fences(raw))
    if obj is None:
        return _invalid(raw, judge_model, "no JSON object found")
    if "score" not in obj:
        return _invalid(raw, judge_model, "missing score")
    score = obj["score"]
    # bool is an int subclass; JSON true/false is not a binary score.
    if isinstance(score, bool) or not isinstance(score, (int, float)) or score not in (0, 1):
        return _invalid(raw, judge_model, "score not in {0,1}")
    justification = obj.get("justification")
    if not isinstance(justification, str):
        reason = "missing justification" if justification is None else "justification not a string"
        return _invalid(raw, judge_model, reason)
    return JudgeVerdict(
        judge_model=judge_model,
        score=int(score),
        justification=justification,
        raw_reply=raw,
        validity=Validity.VALID,
    )


def aggregate_verdicts(verdicts: list[JudgeVerdict] | tuple[JudgeVerdict, ...]) -> AggregateOutcome:
    """Mean over valid verdicts only; pass iff the mean strictly exceeds 0.5.

    Zero valid verdicts means undetermined: invalid judge output is routed
    to human review rather than counted as a fail.
    """
    valid_scores = [v.score for v in verdicts if v.is_valid() and v.score is not None]
    invalid_count = len(verdicts) - len(valid_scores)
    if not valid_scores:
        return AggregateOutcome(
            mean_score=None,
            valid_count=0,
            invalid_count=invalid_count,
            determination=Determination.UNDETERMINED,
        )
    total = sum(valid_scores)
    count = len(valid_scores)
    # mean > 0.5 <=> 2*total > count; integer compare sidesteps float edge cases
    determination = Determination.PASS if 2 * total > count else Determination.FAIL
    return AggregateOutcome(
        mean_score=total / count,
        valid_count=count,
        invalid_count=invalid_count,
        determination=determination,
    )


def apply_override(outcome: AggregateOutcome, override: HumanOverride | None) -> EffectiveOutcome:
    """Human override dominates the ensemble; verdicts stay stored and visible."""
    if override is None:
        return EffectiveOutcome(
            determination=outcome.determination,
            justification=None,
            mean_score=outcome.mean_score,
        )
    determination = Determination.PASS if override.score == 1 else Determination.FAIL
    return EffectiveOutcome(
        determination=determination,
        justification=override.justification,
        mean_score=outcome.mean_score,
    )


def result_with_override(result: TestResult, override: HumanOverride) -> TestResult:
    """Attach an override to a result; at most one is active, history retained.

    The determination follows the override regardless of the verdicts, which
    stay stored and visible.
    """
    require_valid(validate_override(override), "override")
    history = result.override_history + ((result.override,) if result.override else ())
    determination = Determination.PASS if override.score == 1 else Determination.FAIL
    return replace(
        result, override=override, override_history=history, determination=determination
    )


def _strip_fences(raw: str) -> str:
    text = raw.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if len(lines) >= 2 and lines[-1].strip().startswith("```"):
            text = "\n".join(lines[1:-1]).strip()
    return text


def _first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            value, _ = decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    return None


def _invalid(raw: str, judge_model: str, reason: str) -> JudgeVerdict:
    return JudgeVerdict(
        judge_model=judge_model,
        score=None,
        justification="",
        raw_reply=raw,
        validity=Validity.INVALID,
        invalid_reason=reason,
    )
