from __future__ import annotations

import itertools
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradeline.domain import (
    Determination,
    HumanOverride,
    JudgeTemplate,
    JudgeVerdict,
    Validity,
)
from gradeline.errors import ValidationFailed
from gradeline.judging import (
    aggregate_verdicts,
    apply_override,
    parse_judge_reply,
    render_judge_prompt,
    result_with_override,
    template_text,
)

from test_domain import make_result, make_test


def verdict(score=None, reason="no JSON object found") -> JudgeVerdict:
    if score is None:
        return JudgeVerdict("j", None, "", "raw", Validity.INVALID, reason)
    return JudgeVerdict("j", score, "because", "raw", Validity.VALID)


def verdicts_from(pattern) -> list[JudgeVerdict]:
    """pattern items: 0, 1, or "invalid"."""
    return [verdict(None) if p == "invalid" else verdict(p) for p in pattern]


# -- rendering ------------------------------------------------------------------


class TestRendering:
    def test_geometry_prompt_contains_ground_truth_and_guidelines(self):
        prompt = render_judge_prompt(make_test(), "Area = 13.975 square meters")
        assert prompt.template is JudgeTemplate.T1
        assert "13.975 square meters" in prompt.text
        guidelines_at = prompt.text.index("The model output should adhere to the following guidelines:\n")
        tail = prompt.text[guidelines_at:].splitlines()
        assert tail[1] == "1. Use the correct geometric equation to solve."

    def test_t3_has_no_ground_truth_header(self):
        test = make_test(judge_template=JudgeTemplate.T3, reference_answer=None)
        prompt = render_judge_prompt(test, "anything")
        assert "**Ground truth text**" not in prompt.text
        assert "**Input to the model**" in prompt.text

    def test_t2_has_no_input_header(self):
        test = make_test(judge_template=JudgeTemplate.T2)
        prompt = render_judge_prompt(test, "anything")
        assert "**Input to the model**" not in prompt.text
        assert "**Ground truth text**" in prompt.text

    def test_empty_output_keeps_section_header(self):
        test = make_test(judge_template=JudgeTemplate.T3, reference_answer=None, judge_guidelines=("A",))
        prompt = render_judge_prompt(test, "")
        assert "**Model output to be rated**\n\n" in prompt.text
        assert "**Input to the model**" in prompt.text

    def test_no_residual_placeholders(self):
        for template in JudgeTemplate:
            ref = "ref" if template in (JudgeTemplate.T1, JudgeTemplate.T2) else None
            test = make_test(judge_template=template, reference_answer=ref)
            prompt = render_judge_prompt(test, "output")
            assert "{{" not in prompt.text

    def test_substituted_values_are_not_reexpanded(self):
        # model output containing a placeholder token must pass through verbatim
        test = make_test(judge_template=JudgeTemplate.T3, reference_answer=None)
        prompt = render_judge_prompt(test, "see {{ground_truth}} here")
        assert "see {{ground_truth}} here" in prompt.text

    def test_headers_present_per_template(self):
        for template, has_input, has_truth in [
            (JudgeTemplate.T1, True, True),
            (JudgeTemplate.T2, False, True),
            (JudgeTemplate.T3, True, False),
        ]:
            text = template_text(template)
            assert text.startswith("Act as an impartial judge")
            assert ("**Input to the model**" in text) == has_input
            assert ("**Ground truth text**" in text) == has_truth

    def test_invalid_test_is_rejected(self):
        with pytest.raises(ValidationFailed):
            render_judge_prompt(make_test(reference_answer=None), "x")

    def test_rendering_injective_on_inputs(self):
        a = render_judge_prompt(make_test(), "output one").text
        b = render_judge_prompt(make_test(), "output two").text
        c = render_judge_prompt(make_test(input_prompt="different question?"), "output one").text
        assert len({a, b, c}) == 3


# -- parsing --------------------------------------------------------------------


class TestParsing:
    def test_exact_format(self):
        v = parse_judge_reply('{"justification": "correct area", "score": 1}')
        assert v.is_valid() and v.score == 1 and v.justification == "correct area"

    def test_fenced_json(self):
        raw = 'Here is my rating:\n```json\n{"justification": "wrong formula", "score": 0}\n```'
        v = parse_judge_reply(raw)
        assert v.is_valid() and v.score == 0
        assert v.raw_reply == raw

    def test_prose_only_is_invalid(self):
        v = parse_judge_reply("The answer looks fine.")
        assert not v.is_valid()
        assert v.invalid_reason == "no JSON object found"

    def test_fractional_score_is_invalid(self):
        v = parse_judge_reply('{"justification": "partial", "score": 0.7}')
        assert not v.is_valid()
        assert v.invalid_reason == "score not in {0,1}"

    def test_float_one_is_normalized(self):
        v = parse_judge_reply('{"justification": "ok", "score": 1.0}')
        assert v.is_valid() and v.score == 1 and isinstance(v.score, int)

    def test_string_score_is_invalid(self):
        v = parse_judge_reply('{"justification": "ok", "score": "1"}')
        assert not v.is_valid()

    def test_boolean_score_is_invalid(self):
        v = parse_judge_reply('{"justification": "ok", "score": true}')
        assert not v.is_valid()

    def test_judge_model_is_attached(self):
        v = parse_judge_reply('{"justification": "ok", "score": 1}', judge_model="panel:phi@x")
        assert v.judge_model == "panel:phi@x"

    @settings(max_examples=200)
    @given(
        score=st.sampled_from([0, 1]),
        justification=st.text(
            alphabet=st.characters(blacklist_characters="{}", blacklist_categories=("Cs",)),
            max_size=80,
        ),
    )
    def test_round_trip_of_exact_output_format(self, score, justification):
        raw = json.dumps({"justification": justification, "score": score})
        v = parse_judge_reply(raw)
        assert v.is_valid()
        assert v.score == score
        assert v.justification == justification


# -- aggregation ------------------------------------------------------------------


class TestAggregation:
    def test_two_of_three_passes(self):
        outcome = aggregate_verdicts(verdicts_from([1, 1, 0]))
        assert outcome.determination is Determination.PASS
        assert outcome.mean_score == pytest.approx(2 / 3)

    def test_exact_half_fails(self):
        outcome = aggregate_verdicts(verdicts_from([1, 0]))
        assert outcome.mean_score == 0.5
        assert outcome.determination is Determination.FAIL

    def test_all_invalid_is_undetermined(self):
        outcome = aggregate_verdicts(verdicts_from(["invalid", "invalid"]))
        assert outcome.determination is Determination.UNDETERMINED
        assert outcome.valid_count == 0 and outcome.mean_score is None

    def test_single_judge_panel(self):
        outcome = aggregate_verdicts(verdicts_from([1]))
        assert outcome.determination is Determination.PASS
        assert outcome.mean_score == 1.0

    def test_invalid_excluded_from_mean(self):
        outcome = aggregate_verdicts(verdicts_from([1, "invalid", 0, 1]))
        assert outcome.valid_count == 3 and outcome.invalid_count == 1
        assert outcome.mean_score == pytest.approx(2 / 3)
        assert outcome.determination is Determination.PASS

    def test_exhaustive_vs_independent_oracle_up_to_5(self):
        # Oracle: exact rational mean over valid scores, pass iff > 1/2.
        for k in range(1, 6):
            for combo in itertools.product([0, 1, "invalid"], repeat=k):
                valid = [s for s in combo if s != "invalid"]
                if not valid:
                    expected = Determination.UNDETERMINED
                elif Fraction(sum(valid), len(valid)) > Fraction(1, 2):
                    expected = Determination.PASS
                else:
                    expected = Determination.FAIL
                outcome = aggregate_verdicts(verdicts_from(combo))
                assert outcome.determination is expected, combo

    @given(st.lists(st.sampled_from([0, 1, "invalid"]), min_size=1, max_size=6), st.randoms())
    def test_permutation_invariance(self, pattern, rng):
        shuffled = list(pattern)
        rng.shuffle(shuffled)
        assert aggregate_verdicts(verdicts_from(pattern)) == aggregate_verdicts(
            verdicts_from(shuffled)
        )

    @given(st.lists(st.sampled_from([0, 1, "invalid"]), min_size=1, max_size=6))
    def test_flipping_zero_to_one_is_monotone(self, pattern):
        zero_positions = [i for i, p in enumerate(pattern) if p == 0]
        if not zero_positions:
            return
        base = aggregate_verdicts(verdicts_from(pattern))
        for position in zero_positions:
            flipped = list(pattern)
            flipped[position] = 1
            outcome = aggregate_verdicts(verdicts_from(flipped))
            assert outcome.mean_score == pytest.approx(base.mean_score + 1 / base.valid_count)
            if base.determination is Determination.PASS:
                assert outcome.determination is Determination.PASS


# -- overrides ---------------------------------------------------------------------


def override(score, justification="human says so"):
    return HumanOverride(score, justification, "annotator", "2026-01-01T00:00:00Z")


class TestOverride:
    def test_fail_overridden_to_pass(self):
        outcome = aggregate_verdicts(verdicts_from([0, 0]))
        effective = apply_override(outcome, override(1, "reference itself was wrong"))
        assert effective.determination is Determination.PASS
        assert effective.justification == "reference itself was wrong"

    def test_undetermined_overridden_to_fail(self):
        outcome = aggregate_verdicts(verdicts_from(["invalid"]))
        assert apply_override(outcome, override(0)).determination is Determination.FAIL

    def test_no_override_is_identity(self):
        outcome = aggregate_verdicts(verdicts_from([1]))
        effective = apply_override(outcome, None)
        assert effective.determination is outcome.determination
        assert effective.justification is None

    def test_result_override_keeps_verdicts_and_history(self):
        result = make_result([0, 0])
        first = result_with_override(result, override(1, "first"))
        second = result_with_override(first, override(0, "second"))
        assert first.determination is Determination.PASS
        assert second.determination is Determination.FAIL
        assert second.override.justification == "second"
        assert [o.justification for o in second.override_history] == ["first"]
        assert second.verdicts == result.verdicts

    def test_override_requires_justification(self):
        with pytest.raises(ValidationFailed):
            result_with_override(make_result([1]), override(1, ""))
