from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from gradeline.api import create_app
from gradeline.config import Config
from gradeline.gateway import InferenceGateway

from schema_utils import checked

SCORE_ONE = '{"justification": "meets the guidelines", "score": 1}'
SCORE_ZERO = '{"justification": "violates a guideline", "score": 0}'


@pytest.fixture
def api(seeded_store, mock_server, fast_config):
    def reply(req):
        if req.model == "target":
            return f"ANSWER[{req.prompt}]"
        # judge: fail only the riddle test, which is visible in the echoed output
        if "double it" in req.prompt:
            return SCORE_ZERO
        return SCORE_ONE

    mock_server.reply_fn = reply
    config = Config(
        timeout_ms=fast_config.timeout_ms,
        retry_limit=fast_config.retry_limit,
        backoff_s=fast_config.backoff_s,
        models={
            "target": {"provider": "openai_compatible", "base_url": mock_server.base_url},
            "judge-1": {"provider": "openai_compatible", "base_url": mock_server.base_url},
        },
    )
    gateway = InferenceGateway(config)
    app = create_app(seeded_store, gateway, config)
    with TestClient(app, raise_server_exceptions=False) as client:
        yield client, mock_server, seeded_store
    gateway.close()


def model_doc(server, name):
    return {"provider": "openai_compatible", "base_url": server.base_url, "model_name": name}


def launch_and_wait(client, server, selection=None, deadline_s=30.0):
    payload = {
        "target_model": model_doc(server, "target"),
        "judge_models": [model_doc(server, "judge-1")],
        "selection": selection or {},
    }
    launched = checked(client.post("/runs", json=payload), "launch", 202)
    run_id = launched["run_id"]
    deadline = time.time() + deadline_s
    while time.time() < deadline:
        run = checked(client.get(f"/runs/{run_id}"), "run")
        if run["status"] in ("completed", "failed"):
            return run
        time.sleep(0.05)
    raise AssertionError("run did not finish in time")


class TestIssueEndpoints:
    def test_list_seed_issues(self, api):
        client, _, _ = api
        body = checked(client.get("/issues"), "issue_list")
        assert body["total"] == 20

    def test_math_tag_filter_returns_four(self, api):
        client, _, _ = api
        body = checked(client.get("/issues", params={"tag": "Math"}), "issue_list")
        assert len(body["issues"]) == 4

    def test_status_filter_empty_on_seed(self, api):
        client, _, _ = api
        body = checked(client.get("/issues", params={"status": "resolved"}), "issue_list")
        assert body["issues"] == []

    def test_text_search(self, api):
        client, _, _ = api
        body = checked(client.get("/issues", params={"q": "geometry word problems"}), "issue_list")
        assert [i["id"] for i in body["issues"]] == ["iss-010-math-geometry"]

    def test_create_get_patch(self, api):
        client, _, _ = api
        created = checked(
            client.post(
                "/issues",
                json={
                    "title": "Math - Rounding",
                    "description": "rounds 2.5 to 2",
                    "tags": ["Math", "task_type:Rounding"],
                },
            ),
            "issue",
            201,
        )
        assert {"kind": "domain", "value": "Math"} in created["tags"]

        detail = checked(client.get(f"/issues/{created['id']}"), "issue_detail")
        assert detail["tests"] == []

        patched = checked(
            client.patch(f"/issues/{created['id']}", json={"status": "monitoring"}), "issue"
        )
        assert patched["status"] == "monitoring"
        assert patched["status_history"][-1]["from_status"] == "open"

    def test_create_without_domain_tag_fails(self, api):
        client, _, _ = api
        body = checked(
            client.post("/issues", json={"title": "x", "description": "y", "tags": []}),
            "error",
            400,
        )
        assert body["code"] == "validation_failed"

    def test_unknown_issue_is_not_found(self, api):
        client, _, _ = api
        body = checked(client.get("/issues/ghost"), "error", 404)
        assert body["code"] == "not_found"

    def test_attach_feedback(self, api):
        client, _, _ = api
        body = checked(
            client.post(
                "/issues/iss-010-math-geometry/feedback",
                json={"user_input": "got 27.95 instead of 13.975", "signal": "thumbs_down"},
            ),
            "issue",
            201,
        )
        assert len(body["feedback_ids"]) == 2  # seed feedback + this one


class TestTestEndpoints:
    def test_add_test_and_list_by_tag(self, api):
        client, _, _ = api
        checked(
            client.post(
                "/issues/iss-010-math-geometry/tests",
                json={
                    "input_prompt": "A circle has radius 2. What is its area?",
                    "reference_answer": "4 pi, roughly 12.566",
                    "judge_template": "T1",
                    "judge_guidelines": ["1. Use the correct geometric equation to solve."],
                },
            ),
            "test",
            201,
        )
        body = checked(client.get("/tests", params={"tag": "Math"}), "test_list")
        assert len(body["tests"]) == 5

    def test_t1_without_reference_inline_error(self, api):
        client, _, _ = api
        body = checked(
            client.post(
                "/issues/iss-010-math-geometry/tests",
                json={
                    "input_prompt": "x",
                    "judge_template": "T1",
                    "judge_guidelines": ["1. y"],
                },
            ),
            "error",
            400,
        )
        assert any("T1 requires reference_answer" in str(v) for v in body["detail"])

    def test_inherit_guidelines_from_sibling(self, api):
        client, _, _ = api
        body = checked(
            client.post(
                "/issues/iss-010-math-geometry/tests",
                json={
                    "input_prompt": "A square has side 5. Perimeter?",
                    "reference_answer": "20",
                    "judge_template": "T1",
                    "inherit_from": "tst-010-math-geometry",
                },
            ),
            "test",
            201,
        )
        assert body["judge_guidelines"][0] == "1. Use the correct geometric equation to solve."


class TestRunEndpoints:
    def test_launch_poll_report_override_cycle(self, api):
        client, server, _ = api
        run = launch_and_wait(client, server, {"tags": ["Math"]})
        assert run["status"] == "completed"
        assert run["progress"] == {"total": 4, "inferred": 4, "judged": 4, "errored": 0}

        report = checked(client.get(f"/runs/{run['id']}/report"), "report")
        assert report["totals"] == {
            "passed": 3,
            "failed": 1,
            "undetermined": 0,
            "inference_error": 0,
        }
        assert sum(report["totals"].values()) == 4

        results = checked(client.get(f"/runs/{run['id']}/results"), "result_list")["results"]
        failed = next(r for r in results if r["determination"] == "fail")
        overridden = checked(
            client.post(
                f"/results/{failed['id']}/override",
                json={"score": 1, "justification": "judge misread the riddle", "annotator": "ana"},
            ),
            "result",
        )
        assert overridden["determination"] == "pass"
        assert overridden["override"]["annotator"] == "ana"

        after = checked(client.get(f"/runs/{run['id']}/report"), "report")
        assert after["totals"]["passed"] == 4
        assert after["pass_rate_pct"] == 100.0

    def test_run_listing(self, api):
        client, server, _ = api
        launch_and_wait(client, server, {"test_ids": ["tst-010-math-geometry"]})
        body = checked(client.get("/runs"), "run_list")
        assert len(body["runs"]) == 1

    def test_launch_with_named_models(self, api):
        client, server, _ = api
        launched = checked(
            client.post(
                "/runs",
                json={
                    "target_model": "target",
                    "judge_models": ["judge-1"],
                    "selection": {"test_ids": ["tst-010-math-geometry"]},
                },
            ),
            "launch",
            202,
        )
        deadline = time.time() + 30
        while time.time() < deadline:
            run = checked(client.get(f"/runs/{launched['run_id']}"), "run")
            if run["status"] == "completed":
                break
            time.sleep(0.05)
        assert run["status"] == "completed"

    def test_launch_requires_judges(self, api):
        client, server, _ = api
        body = checked(
            client.post(
                "/runs",
                json={"target_model": model_doc(server, "target"), "judge_models": []},
            ),
            "error",
            400,
        )
        assert body["code"] == "validation_failed"

    def test_unknown_named_model(self, api):
        client, _, _ = api
        body = checked(
            client.post("/runs", json={"target_model": "ghost", "judge_models": ["ghost"]}),
            "error",
            400,
        )
        assert body["code"] == "validation_failed"

    def test_report_of_unknown_run(self, api):
        client, _, _ = api
        checked(client.get("/runs/ghost/report"), "error", 404)

    def test_override_score_must_be_binary(self, api):
        client, server, _ = api
        run = launch_and_wait(client, server, {"test_ids": ["tst-010-math-geometry"]})
        results = checked(client.get(f"/runs/{run['id']}/results"), "result_list")["results"]
        body = checked(
            client.post(
                f"/results/{results[0]['id']}/override",
                json={"score": 5, "justification": "x", "annotator": "a"},
            ),
            "error",
            400,
        )
        assert body["code"] == "validation_failed"


class TestAnalyticsEndpoints:
    def test_compare_identical_runs_all_match(self, api):
        client, server, _ = api
        run_a = launch_and_wait(client, server, {"tags": ["Math"]})
        run_b = launch_and_wait(client, server, {"tags": ["Math"]})
        body = checked(client.get("/compare", params={"a": run_a["id"], "b": run_b["id"]}), "comparison")
        assert body["counts"]["match"] == len(body["shared_test_ids"]) == 4

    def test_compare_without_shared_tests_conflicts(self, api):
        client, server, _ = api
        run_a = launch_and_wait(client, server, {"test_ids": ["tst-010-math-geometry"]})
        run_b = launch_and_wait(client, server, {"test_ids": ["tst-001-code-fixing"]})
        body = checked(
            client.get("/compare", params={"a": run_a["id"], "b": run_b["id"]}), "error", 409
        )
        assert body["code"] == "conflict"

    def test_trend_overall(self, api):
        client, server, _ = api
        run_a = launch_and_wait(client, server, {"tags": ["Math"]})
        run_b = launch_and_wait(client, server, {"tags": ["Math"]})
        body = checked(
            client.get("/trend", params={"runs": f"{run_a['id']},{run_b['id']}"}), "trend"
        )
        (series,) = body["series"]
        assert [p["run_id"] for p in series["points"]] == [run_a["id"], run_b["id"]]
        assert series["points"][0]["pass_rate_pct"] == 75.0

    def test_trend_by_domain(self, api):
        client, server, _ = api
        run = launch_and_wait(client, server, {"tags": ["Math"]})
        body = checked(
            client.get("/trend", params={"runs": run["id"], "group_by": "domain"}), "trend"
        )
        assert {s["group_key"] for s in body["series"]} == {"Math"}

    def test_trend_rejects_bad_grouping(self, api):
        client, _, _ = api
        checked(client.get("/trend", params={"runs": "x", "group_by": "bogus"}), "error", 400)


class TestHealthAndErrors:
    def test_healthz(self, api):
        client, _, _ = api
        body = checked(client.get("/healthz"), "health")
        assert body["status"] == "ok"

    def test_unknown_route_is_api_error(self, api):
        client, _, _ = api
        body = checked(client.get("/nope"), "error", 404)
        assert body["code"] == "not_found"
