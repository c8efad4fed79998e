#!/usr/bin/env python3
"""Record real API responses as test fixtures for the console.

Drives the actual server implementation in-process against deterministic
mock model endpoints, captures selected responses, and writes them to
frontend/fixtures/. Rerun after changing API payload shapes:

    python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
import threading
import time
from pathlib import Path

FRONTEND = Path(__file__).resolve().parents[1]
REPO = FRONTEND.parent
sys.path.insert(0, str(REPO / "tests"))

from fastapi.testclient import TestClient

from gradeline.api import create_app
from gradeline.config import Config
from gradeline.gateway import InferenceGateway
from gradeline.store import Store

from conftest import load_default_seed
from mock_endpoints import MockModelServer

FIXTURES = FRONTEND / "fixtures"

SCORE_ONE = '{"justification": "meets the guidelines", "score": 1}'
SCORE_ZERO = '{"justification": "violates a guideline", "score": 0}'

# run A: judge fails the riddle test; run B: judge-b fails riddle + word pattern
FAIL_MARKERS_A = ("double it",)
FAIL_MARKERS_B = ("double it", "next number in the sequence")


def reply_fn(req):
    if req.model == "target":
        return f"ANSWER[{req.prompt}]"
    markers = FAIL_MARKERS_A if req.model == "judge-a" else FAIL_MARKERS_B
    if any(marker in req.prompt for marker in markers):
        return SCORE_ZERO
    return SCORE_ONE


def wait_for_run(client, run_id, deadline_s=60.0):
    deadline = time.time() + deadline_s
    while time.time() < deadline:
        run = client.get(f"/runs/{run_id}").json()
        if run["status"] in ("completed", "failed"):
            return run
        time.sleep(0.05)
    raise RuntimeError(f"run {run_id} did not finish")


def save(name: str, payload) -> None:
    path = FIXTURES / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    print(f"recorded {path.relative_to(FRONTEND)}")


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    server = MockModelServer(reply_fn=reply_fn, models=["target", "judge-a", "judge-b"])
    tmp = tempfile.mkdtemp(prefix="gradeline-fixtures-")
    store = Store(Path(tmp) / "data")
    store.import_seed(load_default_seed())
    config = Config(timeout_ms=10_000, backoff_s=(0.0,))
    gateway = InferenceGateway(config)
    app = create_app(store, gateway, config)

    def model(name):
        return {"provider": "openai_compatible", "base_url": server.base_url, "model_name": name}

    with TestClient(app) as client:
        save("issues_all", client.get("/issues").json())
        save("issues_math", client.get("/issues", params={"tag": "Math"}).json())
        save("issue_detail", client.get("/issues/iss-010-math-geometry").json())
        save("tests_math", client.get("/tests", params={"tag": "Math"}).json())

        launch = lambda judge, selection: client.post(
            "/runs",
            json={"target_model": model("target"), "judge_models": [model(judge)], "selection": selection},
        ).json()

        run_a = launch("judge-a", {"tags": ["Math"]})
        wait_for_run(client, run_a["run_id"])
        run_b = launch("judge-b", {"tags": ["Math"]})
        wait_for_run(client, run_b["run_id"])
        run_c = launch("judge-a", {"test_ids": ["tst-001-code-fixing"]})
        wait_for_run(client, run_c["run_id"])

        # mixed-domain pair for tag-filter behavior in comparison mode
        run_d = launch("judge-a", {"tags": ["Math"], "test_ids": ["tst-001-code-fixing"]})
        wait_for_run(client, run_d["run_id"])
        run_e = launch("judge-b", {"tags": ["Math"], "test_ids": ["tst-001-code-fixing"]})
        wait_for_run(client, run_e["run_id"])

        a, b, c = run_a["run_id"], run_b["run_id"], run_c["run_id"]
        save(
            "compare_mixed",
            client.get("/compare", params={"a": run_d["run_id"], "b": run_e["run_id"]}).json(),
        )
        save("run_completed", client.get(f"/runs/{a}").json())
        save("report_a", client.get(f"/runs/{a}/report").json())
        save("report_b", client.get(f"/runs/{b}/report").json())
        save("results_a", client.get(f"/runs/{a}/results").json())
        save("compare_ab", client.get("/compare", params={"a": a, "b": b}).json())
        save("compare_self", client.get("/compare", params={"a": a, "b": a}).json())
        save("trend_ab", client.get("/trend", params={"runs": f"{a},{b}"}).json())
        save(
            "trend_domain",
            client.get("/trend", params={"runs": f"{a},{b}", "group_by": "domain"}).json(),
        )

        # a mid-flight run snapshot for the progress view
        abort = threading.Event()
        orchestrator = app.state.orchestrator
        from gradeline.domain import Tag, TagKind, TestSelection

        orchestrator.config.provider_concurrency = 1
        pending = orchestrator.start_run(
            _model_ref(server, "target"),
            [_model_ref(server, "judge-a")],
            TestSelection(tags=frozenset({Tag(TagKind.DOMAIN, "Math")})),
        )

        def stop_after_two(run_id, progress):
            if progress.judged + progress.errored >= 2:
                abort.set()

        orchestrator.execute_run(pending.id, abort=abort, progress_callback=stop_after_two)
        save("run_running", client.get(f"/runs/{pending.id}").json())

        save("error_not_found", client.get("/issues/ghost").json())
        save(
            "error_validation",
            client.post(
                "/issues/iss-010-math-geometry/tests",
                json={"input_prompt": "x", "judge_template": "T1", "judge_guidelines": ["1. y"]},
            ).json(),
        )
        save("error_no_shared", client.get("/compare", params={"a": a, "b": c}).json())

    gateway.close()
    server.stop()


def _model_ref(server, name):
    from gradeline.domain import GenerationParams, ModelRef, Provider

    return ModelRef(Provider.OPENAI_COMPATIBLE, server.base_url, name, GenerationParams())


if __name__ == "__main__":
    main()
