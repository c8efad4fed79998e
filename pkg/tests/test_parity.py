"""API/CLI parity: each surface's effects are observable through the other.

The CLI opens the store per invocation; the API app is created fresh after
CLI writes so both see the same journal state.
"""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from gradeline.api import create_app
from gradeline.cli import main
from gradeline.store import Store

from conftest import load_default_seed
from schema_utils import checked

SCORE_ONE = '{"justification": "fine", "score": 1}'


@pytest.fixture
def shared(tmp_path, mock_server):
    mock_server.reply_fn = lambda req: (
        f"ANSWER[{req.prompt}]" if req.model == "target" else SCORE_ONE
    )
    data_dir = tmp_path / "data"
    seed_path = tmp_path / "seed.json"
    seed_path.write_text(json.dumps(load_default_seed()), encoding="utf-8")
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "data_dir": str(data_dir),
                "timeout_ms": 5000,
                "backoff_s": [0.0],
                "models": {
                    "mock": {
                        "provider": "openai_compatible",
                        "base_url": mock_server.base_url,
                        "model_name": "target",
                    },
                    "mock-judge": {
                        "provider": "openai_compatible",
                        "base_url": mock_server.base_url,
                        "model_name": "judge-1",
                    },
                },
            }
        ),
        encoding="utf-8",
    )
    return {"config": str(config_path), "data_dir": data_dir, "seed": str(seed_path)}


def cli(shared, *args) -> int:
    return main(["--config", shared["config"], *args])


def api_client(shared) -> TestClient:
    return TestClient(create_app(Store(shared["data_dir"])))


class TestCliEffectsVisibleThroughApi:
    def test_seed_import_and_issue_create(self, shared, capsys):
        assert cli(shared, "seed", "import", shared["seed"]) == 0
        assert (
            cli(
                shared,
                "issue", "create",
                "--title", "Math - Parity",
                "--description", "created from the CLI",
                "--tag", "Math",
            )
            == 0
        )
        capsys.readouterr()
        with api_client(shared) as client:
            body = checked(client.get("/issues", params={"tag": "Math"}), "issue_list")
            titles = {issue["title"] for issue in body["issues"]}
            assert "Math - Parity" in titles
            assert body["total"] == 5  # 4 seed Math issues + the CLI one

    def test_cli_run_visible_through_api_report(self, shared, capsys):
        cli(shared, "seed", "import", shared["seed"])
        capsys.readouterr()
        assert (
            cli(
                shared,
                "run", "start", "--model", "mock", "--judges", "mock-judge",
                "--tag", "Reasoning", "--json",
            )
            == 0
        )
        run_id = json.loads(capsys.readouterr().out)["id"]
        with api_client(shared) as client:
            run = checked(client.get(f"/runs/{run_id}"), "run")
            assert run["status"] == "completed"
            report = checked(client.get(f"/runs/{run_id}/report"), "report")
            assert sum(report["totals"].values()) == 1


class TestApiEffectsVisibleThroughCli:
    def test_api_issue_and_test_visible_in_cli_listing(self, shared, capsys, mock_server):
        with api_client(shared) as client:
            issue = checked(
                client.post(
                    "/issues",
                    json={
                        "title": "Table - Parity",
                        "description": "created through the API",
                        "tags": ["Table"],
                    },
                ),
                "issue",
                201,
            )
            checked(
                client.post(
                    f"/issues/{issue['id']}/tests",
                    json={
                        "input_prompt": "Sum the count column: 1, 2, 3.",
                        "reference_answer": "6",
                        "judge_template": "T1",
                        "judge_guidelines": ["1. The total must be 6."],
                    },
                ),
                "test",
                201,
            )
        assert cli(shared, "issue", "list", "--tag", "Table", "--json") == 0
        body = json.loads(capsys.readouterr().out)
        assert [i["title"] for i in body["issues"]] == ["Table - Parity"]

    def test_api_override_visible_in_cli_report(self, shared, capsys, mock_server):
        cli(shared, "seed", "import", shared["seed"])
        capsys.readouterr()
        cli(
            shared,
            "run", "start", "--model", "mock", "--judges", "mock-judge",
            "--test-id", "tst-016-reasoning-general", "--json",
        )
        run_id = json.loads(capsys.readouterr().out)["id"]
        with api_client(shared) as client:
            results = checked(client.get(f"/runs/{run_id}/results"), "result_list")["results"]
            checked(
                client.post(
                    f"/results/{results[0]['id']}/override",
                    json={"score": 0, "justification": "human disagrees", "annotator": "qa"},
                ),
                "result",
            )
        assert cli(shared, "report", "show", run_id, "--json") == 0
        report = json.loads(capsys.readouterr().out)
        assert report["totals"]["failed"] == 1
        assert report["totals"]["passed"] == 0
