from __future__ import annotations

import json
from pathlib import Path

import pytest

from gradeline.cli import main

from conftest import load_default_seed

SCORE_ONE = '{"justification": "meets the guidelines", "score": 1}'
SCORE_ZERO = '{"justification": "violates a guideline", "score": 0}'


@pytest.fixture
def env(tmp_path, mock_server):
    """Config file + data dir + seed bundle on disk, mock endpoints wired in."""

    def reply(req):
        if req.model == "target":
            return f"ANSWER[{req.prompt}]"
        if "double it" in req.prompt:
            return SCORE_ZERO
        return SCORE_ONE

    mock_server.reply_fn = reply
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
                    "mock": {"provider": "openai_compatible", "base_url": mock_server.base_url, "model_name": "target"},
                    "mock-judge": {"provider": "openai_compatible", "base_url": mock_server.base_url, "model_name": "judge-1"},
                },
            }
        ),
        encoding="utf-8",
    )
    return {
        "config": str(config_path),
        "data_dir": str(data_dir),
        "seed": str(seed_path),
        "server": mock_server,
        "tmp": tmp_path,
    }


def cli_capture(capsys, env, *args) -> tuple[int, str, str]:
    code = main(["--config", env["config"], *args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSeedCommands:
    def test_import_prints_counts(self, capsys, env):
        code, out, _ = cli_capture(capsys, env, "seed", "import", env["seed"])
        assert code == 0
        assert "issues: 20, tests: 20" in out

    def test_reimport_fails_validation(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, _, err = cli_capture(capsys, env, "seed", "import", env["seed"])
        assert code == 1
        assert "already exists" in err

    def test_import_missing_file_is_infrastructure_error(self, capsys, env):
        code, _, err = cli_capture(capsys, env, "seed", "import", str(Path(env["tmp"]) / "nope.json"))
        assert code == 2

    def test_export_round_trip(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        out_path = Path(env["tmp"]) / "exported.json"
        code, out, _ = cli_capture(capsys, env, "seed", "export", str(out_path))
        assert code == 0
        bundle = json.loads(out_path.read_text())
        assert len(bundle["issues"]) == 20

    def test_bundled_default_seed(self, capsys, env):
        code, out, _ = cli_capture(capsys, env, "seed", "import", "default")
        assert code == 0 and "issues: 20" in out


class TestIssueCommands:
    def test_list_by_tag(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, out, _ = cli_capture(capsys, env, "issue", "list", "--tag", "Math")
        assert code == 0
        assert out.count("\n") == 4
        assert "Math - Geometry" in out

    def test_list_json(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, out, _ = cli_capture(capsys, env, "issue", "list", "--json")
        assert json.loads(out)["total"] == 20

    def test_create_and_status(self, capsys, env):
        code, out, _ = cli_capture(
            capsys, env, "issue", "create", "--title", "Math - Rounding",
            "--description", "rounds badly", "--tag", "Math", "--json",
        )
        assert code == 0
        issue_id = json.loads(out)["id"]
        code, out, _ = cli_capture(capsys, env, "issue", "status", issue_id, "monitoring")
        assert code == 0 and "open -> monitoring" in out

    def test_create_empty_title_is_validation_error(self, capsys, env):
        code, _, err = cli_capture(
            capsys, env, "issue", "create", "--title", "", "--description", "d", "--tag", "Math"
        )
        assert code == 1
        assert "title" in err


class TestTestCommands:
    def test_add_test(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, out, _ = cli_capture(
            capsys, env, "test", "add", "iss-010-math-geometry",
            "--prompt", "A circle has radius 3. Area?",
            "--template", "T1", "--reference", "9 pi",
            "--guideline", "1. Use the correct geometric equation to solve.",
        )
        assert code == 0 and "added test" in out

    def test_add_test_inherits_guidelines(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, out, _ = cli_capture(
            capsys, env, "test", "add", "iss-010-math-geometry",
            "--prompt", "A cube has edge 2. Volume?",
            "--template", "T3",
            "--inherit-from", "tst-010-math-geometry", "--json",
        )
        assert code == 0
        assert json.loads(out)["judge_guidelines"][0].startswith("1. Use the correct geometric")


class TestRunAndReports:
    def _seed_and_run(self, capsys, env) -> str:
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, out, _ = cli_capture(
            capsys, env, "run", "start", "--model", "mock", "--judges", "mock-judge",
            "--tag", "Math", "--json",
        )
        assert code == 0
        return json.loads(out)["id"]

    def test_run_start_and_report_totals(self, capsys, env):
        run_id = self._seed_and_run(capsys, env)
        code, out, _ = cli_capture(capsys, env, "report", "show", run_id, "--json")
        assert code == 0
        report = json.loads(out)
        assert sum(report["totals"].values()) == 4
        assert report["totals"]["passed"] == 3

    def test_report_csv(self, capsys, env):
        run_id = self._seed_and_run(capsys, env)
        code, out, _ = cli_capture(capsys, env, "report", "show", run_id, "--csv")
        assert code == 0
        assert len(out.splitlines()) == 5

    def test_run_status(self, capsys, env):
        run_id = self._seed_and_run(capsys, env)
        code, out, _ = cli_capture(capsys, env, "run", "status", run_id)
        assert code == 0 and "completed" in out and "4/4 judged" in out

    def test_resume_completed_is_noop(self, capsys, env):
        run_id = self._seed_and_run(capsys, env)
        before = len(env["server"].requests)
        code, out, _ = cli_capture(capsys, env, "run", "resume", run_id)
        assert code == 0 and "completed" in out
        assert len(env["server"].requests) == before

    def test_compare_identical_runs(self, capsys, env):
        run_a = self._seed_and_run(capsys, env)
        code, out, _ = cli_capture(
            capsys, env, "run", "start", "--model", "mock", "--judges", "mock-judge",
            "--tag", "Math", "--json",
        )
        run_b = json.loads(out)["id"]
        code, out, _ = cli_capture(capsys, env, "compare", run_a, run_b, "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["counts"]["match"] == len(doc["shared_test_ids"])
        assert doc["counts"]["outperform"] == doc["counts"]["underperform"] == 0

    def test_trend(self, capsys, env):
        run_id = self._seed_and_run(capsys, env)
        code, out, _ = cli_capture(capsys, env, "trend", "--runs", run_id, "--json")
        assert code == 0
        assert json.loads(out)["series"][0]["points"][0]["pass_rate_pct"] == 75.0

    def test_export_import_compare(self, capsys, env):
        run_id = self._seed_and_run(capsys, env)
        archive = Path(env["tmp"]) / "run.json"
        code, out, _ = cli_capture(capsys, env, "run", "export", run_id, str(archive))
        assert code == 0
        code, out, _ = cli_capture(capsys, env, "run", "import", str(archive))
        assert code == 0
        imported_id = out.strip().rsplit(" ", 1)[-1]
        code, out, _ = cli_capture(capsys, env, "compare", run_id, imported_id, "--json")
        doc = json.loads(out)
        assert doc["counts"]["match"] == len(doc["shared_test_ids"]) == 4

    def test_unknown_model_name_is_validation_error(self, capsys, env):
        cli_capture(capsys, env, "seed", "import", env["seed"])
        code, _, err = cli_capture(
            capsys, env, "run", "start", "--model", "ghost", "--judges", "mock-judge"
        )
        assert code == 2  # config problem: infrastructure-class
        assert "ghost" in err


class TestExitCodes:
    def test_usage_error_is_64(self, capsys, env):
        assert cli_capture(capsys, env, "no-such-command")[0] == 64

    def test_missing_required_option_is_64(self, capsys, env):
        assert cli_capture(capsys, env, "run", "start")[0] == 64

    def test_unknown_run_id_is_validation(self, capsys, env):
        code, _, err = cli_capture(capsys, env, "report", "show", "ghost", "--json")
        assert code == 1
        assert "unknown run" in err
