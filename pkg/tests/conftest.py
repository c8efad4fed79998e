from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gradeline.config import Config
from gradeline.store import Store

from mock_endpoints import MockModelServer


def load_default_seed() -> dict:
    raw = resources.files("gradeline.seed").joinpath("default_seed.json").read_text("utf-8")
    return json.loads(raw)


@pytest.fixture
def store(tmp_path) -> Store:
    return Store(tmp_path / "data")


@pytest.fixture
def seeded_store(store) -> Store:
    store.import_seed(load_default_seed())
    return store


@pytest.fixture
def mock_server():
    server = MockModelServer()
    yield server
    server.stop()


@pytest.fixture
def fast_config() -> Config:
    """Short timeouts and no backoff so retry paths stay fast in tests."""
    return Config(timeout_ms=5_000, retry_limit=2, backoff_s=(0.0,), provider_concurrency=4)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in getattr(report, "nodeid", ""):
                name = report.nodeid.split("::")[-1]
                lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("---- acceptance criteria ----")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{outcome}  {name}")
