"""Command-line interface for headless operation.

Subcommands map 1:1 onto repository/orchestrator/analytics operations.
Exit codes: 0 success, 1 validation error, 2 infrastructure error,
64 usage error. Machine-readable output via --json.
"""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

import click

from . import domain
from .api import expand_query_tag, parse_tag
from .config import Config, load_config
from .domain import IssueStatus, JudgeTemplate, TestSelection, as_doc
from .errors import (
    ConfigError,
    Conflict,
    DuplicateId,
    GatewayError,
    IoError,
    NoSharedTests,
    RunNotCompleted,
    StorageUnavailable,
    UnknownId,
    ValidationFailed,
)
from .gateway import InferenceGateway
from .orchestrator import RunOrchestrator
from .reports import (
    build_report,
    compare_reports,
    comparison_to_doc,
    report_to_doc,
    results_to_csv,
    trend_series,
    trend_to_doc,
)
from .store import Store


class AppContext:
    def __init__(self, config_path: str | None, data_dir: str | None):
        self.config = load_config(config_path) if config_path else Config()
        if data_dir:
            self.config.data_dir = data_dir
        self._store: Store | None = None

    @property
    def store(self) -> Store:
        if self._store is None:
            self._store = Store(self.config.data_dir)
        return self._store

    def orchestrator(self) -> RunOrchestrator:
        return RunOrchestrator(self.store, InferenceGateway(self.config), self.config)


pass_app = click.make_pass_decorator(AppContext)


def _emit(doc, as_json: bool, human_lines) -> None:
    if as_json:
        click.echo(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        for line in human_lines:
            click.echo(line)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file.")
@click.option("--data-dir", default=None, help="Storage directory (overrides config).")
@click.pass_context
def cli(ctx, config_path, data_dir):
    """Issue-driven LLM regression evaluation."""
    ctx.obj = AppContext(config_path, data_dir)


# -- serve ---------------------------------------------------------------------


@cli.command()
@click.option("--host", default=None, help="Bind address (default from config, localhost).")
@click.option("--port", type=int, default=None)
@click.option("--expose", is_flag=True, help="Bind to 0.0.0.0 instead of localhost.")
@click.option("--seed", "seed_path", type=click.Path(), default=None, help="Seed bundle to import at startup.")
@pass_app
def serve(app: AppContext, host, port, expose, seed_path):
    """Start the HTTP API service."""
    from .api import serve as run_server

    if host:
        app.config.host = host
    if port:
        app.config.port = port
    store = app.store
    if seed_path:
        bundle = json.loads(Path(seed_path).read_text(encoding="utf-8"))
        try:
            counts = store.import_seed(bundle)
            click.echo(f"seeded issues: {counts['issues']}, tests: {counts['tests']}")
        except DuplicateId:
            click.echo("seed already imported, continuing")
    run_server(app.config, store, expose=expose)


# -- seed ---------------------------------------------------------------------


@cli.group()
def seed():
    """Import or export seed bundles."""


@seed.command("import")
@click.argument("path", type=click.Path(exists=False))
@click.option("--replace", is_flag=True, help="Replace existing issues/tests/feedback.")
@pass_app
def seed_import(app: AppContext, path, replace):
    """Import a seed bundle (use 'default' for the bundled sample set)."""
    if path == "default":
        raw = resources.files("gradeline.seed").joinpath("default_seed.json").read_text("utf-8")
    else:
        bundle_path = Path(path)
        if not bundle_path.exists():
            raise IoError(f"seed bundle not found: {bundle_path}")
        raw = bundle_path.read_text(encoding="utf-8")
    counts = app.store.import_seed(json.loads(raw), replace_existing=replace)
    click.echo(f"issues: {counts['issues']}, tests: {counts['tests']}, feedback: {counts['feedback']}")


@seed.command("export")
@click.argument("path", type=click.Path())
@pass_app
def seed_export(app: AppContext, path):
    bundle = app.store.export_seed()
    Path(path).write_text(json.dumps(bundle, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    click.echo(f"wrote {len(bundle['issues'])} issues to {path}")


# -- issues ---------------------------------------------------------------------


@cli.group()
def issue():
    """Manage issues."""


@issue.command("list")
@click.option("--tag", "tags", multiple=True)
@click.option("--status", default=None)
@click.option("--text", default=None, help="Case-insensitive substring over title+description.")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def issue_list(app: AppContext, tags, status, text, as_json):
    query_tags = set()
    for value in tags:
        query_tags |= expand_query_tag(value)
    issues = app.store.list_issues(
        tags=query_tags or None,
        status=IssueStatus(status) if status else None,
        text=text,
    )
    _emit(
        {"issues": [as_doc(i) for i in issues], "total": len(issues)},
        as_json,
        [f"{i.id}  {i.status.value:<10}  {','.join(i.domain_tags())}  {i.title}" for i in issues],
    )


@issue.command("create")
@click.option("--title", required=True)
@click.option("--description", required=True)
@click.option("--tag", "tags", multiple=True, help="domain:Math, task_type:Geometry, or bare value.")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def issue_create(app: AppContext, title, description, tags, as_json):
    issue = app.store.create_issue(
        title=title, description=description, tags=frozenset(parse_tag(t) for t in tags)
    )
    _emit(as_doc(issue), as_json, [f"created issue {issue.id}"])


@issue.command("status")
@click.argument("issue_id")
@click.argument("new_status")
@pass_app
def issue_status(app: AppContext, issue_id, new_status):
    issue = app.store.get_issue(issue_id)
    updated = domain.transition_issue_status(issue, new_status)
    app.store.update_issue(updated)
    click.echo(f"{issue_id}: {issue.status.value} -> {updated.status.value}")


# -- tests ---------------------------------------------------------------------


@cli.group()
def test():
    """Manage tests."""


@test.command("add")
@click.argument("issue_id")
@click.option("--prompt", required=True, help="Input prompt sent to the target model.")
@click.option("--template", "template_name", required=True, type=click.Choice(["T1", "T2", "T3"]))
@click.option("--reference", default=None, help="Reference answer (required for T1/T2).")
@click.option("--guideline", "guidelines", multiple=True, help="One numbered guideline line; repeatable.")
@click.option("--inherit-from", default=None, help="Copy guidelines from a sibling test.")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def test_add(app: AppContext, issue_id, prompt, template_name, reference, guidelines, inherit_from, as_json):
    lines = list(guidelines)
    if not lines and inherit_from:
        lines = list(app.store.get_test(inherit_from).judge_guidelines)
    added = app.store.add_test(
        issue_id=issue_id,
        input_prompt=prompt,
        reference_answer=reference,
        judge_template=JudgeTemplate(template_name),
        judge_guidelines=tuple(lines),
    )
    _emit(as_doc(added), as_json, [f"added test {added.id} to issue {issue_id}"])


# -- runs ---------------------------------------------------------------------


@cli.group()
def run():
    """Execute and inspect test runs."""


def _selection_from_options(tags, test_ids, issue_ids) -> TestSelection:
    query_tags = set()
    for value in tags:
        query_tags |= expand_query_tag(value)
    return TestSelection(
        tags=frozenset(query_tags),
        test_ids=frozenset(test_ids),
        issue_ids=frozenset(issue_ids),
    )


@run.command("start")
@click.option("--model", "model_name", required=True, help="Target model name from config.")
@click.option("--judges", required=True, help="Comma-separated judge model names from config.")
@click.option("--tag", "tags", multiple=True)
@click.option("--test-id", "test_ids", multiple=True)
@click.option("--issue-id", "issue_ids", multiple=True)
@click.option("--json", "as_json", is_flag=True)
@pass_app
def run_start(app: AppContext, model_name, judges, tags, test_ids, issue_ids, as_json):
    """Start a run and wait for it to complete."""
    orchestrator = app.orchestrator()
    target = app.config.model_ref(model_name)
    judge_refs = [app.config.model_ref(name.strip()) for name in judges.split(",") if name.strip()]
    selection = _selection_from_options(tags, test_ids, issue_ids)
    started = orchestrator.start_run(target, judge_refs, selection)
    if not as_json:
        click.echo(f"run {started.id}: {started.progress.total} tests")
    finished = orchestrator.execute_run(started.id)
    _emit(
        as_doc(finished),
        as_json,
        [f"run {finished.id} {finished.status.value}: "
         f"{finished.progress.judged} judged, {finished.progress.errored} errored"],
    )


@run.command("resume")
@click.argument("run_id")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def run_resume(app: AppContext, run_id, as_json):
    finished = app.orchestrator().resume_run(run_id)
    _emit(as_doc(finished), as_json, [f"run {finished.id} {finished.status.value}"])


@run.command("status")
@click.argument("run_id")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def run_status(app: AppContext, run_id, as_json):
    r = app.store.get_run(run_id)
    p = r.progress
    _emit(
        as_doc(r),
        as_json,
        [f"run {r.id} {r.status.value}: {p.judged}/{p.total} judged, {p.errored} errored"],
    )


@run.command("export")
@click.argument("run_id")
@click.argument("path", type=click.Path())
@click.option("--gzip", "use_gzip", is_flag=True)
@pass_app
def run_export(app: AppContext, run_id, path, use_gzip):
    app.store.export_run(run_id, path, gzip=use_gzip)
    click.echo(f"exported run {run_id} to {path}")


@run.command("import")
@click.argument("path", type=click.Path(exists=True))
@pass_app
def run_import(app: AppContext, path):
    imported = app.store.import_run(path)
    click.echo(f"imported run as {imported.id}")


# -- analytics ---------------------------------------------------------------------


@cli.group()
def report():
    """Run reports."""


@report.command("show")
@click.argument("run_id")
@click.option("--json", "as_json", is_flag=True)
@click.option("--csv", "as_csv", is_flag=True, help="One row per result.")
@pass_app
def report_show(app: AppContext, run_id, as_json, as_csv):
    if as_csv:
        click.echo(results_to_csv(app.store, run_id), nl=False)
        return
    doc = report_to_doc(build_report(app.store, run_id))
    lines = [
        f"run {doc['run_id']} ({doc['model']})",
        f"totals: {doc['totals']}",
        f"pass rate: {doc['pass_rate_pct']}%  mean score: {doc['mean_score_pct']}%",
        "per domain:",
    ]
    for entry in doc["per_tag"]:
        lines.append(
            f"  {entry['key']:<22} pass {entry['pass_rate_pct']}%  counts {entry['counts']}"
        )
    _emit(doc, as_json, lines)


@cli.command()
@click.argument("run_a")
@click.argument("run_b")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def compare(app: AppContext, run_a, run_b, as_json):
    """Per-test outperform/underperform/match between two runs."""
    doc = comparison_to_doc(compare_reports(app.store, run_a, run_b))
    _emit(
        doc,
        as_json,
        [
            f"shared tests: {len(doc['shared_test_ids'])}",
            f"outperform: {doc['counts']['outperform']}  "
            f"underperform: {doc['counts']['underperform']}  match: {doc['counts']['match']}",
        ],
    )


@cli.command()
@click.option("--runs", required=True, help="Comma-separated run ids, oldest first or not.")
@click.option("--group-by", type=click.Choice(["overall", "domain"]), default="overall")
@click.option("--json", "as_json", is_flag=True)
@pass_app
def trend(app: AppContext, runs, group_by, as_json):
    """Pass-rate and mean-score series over completed runs."""
    run_ids = [r for r in runs.split(",") if r]
    doc = trend_to_doc(trend_series(app.store, run_ids, group_by))
    lines = []
    for series in doc:
        lines.append(series["group_key"])
        for point in series["points"]:
            lines.append(
                f"  {point['started_at']}  {point['run_id']}  "
                f"pass {point['pass_rate_pct']}%  mean {point['mean_score_pct']}%"
            )
    _emit({"series": doc}, as_json, lines)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 64
    except click.Abort:
        return 130
    except click.ClickException as exc:
        exc.show()
        return 1
    except (ValidationFailed, UnknownId, DuplicateId, Conflict, RunNotCompleted, NoSharedTests, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (StorageUnavailable, IoError, GatewayError, ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
