"""Command-line entry point.

Shares the Engine facade with the API service, so a request submitted here
behaves exactly like the same request submitted over HTTP. Output is
human-readable by default; --json switches every command to structured
output for scripting. Errors exit with distinct codes per error family.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import graph as kg
from .api import CITATION_PATTERN
from .engine import Engine
from .errors import ResearchPodError

EXIT_BY_CODE = {
    "validation": 2,
    "unresolvable-need": 2,
    "unknown-id": 3,
    "duplicate-id": 4,
    "missing-producer": 5,
    "cycle-detected": 5,
    "integrity": 6,
    "dangling-parent": 6,
    "runner-error": 7,
    "verifier-rejected": 7,
    "limit-exceeded": 7,
    "unresolved-citation": 7,
    "provider-error": 8,
    "lifecycle": 9,
}


def _fail(exc: ResearchPodError, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps({"error": exc.code, "detail": str(exc)}), err=True)
    else:
        click.echo(f"error: {exc.code}: {exc}", err=True)
    sys.exit(EXIT_BY_CODE.get(exc.code, 1))


def _emit(payload, as_json: bool, render=None) -> None:
    if as_json:
        click.echo(json.dumps(payload, indent=2, ensure_ascii=False))
    elif render is not None:
        render(payload)


class Settings:
    def __init__(self, workspace, fixtures, live, as_json):
        self.workspace = workspace
        self.fixtures = fixtures
        self.live = live
        self.as_json = as_json
        self._engine = None

    def engine(self) -> Engine:
        if self._engine is None:
            self._engine = Engine(
                self.workspace,
                fixtures_root=self.fixtures,
                live_sources=self.live,
            )
        return self._engine


@click.group()
@click.option(
    "--workspace",
    type=click.Path(path_type=Path),
    default=lambda: Path(os.environ.get("RESEARCHPOD_WORKSPACE", "workspace")),
    help="Engine workspace directory (env RESEARCHPOD_WORKSPACE).",
)
@click.option(
    "--fixtures",
    type=click.Path(path_type=Path),
    default=None,
    help="Fixture data root; defaults to the shipped fixtures.",
)
@click.option("--live", is_flag=True, help="Allow live data sources (EDGAR).")
@click.option("--json", "as_json", is_flag=True, help="Structured output for scripting.")
@click.pass_context
def main(ctx, workspace, fixtures, live, as_json):
    """Multi-persona research pod: plan, run, and audit engagements."""
    ctx.obj = Settings(workspace, fixtures, live, as_json)


def _print_event(event) -> None:
    task = f" {event.task_id}" if event.task_id else ""
    detail = f"  {event.detail}" if event.detail else ""
    click.echo(f"[{event.sequence_no:>3}] {event.event}{task}{detail}")


# ---------------------------------------------------------------------------
# Engagements


@main.command()
@click.option("--ticker", required=True)
@click.option("--persona", default=None, help="Persona id; template default if omitted.")
@click.option("--workflow", default=None, help="Workflow id; persona default if omitted.")
@click.option("--fixtures", "fixtures_override", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--follow", is_flag=True, help="Print events live while running.")
@click.pass_obj
def run(settings, ticker, persona, workflow, fixtures_override, seed, follow):
    """Create and execute one engagement, then print the memo artifact id."""
    if fixtures_override is not None:
        settings.fixtures = fixtures_override
    engine = settings.engine()
    try:
        if workflow is None:
            if persona is not None:
                workflow = engine.registry.get_persona(persona).default_template
            else:
                workflow = "pitch-memo"
        record = engine.create_engagement(workflow, ticker, persona=persona, seed=seed)
        if not settings.as_json:
            click.echo(f"engagement: {record.engagement_id}")
        if follow:
            thread = engine.start_engagement(record.engagement_id)
            events = []
            for event in engine.subscribe(record.engagement_id):
                events.append(event)
                if not settings.as_json:
                    _print_event(event)
            if thread is not None:
                # terminal event precedes the status write; wait it out
                thread.join()
        else:
            engine.run_engagement(record.engagement_id)
            events = list(engine.bus(record.engagement_id).replay())
            if not settings.as_json:
                for event in events:
                    _print_event(event)
        record = engine.get_engagement(record.engagement_id)
        memo_ids = [
            a.id
            for a in engine.store.query(category="memo")
            if a.engagement_id == record.engagement_id
        ]
        if settings.as_json:
            click.echo(
                json.dumps(
                    {
                        "engagement_id": record.engagement_id,
                        "status": record.status,
                        "memo_ids": memo_ids,
                        "events": [e.to_dict() for e in events],
                    },
                    indent=2,
                )
            )
        else:
            for memo_id in memo_ids:
                click.echo(f"memo: {memo_id}")
            click.echo(f"status: {record.status}")
        if record.status == "aborted":
            sys.exit(7)
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)


@main.command()
@click.argument("engagement_id")
@click.pass_obj
def resume(settings, engagement_id):
    """Re-open failed or skipped tasks and continue an engagement."""
    engine = settings.engine()
    try:
        result = engine.resume_engagement(engagement_id)
        record = engine.get_engagement(engagement_id)
        if settings.as_json:
            click.echo(json.dumps({"engagement_id": engagement_id, "status": record.status}))
        else:
            click.echo(f"status: {record.status}")
        if result.status == "aborted":
            sys.exit(7)
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)


# ---------------------------------------------------------------------------
# Library listings


@main.group()
def skills():
    """Skill library."""


@skills.command("list")
@click.pass_obj
def skills_list(settings):
    """List registered skills with their contracts."""
    engine = settings.engine()
    specs = engine.registry.list_skills()
    _emit([s.to_dict() for s in specs], settings.as_json)
    if not settings.as_json:
        for spec in specs:
            needs = ", ".join(sorted(spec.needs)) or "-"
            produces = ", ".join(sorted(spec.produces))
            owner = f"  [{spec.owner_persona}]" if spec.owner_persona else ""
            click.echo(
                f"{spec.id:<22} {spec.phase.value:<8} {spec.runner.value:<13} "
                f"{needs} -> {produces}{owner}"
            )


@main.group()
def personas():
    """Persona pool."""


@personas.command("list")
@click.pass_obj
def personas_list(settings):
    """List onboarded personas."""
    engine = settings.engine()
    packs = engine.registry.list_personas()
    _emit([p.to_dict() for p in packs], settings.as_json)
    if not settings.as_json:
        for pack in packs:
            flows = ", ".join(w.name for w in pack.workflows)
            click.echo(f"{pack.id:<12} {pack.name:<18} {pack.title:<20} {flows}")


@main.group()
def workflows():
    """Workflow templates."""


@workflows.command("list")
@click.pass_obj
def workflows_list(settings):
    """List launchable workflow templates."""
    engine = settings.engine()
    templates = sorted(engine.templates.list_templates(), key=lambda t: t.id)
    _emit([t.to_dict() for t in templates], settings.as_json)
    if not settings.as_json:
        for template in templates:
            persona = template.params.get("persona", "-")
            click.echo(
                f"{template.id:<24} {template.engagement_type:<12} persona={persona}"
            )


@main.group()
def data():
    """Data-source registry."""


@data.command("list")
@click.pass_obj
def data_list(settings):
    """List live and fixture data sources."""
    engine = settings.engine()
    sources = engine.list_data_sources()
    _emit(sources, settings.as_json)
    if not settings.as_json:
        for source in sources:
            if source["kind"] == "live":
                state = "enabled" if source["enabled"] else "disabled"
                click.echo(f"{source['id']:<16} live     {state}  {source['description']}")
            else:
                click.echo(
                    f"{source['id']:<16} fixture  filings={source['filings']} "
                    f"news={source['news']} market={'yes' if source['has_market'] else 'no'}"
                )


# ---------------------------------------------------------------------------
# Persona pipeline


@main.group()
def persona():
    """Persona distillation and onboarding."""


@persona.command()
@click.option("--corpus", required=True, type=click.Path(path_type=Path, exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=0)
@click.pass_obj
def distill(settings, corpus, out_dir, seed):
    """Distill a source corpus into a deployable persona pack."""
    engine = settings.engine()
    try:
        result = engine.distill_persona(corpus, out_dir, seed=seed)
        payload = {
            "persona": result.spec.id,
            "provider_calls": result.provider_calls,
            "artifacts": result.artifacts,
            "pack": str(Path(out_dir) / "pack.json"),
        }
        _emit(payload, settings.as_json)
        if not settings.as_json:
            for step in ("extract", "generate", "specify", "bundle"):
                click.echo(f"{step:<10} {result.artifacts[step]}")
            click.echo(f"provider calls: {result.provider_calls}")
            click.echo(f"pack written: {payload['pack']}")
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)


@persona.command()
@click.argument("pack_dir", type=click.Path(path_type=Path, exists=True))
@click.pass_obj
def onboard(settings, pack_dir):
    """Register a persona pack directory (pack.json plus references/)."""
    engine = settings.engine()
    try:
        pack = engine.onboard_pack_dir(pack_dir)
        _emit(pack.to_dict(), settings.as_json)
        if not settings.as_json:
            flows = ", ".join(w.name for w in pack.workflows)
            click.echo(f"onboarded {pack.id} ({pack.name}); workflows: {flows}")
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)


# ---------------------------------------------------------------------------
# Knowledge graph


@main.group(name="graph")
def graph_group():
    """Knowledge-graph queries."""


@graph_group.command()
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def export(settings, out_file):
    """Write the canonical graph export to stdout or a file."""
    engine = settings.engine()
    built = kg.rebuild(engine.store)
    text = built.to_canonical_json()
    if out_file is not None:
        Path(out_file).write_text(text + "\n", encoding="utf-8")
        if not settings.as_json:
            counts = built.counts()
            click.echo(f"wrote {out_file} ({counts})")
    else:
        click.echo(text)


@graph_group.command()
@click.pass_obj
def gaps(settings):
    """Tickers covered by at most one persona."""
    engine = settings.engine()
    rows = kg.gap_report(kg.rebuild(engine.store))
    _emit(rows, settings.as_json)
    if not settings.as_json:
        for row in rows:
            personas_txt = ", ".join(row["personas"]) or "-"
            click.echo(f"{row['ticker']:<8} covered by: {personas_txt}")


@graph_group.command()
@click.argument("key")
@click.pass_obj
def theme(settings, key):
    """Memos and tickers under one theme."""
    engine = settings.engine()
    try:
        view = kg.theme_view(kg.rebuild(engine.store), key)
        _emit(view, settings.as_json)
        if not settings.as_json:
            click.echo(f"{view['display']} ({view['theme']})")
            for memo in view["memos"]:
                click.echo(f"  {memo['memo']}  {memo['ticker']}  {memo['persona']}")
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)


@graph_group.command()
@click.argument("ticker")
@click.pass_obj
def compare(settings, ticker):
    """Side-by-side persona views on one ticker, newest first."""
    engine = settings.engine()
    try:
        rows = kg.compare_views(kg.rebuild(engine.store), ticker)
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)
    _emit(rows, settings.as_json)
    if not settings.as_json:
        for row in rows:
            verdict = row["verdict"] or "-"
            click.echo(
                f"{row['persona']:<12} {verdict:<6} {row['created_at']:<22} {row['memo']}"
            )


# ---------------------------------------------------------------------------
# Store and memos


@main.group()
def store():
    """Evidence-store maintenance."""


@store.command()
@click.pass_obj
def verify(settings):
    """Re-hash every artifact and check lineage closure."""
    engine = settings.engine()
    report = engine.store.verify_integrity()
    if settings.as_json:
        click.echo(
            json.dumps(
                {"checked": report.checked, "failures": report.failures}, indent=2
            )
        )
    elif report.ok:
        click.echo(f"OK, 0 findings ({report.checked} artifacts checked)")
    else:
        for failure in report.failures:
            click.echo(f"FAIL {failure}")
    if not report.ok:
        sys.exit(EXIT_BY_CODE["integrity"])


@main.group()
def memo():
    """Memo retrieval."""


@memo.command()
@click.argument("memo_id")
@click.option("--with-sources", is_flag=True, help="Append the resolved citations.")
@click.pass_obj
def show(settings, memo_id, with_sources):
    """Render one memo, optionally with its evidence trail."""
    engine = settings.engine()
    try:
        artifact = engine.store.get(memo_id)
        text = artifact.text()
        sources = []
        if with_sources:
            for cited in sorted(set(CITATION_PATTERN.findall(text))):
                if cited in engine.store:
                    src = engine.store.get(cited)
                    sources.append(
                        {"id": cited, "category": src.category, "skill": src.producer_skill}
                    )
                else:
                    sources.append({"id": cited, "category": None, "skill": None})
        if settings.as_json:
            click.echo(json.dumps({"id": memo_id, "text": text, "sources": sources}, indent=2))
        else:
            click.echo(text)
            if with_sources:
                click.echo("\n## Evidence trail\n")
                for source in sources:
                    status = source["category"] or "UNRESOLVED"
                    click.echo(f"- {source['id']}  {status}  {source['skill'] or ''}")
    except ResearchPodError as exc:
        _fail(exc, settings.as_json)


# ---------------------------------------------------------------------------
# Service


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8400, show_default=True)
@click.option(
    "--static",
    "static_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory of built console assets to serve under /ui.",
)
@click.option("--workers", type=int, default=4, show_default=True, help="Dispatcher threads.")
@click.pass_obj
def serve(settings, host, port, static_dir, workers):
    """Run the HTTP service (loopback by default)."""
    from .api import serve as run_server

    run_server(
        settings.workspace,
        host=host,
        port=port,
        fixtures_root=settings.fixtures,
        live_sources=settings.live,
        max_workers=workers,
        static_dir=static_dir,
    )


if __name__ == "__main__":
    main()
