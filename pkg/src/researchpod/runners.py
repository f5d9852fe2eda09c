"""Skill runners: deterministic, hybrid, and agent execution.

All three present the same contract to the dispatcher: consume resolved
input artifacts, return artifact drafts. Deterministic bodies are Python
entrypoints that may not touch the provider. Hybrid bodies are prompts whose
provider output must parse against a fixed schema and then survive a
deterministic verifier, with up to R regeneration attempts. Agent bodies run
a bounded tool loop (read_artifact, search_artifacts, compute) and every
tool read is recorded so citations can be audited.
"""

from __future__ import annotations

import importlib
import json
import logging
import re
import time
from dataclasses import dataclass, field

import jsonschema

from .errors import (
    CitationError,
    LimitExceededError,
    RunnerError,
    UnknownIdError,
    VerifierRejectedError,
)
from .evidence import Artifact
from .providers import MALFORMED_MARKER
from .runtime import ArtifactDraft, RunContext
from .specs import Phase, RunnerKind, SkillSpec
from .util import canonical_json, safe_eval

log = logging.getLogger(__name__)

# Regeneration attempts after the first try, per hybrid task.
REGENERATION_ATTEMPTS = 2

TEXT_EXCERPT_CHARS = 24000
JSON_EXCERPT_CHARS = 8000

CITATION_RE = re.compile(r"\[\[artifact:([0-9a-f]{64})\]\]")

# Categories whose artifacts embody one persona's judgment; cross-persona
# reads of these are refused regardless of which skill produced them.
PERSONA_SCOPED_CATEGORIES = frozenset({"persona_view", "memo", "brief_assessment"})

AGENT_TURN_SCHEMA = {
    "title": "agent_turn",
    "type": "object",
    "required": ["action"],
    "properties": {
        "action": {"enum": ["tool", "final"]},
        "tool": {"type": "string"},
        "args": {"type": "object"},
        "output": {"type": "object"},
    },
}

PERSONA_VIEW_SCHEMA = {
    "title": "persona_view",
    "type": "object",
    "required": ["persona", "ticker", "sections"],
    "properties": {
        "persona": {"type": "string"},
        "ticker": {"type": "string"},
        "sections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["title", "body"],
                "properties": {"title": {"type": "string"}, "body": {"type": "string"}},
            },
        },
        "themes": {"type": "array", "items": {"type": "string"}},
        "verdict": {"enum": ["Buy", "Pass", "Hold", "Sell", None]},
    },
}


@dataclass
class VerifierReport:
    ok: bool
    stage: str = "semantic"
    problems: list = field(default_factory=list)

    def describe(self) -> str:
        return f"{self.stage}: " + "; ".join(str(p) for p in self.problems)


@dataclass
class HybridImpl:
    """Schema, semantic verifier, draft builder, and input view for one skill."""

    schema: dict
    verifier: object = None
    builder: object = None
    view: object = None


# Implementation registries keyed by skill id; the built-in library fills
# these at import, tests may add entries for synthetic skills.
HYBRID_IMPLS: dict[str, HybridImpl] = {}
AGENT_BUILDERS: dict[str, object] = {}


def register_hybrid(skill_id: str, schema: dict, verifier=None, builder=None, view=None) -> None:
    HYBRID_IMPLS[skill_id] = HybridImpl(schema=schema, verifier=verifier, builder=builder, view=view)


# ---------------------------------------------------------------------------
# Prompt rendering (the format the stub provider parses)

def render_params_block(params: dict, as_of: str) -> str:
    shown = {"as_of": as_of}
    for key, value in params.items():
        if key.startswith("_") or key.startswith("force_"):
            continue
        if isinstance(value, (list, tuple)):
            shown[key] = ", ".join(str(v) for v in value)
        elif isinstance(value, (str, int, float, bool)):
            shown[key] = str(value)
    lines = [f"{key}: {shown[key]}" for key in sorted(shown)]
    return "## Parameters\n" + "\n".join(lines)


def render_artifact_block(artifact: Artifact, view=None) -> str:
    header = f"### [[artifact:{artifact.id}]] category={artifact.category} skill={artifact.producer_skill}"
    excerpt = None
    if view is not None:
        excerpt = view(artifact)
    if excerpt is None:
        if artifact.payload_kind == "structured":
            excerpt = canonical_json(artifact.payload)[:JSON_EXCERPT_CHARS]
        else:
            excerpt = artifact.text()[:TEXT_EXCERPT_CHARS]
    return f"{header}\n{excerpt}"


def render_inputs_block(inputs: dict[str, list[Artifact]], view=None) -> str:
    blocks = []
    for category in sorted(inputs):
        for artifact in sorted(inputs[category], key=lambda a: a.id):
            blocks.append(render_artifact_block(artifact, view=view))
    return "## Inputs\n\n" + "\n\n".join(blocks) if blocks else "## Inputs\n\n(none)"


def render_catalog_block(inputs: dict[str, list[Artifact]]) -> str:
    lines = []
    for category in sorted(inputs):
        for artifact in sorted(inputs[category], key=lambda a: a.id):
            lines.append(
                f"- [[artifact:{artifact.id}]] category={category} skill={artifact.producer_skill}"
            )
    return "## Catalog\n" + ("\n".join(lines) if lines else "(empty)")


def _force_marker(spec: SkillSpec, params: dict) -> str:
    if params.get("force_malformed_skill") == spec.id:
        return "\n" + MALFORMED_MARKER
    return ""


# ---------------------------------------------------------------------------
# Independence

def artifact_persona(artifact: Artifact) -> str | None:
    """Which persona's judgment an artifact embodies, if any."""
    if artifact.payload_kind == "structured" and isinstance(artifact.payload, dict):
        value = artifact.payload.get("persona")
        return (value or None) if isinstance(value, str) else None
    try:
        text = artifact.text()
    except Exception:
        return None
    for line in text.splitlines()[:12]:
        stripped = line.strip()
        if stripped.lower().startswith("persona:"):
            return stripped.split(":", 1)[1].strip() or None
    return None


def acting_persona(spec: SkillSpec, ctx: RunContext) -> str | None:
    return spec.owner_persona or ctx.persona_id


def artifact_allowed(artifact: Artifact, spec: SkillSpec, ctx: RunContext) -> bool:
    """Independence policy: a persona never consumes another persona's
    compose-phase output."""
    me = acting_persona(spec, ctx)
    if artifact.category in PERSONA_SCOPED_CATEGORIES:
        owner = artifact_persona(artifact)
        return owner is None or owner == me
    if ctx.registry is not None and ctx.registry.has_skill(artifact.producer_skill):
        producer = ctx.registry.get_skill(artifact.producer_skill)
        if producer.phase is Phase.COMPOSE and producer.owner_persona not in (None, me):
            return False
    return True


def check_input_independence(spec: SkillSpec, inputs: dict, ctx: RunContext) -> None:
    for artifacts in inputs.values():
        for artifact in artifacts:
            if not artifact_allowed(artifact, spec, ctx):
                raise RunnerError(
                    f"independence violation: {spec.id} resolved input {artifact.id} "
                    f"({artifact.category}) belongs to another persona"
                )


class ToolSurface:
    """The three tools an agent skill may call, with read recording."""

    def __init__(self, spec: SkillSpec, task_id: str, inputs: dict, ctx: RunContext) -> None:
        self.spec = spec
        self.task_id = task_id
        self.ctx = ctx
        self.input_ids = {a.id for artifacts in inputs.values() for a in artifacts}
        self.read_ids: list[str] = []

    def invoke(self, tool: str, args: dict) -> str:
        handler = {
            "read_artifact": self._read_artifact,
            "search_artifacts": self._search_artifacts,
            "compute": self._compute,
        }.get(tool)
        if handler is None:
            raise RunnerError(f"unknown tool: {tool}")
        return handler(args or {})

    def _read_artifact(self, args: dict) -> str:
        artifact_id = args.get("id", "")
        try:
            artifact = self.ctx.store.get(artifact_id)
        except UnknownIdError:
            return f"tool error: no artifact {artifact_id}"
        if not artifact_allowed(artifact, self.spec, self.ctx):
            raise RunnerError(
                f"independence violation: {self.spec.id} attempted to read {artifact.id} "
                f"({artifact.category}) belonging to another persona"
            )
        self.read_ids.append(artifact.id)
        self.ctx.note_tool_read(self.task_id, artifact.id)
        return render_artifact_block(artifact)

    def _search_artifacts(self, args: dict) -> str:
        results = self.ctx.store.query(
            category=args.get("category"), ticker=args.get("ticker")
        )
        lines = []
        for artifact in results:
            if not artifact_allowed(artifact, self.spec, self.ctx):
                continue
            lines.append(
                f"- [[artifact:{artifact.id}]] category={artifact.category} "
                f"skill={artifact.producer_skill}"
            )
        return "\n".join(lines) if lines else "(no matches)"

    def _compute(self, args: dict) -> str:
        expression = args.get("expression", "")
        try:
            value = safe_eval(expression)
        except ValueError as exc:
            return f"tool error: {exc}"
        return f"{expression} -> {value}"


# ---------------------------------------------------------------------------
# Runners

def run_task(spec: SkillSpec, task_id: str, inputs: dict, ctx: RunContext) -> list[ArtifactDraft]:
    """Execute one task body; returns drafts for the dispatcher to append."""
    ctx.note_runner_invocation(task_id)
    ctx.note_resolved_inputs(
        task_id, sorted(a.id for artifacts in inputs.values() for a in artifacts)
    )
    check_input_independence(spec, inputs, ctx)
    started = time.monotonic()
    limits = spec.effective_limits()
    if spec.runner is RunnerKind.DETERMINISTIC:
        drafts = run_deterministic(spec, task_id, inputs, ctx)
    elif spec.runner is RunnerKind.HYBRID:
        drafts = run_hybrid(spec, task_id, inputs, ctx)
    else:
        drafts = run_agent(spec, task_id, inputs, ctx)
    elapsed = time.monotonic() - started
    if elapsed > limits["max_seconds"]:
        raise LimitExceededError(
            f"task {task_id} ran {elapsed:.1f}s, over the {limits['max_seconds']:.0f}s budget"
        )
    return drafts


def run_deterministic(spec: SkillSpec, task_id: str, inputs: dict, ctx: RunContext) -> list[ArtifactDraft]:
    """Resolve the body entrypoint (module:function) and call it without
    provider access."""
    module_name, _, func_name = spec.body.partition(":")
    if not module_name or not func_name:
        raise RunnerError(f"skill {spec.id}: bad entrypoint {spec.body!r}")
    try:
        module = importlib.import_module(module_name)
        func = getattr(module, func_name)
    except (ImportError, AttributeError) as exc:
        raise RunnerError(f"skill {spec.id}: cannot resolve entrypoint {spec.body!r}: {exc}") from exc
    try:
        drafts = func(inputs, dict(ctx.params), ctx.deterministic_view())
    except RunnerError:
        raise
    except Exception as exc:
        raise RunnerError(f"skill {spec.id} body failed: {exc}") from exc
    return list(drafts or [])


def run_hybrid(spec: SkillSpec, task_id: str, inputs: dict, ctx: RunContext) -> list[ArtifactDraft]:
    """Generate, parse, verify; regenerate with feedback up to R times."""
    impl = HYBRID_IMPLS.get(spec.id) or HybridImpl(schema={"title": spec.id, "type": "object"})
    base_prompt = (
        render_params_block(ctx.params, ctx.as_of)
        + "\n\n"
        + render_inputs_block(inputs, view=impl.view)
        + _force_marker(spec, ctx.params)
    )
    limits = spec.effective_limits()
    last_report = VerifierReport(ok=False, stage="structural", problems=["not attempted"])
    feedback = ""
    for attempt in range(1 + REGENERATION_ATTEMPTS):
        prompt = base_prompt + feedback
        response = ctx.call_provider(
            task_id, spec.id, system=spec.body, prompt=prompt,
            schema=impl.schema, max_calls=limits["max_provider_calls"],
        )
        try:
            parsed = json.loads(response)
            jsonschema.validate(parsed, impl.schema)
        except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
            last_report = VerifierReport(ok=False, stage="structural", problems=[str(exc).splitlines()[0]])
            feedback = f"\n\n## Verifier feedback\nattempt {attempt + 1} rejected: {last_report.describe()}"
            continue
        if impl.verifier is not None:
            report = impl.verifier(parsed, inputs, ctx)
            if not report.ok:
                last_report = report
                feedback = f"\n\n## Verifier feedback\nattempt {attempt + 1} rejected: {report.describe()}"
                continue
        if impl.builder is not None:
            return impl.builder(parsed, inputs, ctx, spec)
        return [_default_draft(spec, parsed, inputs)]
    raise VerifierRejectedError(
        f"skill {spec.id}: output rejected after {1 + REGENERATION_ATTEMPTS} attempts "
        f"({last_report.describe()})",
        report=last_report,
    )


def run_agent(spec: SkillSpec, task_id: str, inputs: dict, ctx: RunContext) -> list[ArtifactDraft]:
    """Bounded tool loop ending in a schema-validated final output."""
    limits = spec.effective_limits()
    max_calls = limits["max_provider_calls"]
    tools = ToolSurface(spec, task_id, inputs, ctx)
    catalog = render_catalog_block(inputs)
    params_block = render_params_block(ctx.params, ctx.as_of)
    transcript: list[str] = []
    call_count = 0
    while call_count < max_calls:
        prompt = params_block + "\n\n" + catalog + "\n\n## Transcript\n\n" + "\n\n".join(transcript)
        prompt += _force_marker(spec, ctx.params)
        response = ctx.call_provider(
            task_id, spec.id, system=spec.body, prompt=prompt,
            schema=AGENT_TURN_SCHEMA, max_calls=max_calls,
        )
        call_count += 1
        try:
            turn = json.loads(response)
            jsonschema.validate(turn, AGENT_TURN_SCHEMA)
        except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
            raise RunnerError(f"skill {spec.id}: malformed agent turn: {exc}") from exc
        if turn["action"] == "tool":
            tool = turn.get("tool", "")
            args = turn.get("args", {})
            result = tools.invoke(tool, args)
            label = _tool_label(tool, args)
            transcript.append(f"tool call {len(transcript) + 1}: {label}\n\n{result}")
            continue
        output = turn.get("output", {})
        return _finish_agent(spec, task_id, output, inputs, tools, ctx)
    raise LimitExceededError(
        f"skill {spec.id}: tool loop exhausted {max_calls} provider calls without a final answer"
    )


def _tool_label(tool: str, args: dict) -> str:
    if tool == "read_artifact":
        return f"read_artifact [[artifact:{args.get('id', '')}]]"
    if tool == "search_artifacts":
        return f"search_artifacts category={args.get('category')} ticker={args.get('ticker')}"
    return f"{tool} {args.get('expression', '')}"


def _finish_agent(spec, task_id, output, inputs, tools: ToolSurface, ctx: RunContext) -> list[ArtifactDraft]:
    try:
        jsonschema.validate(output, PERSONA_VIEW_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise VerifierRejectedError(
            f"skill {spec.id}: final output failed schema: {str(exc).splitlines()[0]}"
        ) from exc
    allowed = tools.input_ids | set(tools.read_ids)
    for section in output.get("sections", []):
        cited = CITATION_RE.findall(section.get("body", ""))
        for artifact_id in cited:
            if artifact_id not in allowed:
                raise CitationError(
                    f"skill {spec.id}: section {section.get('title')!r} cites "
                    f"{artifact_id} which was neither an input nor read via tools"
                )
        if not cited:
            message = (
                f"skill {spec.id}: section {section.get('title')!r} carries no citation"
            )
            if ctx.uncited_policy == "error":
                raise RunnerError(message)
            log.warning(message)
    persona = acting_persona(spec, ctx)
    if persona is not None:
        # The runner, not the model, is authoritative about whose judgment
        # a view embodies; the independence guard keys off this field.
        output = {**output, "persona": persona}
    builder = AGENT_BUILDERS.get(spec.id)
    if builder is not None:
        return builder(output, inputs, tools, ctx, spec)
    parents = tuple(sorted(allowed))
    return [
        ArtifactDraft(
            category=sorted(spec.produces)[0],
            payload=output,
            parents=parents,
        )
    ]


def _default_draft(spec: SkillSpec, parsed: dict, inputs: dict) -> ArtifactDraft:
    parents = tuple(sorted(a.id for artifacts in inputs.values() for a in artifacts))
    return ArtifactDraft(category=sorted(spec.produces)[0], payload=parsed, parents=parents)
