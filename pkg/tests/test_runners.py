"""Runner contracts: prompt rendering, budgets, retries, tools, independence."""

from __future__ import annotations

import json
import logging

import pytest

from researchpod.errors import (
    CitationError,
    LimitExceededError,
    RunnerError,
    VerifierRejectedError,
)
from researchpod.runners import (
    AGENT_TURN_SCHEMA,
    HYBRID_IMPLS,
    PERSONA_SCOPED_CATEGORIES,
    PERSONA_VIEW_SCHEMA,
    REGENERATION_ATTEMPTS,
    HybridImpl,
    ToolSurface,
    VerifierReport,
    acting_persona,
    artifact_allowed,
    artifact_persona,
    check_input_independence,
    render_artifact_block,
    render_catalog_block,
    render_inputs_block,
    render_params_block,
    run_task,
)
from researchpod.runtime import ArtifactDraft, RunContext
from researchpod.specs import Phase, RunnerKind, SkillSpec


class ScriptedProvider:
    """Returns canned responses in order and keeps the prompts for asserts."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.prompts: list[str] = []
        self.systems: list[str] = []

    def complete(self, system, prompt, schema=None, seed=0):
        self.prompts.append(prompt)
        self.systems.append(system)
        assert self.responses, "provider script exhausted"
        item = self.responses.pop(0)
        return item(prompt) if callable(item) else item


def make_spec(
    skill_id="test_skill",
    phase=Phase.ANALYZE,
    runner=RunnerKind.HYBRID,
    needs=(),
    produces=("scratch_note",),
    body="produce a note",
    owner=None,
    limits=None,
):
    return SkillSpec(
        id=skill_id,
        name=skill_id,
        phase=phase,
        runner=runner,
        needs=frozenset(needs),
        produces=frozenset(produces),
        body=body,
        owner_persona=owner,
        limits=dict(limits or {}),
    )


def make_ctx(store, provider, registry=None, persona_id=None, params=None, **kwargs):
    return RunContext(
        engagement_id="eng-runner",
        store=store,
        provider=provider,
        registry=registry,
        seed=7,
        as_of="2026-02-26T21:00:00+00:00",
        params={"ticker": "NVDA", **(params or {})},
        persona_id=persona_id,
        **kwargs,
    )


@pytest.fixture
def kpi_input(store):
    artifact = store.append(
        "kpis",
        {"ticker": "NVDA", "metrics": {"price": {"value": 235.0}}},
        engagement_id="eng-runner",
        producer_skill="extract_kpis",
    )
    return {"kpis": [artifact]}


# ------------------------------------------------------------- rendering


def test_render_params_block_filters_and_sorts():
    block = render_params_block(
        {
            "ticker": "NVDA",
            "_internal": "hide me",
            "force_malformed_skill": "x",
            "sections": ["A", "B"],
            "depth": 3,
            "nested": {"not": "shown"},
        },
        as_of="2026-02-26T21:00:00+00:00",
    )
    lines = block.splitlines()
    assert lines[0] == "## Parameters"
    assert "as_of: 2026-02-26T21:00:00+00:00" in lines
    assert "sections: A, B" in lines
    assert "depth: 3" in lines
    assert not any("_internal" in l or "force_" in l or "nested" in l for l in lines)
    assert lines[1:] == sorted(lines[1:])


def test_render_artifact_block_shapes(store):
    structured = store.append(
        "kpis", {"b": 2, "a": 1}, engagement_id="eng-runner", producer_skill="extract_kpis"
    )
    text = store.append(
        "filings", "ITEM 1. BUSINESS", engagement_id="eng-runner", producer_skill="fetch_filings"
    )
    s_block = render_artifact_block(structured)
    assert s_block.startswith(
        f"### [[artifact:{structured.id}]] category=kpis skill=extract_kpis"
    )
    assert '{"a":1,"b":2}' in s_block
    t_block = render_artifact_block(text)
    assert "ITEM 1. BUSINESS" in t_block
    # A view callback can replace the excerpt, and None means fall through.
    assert render_artifact_block(structured, view=lambda a: "summarized").endswith("summarized")
    assert '{"a":1,"b":2}' in render_artifact_block(structured, view=lambda a: None)


def test_render_inputs_and_catalog_blocks(store, kpi_input):
    assert render_inputs_block({}) == "## Inputs\n\n(none)"
    assert render_catalog_block({}) == "## Catalog\n(empty)"
    inputs_block = render_inputs_block(kpi_input)
    catalog = render_catalog_block(kpi_input)
    artifact = kpi_input["kpis"][0]
    assert f"[[artifact:{artifact.id}]]" in inputs_block
    assert f"- [[artifact:{artifact.id}]] category=kpis skill=extract_kpis" in catalog


# ---------------------------------------------------------- independence


def test_artifact_persona_reads_structured_and_front_matter(store):
    owned = store.append(
        "persona_view",
        {"persona": "buffett", "sections": []},
        engagement_id="e",
        producer_skill="buffett",
    )
    unowned = store.append(
        "persona_view",
        {"persona": "", "sections": []},
        engagement_id="e",
        producer_skill="persona_analysis",
    )
    memo = store.append(
        "memo",
        "---\npersona: omaha\nticker: NVDA\n---\n\n## Thesis\n\nbody\n",
        engagement_id="e",
        producer_skill="assemble_memo",
    )
    plain = store.append(
        "filings", "no front matter here", engagement_id="e", producer_skill="fetch_filings"
    )
    assert artifact_persona(owned) == "buffett"
    assert artifact_persona(unowned) is None
    assert artifact_persona(memo) == "omaha"
    assert artifact_persona(plain) is None


def test_acting_persona_owner_wins(store):
    ctx = make_ctx(store, ScriptedProvider([]), persona_id="generic")
    assert acting_persona(make_spec(owner="buffett"), ctx) == "buffett"
    assert acting_persona(make_spec(), ctx) == "generic"
    bare = make_ctx(store, ScriptedProvider([]))
    assert acting_persona(make_spec(), bare) is None


def test_persona_scoped_artifact_blocked_across_personas(store):
    view = store.append(
        "persona_view",
        {"persona": "omaha", "sections": []},
        engagement_id="e",
        producer_skill="omaha",
    )
    ctx = make_ctx(store, ScriptedProvider([]))
    assert artifact_allowed(view, make_spec(owner="omaha"), ctx)
    assert not artifact_allowed(view, make_spec(owner="buffett"), ctx)
    unowned = store.append(
        "persona_view",
        {"persona": "", "sections": []},
        engagement_id="e",
        producer_skill="persona_analysis",
    )
    assert artifact_allowed(unowned, make_spec(owner="buffett"), ctx)


def test_compose_output_blocked_by_producer_ownership(store, module_engine):
    # Not in the persona-scoped category list, but produced by a compose
    # skill owned by another persona: the registry check catches it.
    scratch = store.append(
        "scratch_note",
        {"text": "private working note"},
        engagement_id="e",
        producer_skill="buffett",
    )
    ctx = make_ctx(store, ScriptedProvider([]), registry=module_engine.registry)
    assert "scratch_note" not in PERSONA_SCOPED_CATEGORIES
    assert not artifact_allowed(scratch, make_spec(owner="generic"), ctx)
    assert artifact_allowed(scratch, make_spec(owner="buffett"), ctx)
    no_registry = make_ctx(store, ScriptedProvider([]))
    assert artifact_allowed(scratch, make_spec(owner="generic"), no_registry)


def test_check_input_independence_raises(store):
    view = store.append(
        "persona_view",
        {"persona": "omaha", "sections": []},
        engagement_id="e",
        producer_skill="omaha",
    )
    ctx = make_ctx(store, ScriptedProvider([]))
    with pytest.raises(RunnerError) as excinfo:
        check_input_independence(
            make_spec(owner="buffett"), {"persona_view": [view]}, ctx
        )
    assert "independence violation" in str(excinfo.value)
    assert view.id in str(excinfo.value)


# ---------------------------------------------------------- deterministic


def test_deterministic_runs_entrypoint(store, kpi_input):
    spec = make_spec(
        runner=RunnerKind.DETERMINISTIC, body="skillbodies:make_note", phase=Phase.SETUP
    )
    ctx = make_ctx(store, ScriptedProvider([]), params={"note": "hello"})
    drafts = run_task(spec, "t1", kpi_input, ctx)
    assert len(drafts) == 1
    assert drafts[0].category == "scratch_note"
    assert drafts[0].payload == {"note": "hello", "n_inputs": 1}
    assert ctx.runner_invocations == {"t1": 1}
    assert ctx.resolved_input_ids["t1"] == [kpi_input["kpis"][0].id]
    assert ctx.provider_calls == 0


def test_deterministic_provider_access_refused(store):
    spec = make_spec(runner=RunnerKind.DETERMINISTIC, body="skillbodies:forbidden_call")
    with pytest.raises(RunnerError) as excinfo:
        run_task(spec, "t1", {}, make_ctx(store, ScriptedProvider(["never"])))
    assert "deterministic skill attempted a provider call" in str(excinfo.value)


def test_deterministic_body_failure_wrapped(store):
    spec = make_spec(runner=RunnerKind.DETERMINISTIC, body="skillbodies:boom")
    with pytest.raises(RunnerError) as excinfo:
        run_task(spec, "t1", {}, make_ctx(store, ScriptedProvider([])))
    assert "body failed" in str(excinfo.value)


@pytest.mark.parametrize("body", ["no_colon_here", "missing_module:fn", "skillbodies:absent"])
def test_deterministic_bad_entrypoints(store, body):
    spec = make_spec(runner=RunnerKind.DETERMINISTIC, body=body)
    with pytest.raises(RunnerError):
        run_task(spec, "t1", {}, make_ctx(store, ScriptedProvider([])))


def test_wall_clock_budget_enforced(store):
    spec = make_spec(
        runner=RunnerKind.DETERMINISTIC,
        body="skillbodies:slow",
        limits={"max_seconds": 0.01},
    )
    with pytest.raises(LimitExceededError) as excinfo:
        run_task(spec, "t1", {}, make_ctx(store, ScriptedProvider([])))
    assert "budget" in str(excinfo.value)


# ----------------------------------------------------------------- hybrid


def test_hybrid_default_impl_happy_path(store, kpi_input):
    provider = ScriptedProvider([json.dumps({"finding": "margins up"})])
    spec = make_spec(skill_id="unregistered_hybrid")
    ctx = make_ctx(store, provider)
    drafts = run_task(spec, "t1", kpi_input, ctx)
    assert drafts[0].category == "scratch_note"
    assert drafts[0].payload == {"finding": "margins up"}
    assert drafts[0].parents == (kpi_input["kpis"][0].id,)
    assert ctx.provider_calls == 1
    assert "## Parameters" in provider.prompts[0]
    assert "## Inputs" in provider.prompts[0]
    assert provider.systems[0] == spec.body


def test_hybrid_structural_retry_carries_feedback(store):
    provider = ScriptedProvider(["this is not json", json.dumps({"ok": True})])
    spec = make_spec(skill_id="unregistered_hybrid")
    drafts = run_task(spec, "t1", {}, make_ctx(store, provider))
    assert drafts[0].payload == {"ok": True}
    assert len(provider.prompts) == 2
    assert "## Verifier feedback" not in provider.prompts[0]
    assert "attempt 1 rejected: structural" in provider.prompts[1]


def test_hybrid_schema_violation_retries(store, monkeypatch):
    schema = {
        "title": "strict_note",
        "type": "object",
        "required": ["finding"],
        "properties": {"finding": {"type": "string"}},
    }
    monkeypatch.setitem(HYBRID_IMPLS, "strict_hybrid", HybridImpl(schema=schema))
    provider = ScriptedProvider(
        [json.dumps({"wrong_key": 1}), json.dumps({"finding": "fixed"})]
    )
    spec = make_spec(skill_id="strict_hybrid")
    drafts = run_task(spec, "t1", {}, make_ctx(store, provider))
    assert drafts[0].payload == {"finding": "fixed"}
    assert len(provider.prompts) == 2


def test_hybrid_semantic_rejection_exhausts_attempts(store, monkeypatch):
    def always_reject(parsed, inputs, ctx):
        return VerifierReport(ok=False, problems=["number disagrees with source"])

    monkeypatch.setitem(
        HYBRID_IMPLS,
        "picky_hybrid",
        HybridImpl(schema={"title": "note", "type": "object"}, verifier=always_reject),
    )
    provider = ScriptedProvider([json.dumps({"v": i}) for i in range(3)])
    spec = make_spec(skill_id="picky_hybrid")
    with pytest.raises(VerifierRejectedError) as excinfo:
        run_task(spec, "t1", {}, make_ctx(store, provider))
    assert f"after {1 + REGENERATION_ATTEMPTS} attempts" in str(excinfo.value)
    assert excinfo.value.report.problems == ["number disagrees with source"]
    assert len(provider.prompts) == 3
    assert "attempt 2 rejected: semantic" in provider.prompts[2]


def test_hybrid_call_budget_cuts_retries_short(store):
    provider = ScriptedProvider(["junk", "junk", "junk"])
    spec = make_spec(skill_id="unregistered_hybrid", limits={"max_provider_calls": 2})
    ctx = make_ctx(store, provider)
    with pytest.raises(LimitExceededError) as excinfo:
        run_task(spec, "t1", {}, ctx)
    assert "exceeded provider-call budget (2)" in str(excinfo.value)
    assert ctx.provider_calls == 2


# ------------------------------------------------------------------ agent


def agent_spec(owner="buffett", limits=None):
    return make_spec(
        skill_id="view_writer",
        phase=Phase.COMPOSE,
        runner=RunnerKind.AGENT,
        needs=("kpis",),
        produces=("persona_view",),
        body="Write the persona view.",
        owner=owner,
        limits=limits or {"max_provider_calls": 4},
    )


def tool_turn(tool, **args):
    return json.dumps({"action": "tool", "tool": tool, "args": args})


def final_turn(sections, persona="model-claims", verdict=None):
    return json.dumps(
        {
            "action": "final",
            "output": {
                "persona": persona,
                "ticker": "NVDA",
                "sections": sections,
                "themes": ["AI Infrastructure"],
                "verdict": verdict,
            },
        }
    )


def test_agent_loop_reads_then_finishes(store, kpi_input):
    kpi_id = kpi_input["kpis"][0].id
    provider = ScriptedProvider(
        [
            tool_turn("read_artifact", id=kpi_id),
            final_turn(
                [{"title": "Thesis", "body": f"Margins hold. [[artifact:{kpi_id}]]"}]
            ),
        ]
    )
    ctx = make_ctx(store, provider)
    drafts = run_task(agent_spec(), "t1", kpi_input, ctx)
    assert len(drafts) == 1
    assert drafts[0].category == "persona_view"
    assert drafts[0].parents == (kpi_id,)
    assert ctx.tool_reads["t1"] == [kpi_id]
    assert ctx.provider_calls == 2
    assert "## Catalog" in provider.prompts[0]
    assert f"read_artifact [[artifact:{kpi_id}]]" in provider.prompts[1]


def test_agent_output_persona_is_stamped_by_runner(store, kpi_input):
    kpi_id = kpi_input["kpis"][0].id
    provider = ScriptedProvider(
        [final_turn([{"title": "Thesis", "body": f"x [[artifact:{kpi_id}]]"}], persona="impostor")]
    )
    drafts = run_task(agent_spec(owner="buffett"), "t1", kpi_input, make_ctx(store, provider))
    assert drafts[0].payload["persona"] == "buffett"


def test_agent_citation_must_come_from_inputs_or_reads(store, kpi_input):
    foreign = "ab" * 32
    provider = ScriptedProvider(
        [final_turn([{"title": "Thesis", "body": f"made up [[artifact:{foreign}]]"}])]
    )
    with pytest.raises(CitationError) as excinfo:
        run_task(agent_spec(), "t1", kpi_input, make_ctx(store, provider))
    assert "neither an input nor read via tools" in str(excinfo.value)


def test_agent_uncited_section_policy(store, kpi_input, caplog):
    provider = ScriptedProvider([final_turn([{"title": "Thesis", "body": "no citation"}])])
    ctx = make_ctx(store, provider)
    with caplog.at_level(logging.WARNING, logger="researchpod.runners"):
        drafts = run_task(agent_spec(), "t1", kpi_input, ctx)
    assert drafts and any("carries no citation" in r.message for r in caplog.records)

    strict = make_ctx(
        store,
        ScriptedProvider([final_turn([{"title": "Thesis", "body": "no citation"}])]),
        uncited_policy="error",
    )
    with pytest.raises(RunnerError) as excinfo:
        run_task(agent_spec(), "t1", kpi_input, strict)
    assert "carries no citation" in str(excinfo.value)


def test_agent_malformed_turn_fails_fast(store, kpi_input):
    provider = ScriptedProvider(["not a json turn"])
    with pytest.raises(RunnerError) as excinfo:
        run_task(agent_spec(), "t1", kpi_input, make_ctx(store, provider))
    assert "malformed agent turn" in str(excinfo.value)


def test_agent_final_output_schema_enforced(store, kpi_input):
    provider = ScriptedProvider(
        [json.dumps({"action": "final", "output": {"persona": "p"}})]
    )
    with pytest.raises(VerifierRejectedError) as excinfo:
        run_task(agent_spec(), "t1", kpi_input, make_ctx(store, provider))
    assert "failed schema" in str(excinfo.value)


def test_agent_loop_exhaustion(store, kpi_input):
    kpi_id = kpi_input["kpis"][0].id
    provider = ScriptedProvider([tool_turn("compute", expression="1+1")] * 2)
    spec = agent_spec(limits={"max_provider_calls": 2})
    with pytest.raises(LimitExceededError) as excinfo:
        run_task(spec, "t1", kpi_input, make_ctx(store, provider))
    assert "tool loop exhausted" in str(excinfo.value)


def test_agent_tool_read_of_foreign_view_refused(store, kpi_input):
    foreign_view = store.append(
        "persona_view",
        {"persona": "omaha", "sections": []},
        engagement_id="e",
        producer_skill="omaha",
    )
    provider = ScriptedProvider([tool_turn("read_artifact", id=foreign_view.id)])
    with pytest.raises(RunnerError) as excinfo:
        run_task(agent_spec(owner="buffett"), "t1", kpi_input, make_ctx(store, provider))
    assert "independence violation" in str(excinfo.value)
    assert "attempted to read" in str(excinfo.value)


# ------------------------------------------------------------ tool surface


def test_tool_surface_compute_and_errors(store, kpi_input):
    ctx = make_ctx(store, ScriptedProvider([]))
    tools = ToolSurface(agent_spec(), "t1", kpi_input, ctx)
    assert tools.invoke("compute", {"expression": "2+3*4"}) == "2+3*4 -> 14"
    assert tools.invoke("compute", {"expression": "__import__('os')"}).startswith("tool error")
    with pytest.raises(RunnerError):
        tools.invoke("teleport", {})


def test_tool_surface_read_unknown_is_soft_error(store, kpi_input):
    ctx = make_ctx(store, ScriptedProvider([]))
    tools = ToolSurface(agent_spec(), "t1", kpi_input, ctx)
    out = tools.invoke("read_artifact", {"id": "ff" * 32})
    assert out.startswith("tool error: no artifact")
    assert tools.read_ids == []


def test_tool_surface_search_hides_foreign_views(store, kpi_input):
    mine = store.append(
        "persona_view",
        {"persona": "buffett", "sections": []},
        engagement_id="e",
        producer_skill="buffett",
    )
    store.append(
        "persona_view",
        {"persona": "omaha", "sections": []},
        engagement_id="e",
        producer_skill="omaha",
    )
    ctx = make_ctx(store, ScriptedProvider([]))
    tools = ToolSurface(agent_spec(owner="buffett"), "t1", kpi_input, ctx)
    out = tools.invoke("search_artifacts", {"category": "persona_view"})
    assert mine.id in out
    assert "omaha" not in out
    none = tools.invoke("search_artifacts", {"category": "transcripts"})
    assert none == "(no matches)"


# ---------------------------------------------------------------- schemas


def test_published_schemas_have_stable_titles():
    assert AGENT_TURN_SCHEMA["title"] == "agent_turn"
    assert PERSONA_VIEW_SCHEMA["title"] == "persona_view"
    assert set(PERSONA_VIEW_SCHEMA["required"]) == {"persona", "ticker", "sections"}
    assert PERSONA_SCOPED_CATEGORIES == {"persona_view", "memo", "brief_assessment"}
