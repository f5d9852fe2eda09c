import pytest

from researchpod.errors import (
    DuplicateIdError,
    UnknownIdError,
    UnresolvableNeedError,
    ValidationError,
)
from researchpod.planner import PlanTemplate, TemplateRegistry
from researchpod.registry import SkillRegistry
from researchpod.specs import Phase, RunnerKind, SkillSpec


def spec(id, phase, runner, needs=(), produces=(), owner=None, body="b"):
    return SkillSpec(
        id=id,
        name=id,
        phase=Phase(phase),
        runner=RunnerKind(runner),
        needs=frozenset(needs),
        produces=frozenset(produces),
        body=body,
        owner_persona=owner,
    )


@pytest.fixture
def registry():
    reg = SkillRegistry()
    reg.register_skill(spec("coverage_brief", "setup", "deterministic", produces=["coverage_brief"]))
    reg.register_skill(
        spec("fetch_filings", "ingest", "deterministic", needs=["coverage_brief"], produces=["filings"])
    )
    reg.register_skill(
        spec("extract_kpis", "analyze", "hybrid", needs=["filings"], produces=["kpis"])
    )
    reg.register_skill(
        spec("gate_check", "analyze", "hybrid", needs=["filings", "kpis"], produces=["gate_report"])
    )
    return reg


def test_register_and_lookup(registry):
    assert registry.get_skill("extract_kpis").runner is RunnerKind.HYBRID
    assert registry.has_skill("gate_check")
    assert not registry.has_skill("nope")
    with pytest.raises(UnknownIdError):
        registry.get_skill("nope")


def test_duplicate_skill_id_rejected(registry):
    with pytest.raises(DuplicateIdError):
        registry.register_skill(spec("extract_kpis", "analyze", "hybrid", produces=["kpis"]))


def test_invalid_skill_rejected_at_registration(registry):
    with pytest.raises(ValidationError):
        registry.register_skill(spec("empty_producer", "analyze", "hybrid", produces=[]))


def test_producers_of_orders_lexicographically(registry):
    registry.register_skill(spec("alt_kpis", "analyze", "hybrid", needs=["filings"], produces=["kpis"]))
    assert registry.producers_of("kpis") == ["alt_kpis", "extract_kpis"]


def test_producers_of_puts_pin_first(registry):
    registry.register_skill(spec("alt_kpis", "analyze", "hybrid", needs=["filings"], produces=["kpis"]))
    assert registry.producers_of("kpis", pinned="extract_kpis") == ["extract_kpis", "alt_kpis"]
    # a pin that produces nothing relevant is ignored
    assert registry.producers_of("kpis", pinned="gate_check") == ["alt_kpis", "extract_kpis"]


def test_producers_of_filters_by_phase(registry):
    registry.register_skill(spec("late_kpis", "compose", "agent", produces=["kpis"]))
    assert "late_kpis" not in registry.producers_of("kpis", max_phase=Phase.ANALYZE)
    assert "late_kpis" in registry.producers_of("kpis", max_phase=Phase.COMPOSE)


# ---------------------------------------------------------------------------
# Persona onboarding


def pack_manifest(**overrides):
    manifest = {
        "id": "graham",
        "name": "Ben Graham",
        "title": "Father of Value",
        "sector_hint": "",
        "voice": "Quantitative. Margin of safety above all.",
        "skills": [
            {
                "id": "graham",
                "name": "Graham analysis",
                "runner": "agent",
                "needs": ["filings", "kpis"],
                "produces": ["memo"],
                "body": "Think in net-nets.",
            }
        ],
        "default_template": "graham-pitch",
        "workflows": [
            {
                "name": "Full Pitch",
                "template": "graham-pitch",
                "base_template": "pitch-memo",
            }
        ],
    }
    manifest.update(overrides)
    return manifest


@pytest.fixture
def templates(registry):
    reg = TemplateRegistry()
    reg.register(
        PlanTemplate(
            id="pitch-memo",
            engagement_type="pitch",
            compose_skill="assemble_memo",
            required_phases=(Phase.SETUP, Phase.INGEST, Phase.ANALYZE, Phase.COMPOSE),
            pinned_producers={"persona_view": "persona_analysis"},
            params={"workflow_name": "Pitch Memo", "persona": "generic", "required_sections": ["Thesis"]},
        )
    )
    return reg


def test_onboarding_normalizes_skill_onto_the_compose_contract(registry, templates):
    pack = registry.onboard_persona_pack(pack_manifest(), templates=templates)
    skill = registry.get_skill("graham")
    assert skill.phase is Phase.COMPOSE
    assert skill.runner is RunnerKind.AGENT
    # declared memo output is rewritten: personas produce views, the shared
    # compose skill writes the memo
    assert skill.produces == {"persona_view"}
    assert "gate_report" in skill.needs
    assert "persona_view" not in skill.needs
    assert skill.owner_persona == "graham"
    assert pack.primary_skill() == "graham"


def test_onboarding_appends_reference_notes_to_the_body(registry, templates):
    references = {"valuation": "Pay less than liquidation value.", "temperament": "Ignore quotes."}
    registry.onboard_persona_pack(pack_manifest(), templates=templates, references=references)
    body = registry.get_skill("graham").body
    assert body.startswith("Think in net-nets.")
    assert "# Reference note: temperament" in body
    assert "# Reference note: valuation" in body
    assert "Pay less than liquidation value." in body


def test_onboarding_derives_missing_workflow_templates(registry, templates):
    manifest = pack_manifest()
    manifest["workflows"].append(
        {
            "name": "Net-Net Screen",
            "template": "graham-screen",
            "base_template": "pitch-memo",
            "sections": ["Screen", "Conclusion"],
        }
    )
    registry.onboard_persona_pack(pack_manifest(**manifest), templates=templates)
    derived = templates.get("graham-screen")
    assert derived.compose_skill == "assemble_memo"
    assert derived.pinned_producers["persona_view"] == "graham"
    assert derived.params["persona"] == "graham"
    assert derived.params["sections"] == ["Screen", "Conclusion"]
    assert derived.params["required_sections"] == ["Screen", "Conclusion"]
    # base sections do not leak into the derived template
    full = templates.get("graham-pitch")
    assert "required_sections" not in full.params
    assert full.params["workflow_name"] == "Full Pitch"


def test_onboarding_rejects_unknown_base_template(registry, templates):
    manifest = pack_manifest()
    manifest["workflows"][0]["base_template"] = "no-such-base"
    with pytest.raises(UnknownIdError):
        registry.onboard_persona_pack(manifest, templates=templates)


def test_onboarding_rejects_unresolvable_needs(registry, templates):
    manifest = pack_manifest()
    manifest["skills"][0]["needs"] = ["filings", "satellite_positions"]
    with pytest.raises(UnresolvableNeedError):
        registry.onboard_persona_pack(manifest, templates=templates)


def test_onboarding_tolerates_optional_needs_without_producers(registry, templates):
    manifest = pack_manifest()
    manifest["skills"][0]["needs"] = ["filings", "news", "transcripts"]
    registry.onboard_persona_pack(manifest, templates=templates)
    assert {"news", "transcripts"} <= registry.get_skill("graham").needs


def test_duplicate_persona_rejected(registry, templates):
    registry.onboard_persona_pack(pack_manifest(), templates=templates)
    with pytest.raises(DuplicateIdError):
        registry.onboard_persona_pack(pack_manifest(), templates=templates)


def test_pack_without_skills_or_workflows_rejected(registry, templates):
    with pytest.raises(ValidationError):
        registry.onboard_persona_pack(pack_manifest(skills=[]), templates=templates)
    with pytest.raises(ValidationError):
        registry.onboard_persona_pack(pack_manifest(workflows=[]), templates=templates)


def test_persona_listing_and_lookup(registry, templates):
    registry.onboard_persona_pack(pack_manifest(), templates=templates)
    assert [p.id for p in registry.list_personas()] == ["graham"]
    assert registry.get_persona("graham").title == "Father of Value"
    with pytest.raises(UnknownIdError):
        registry.get_persona("lynch")
