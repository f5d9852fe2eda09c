"""Skill and persona registry.

Holds validated SkillSpecs keyed by id, answers producer lookups for the
planner, and onboards external persona packs by adapting their declared
contracts onto the shared compose pipeline: pack skills are registered as
compose-phase agent skills owned by the persona, writing persona_view
artifacts that the common memo assembler consumes.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .categories import OPTIONAL_CATEGORIES, CategoryVocabulary
from .errors import (
    DuplicateIdError,
    UnknownIdError,
    UnresolvableNeedError,
    ValidationError,
)
from .specs import (
    PersonaPack,
    Phase,
    PlanTemplate,
    RunnerKind,
    SkillSpec,
    WorkflowEntry,
    validate_pack,
    validate_spec,
)

log = logging.getLogger(__name__)


class SkillRegistry:
    def __init__(self, vocabulary: CategoryVocabulary | None = None) -> None:
        self._skills: dict[str, SkillSpec] = {}
        self._personas: dict[str, PersonaPack] = {}
        self.vocabulary = vocabulary or CategoryVocabulary()

    # ------------------------------------------------------------------
    # Skills

    def register_skill(self, spec: SkillSpec) -> SkillSpec:
        if spec.id in self._skills:
            raise DuplicateIdError(f"skill id already registered: {spec.id}")
        violations = validate_spec(spec)
        if violations:
            raise ValidationError(f"invalid skill {spec.id}: " + "; ".join(violations))
        for category in sorted(spec.needs | spec.produces):
            self.vocabulary.check(category, context=f"skill {spec.id}")
        self._skills[spec.id] = spec
        return spec

    def get_skill(self, skill_id: str) -> SkillSpec:
        try:
            return self._skills[skill_id]
        except KeyError:
            raise UnknownIdError(f"no skill {skill_id}") from None

    def has_skill(self, skill_id: str) -> bool:
        return skill_id in self._skills

    def list_skills(self) -> list[SkillSpec]:
        return [self._skills[k] for k in sorted(self._skills)]

    def producers_of(
        self,
        category: str,
        pinned: str | None = None,
        max_phase: Phase | None = None,
    ) -> list[str]:
        """Skill ids producing a category, in deterministic tie-break order.

        A pinned producer (from the active plan template) comes first when it
        qualifies; the rest follow in lexicographic id order. When max_phase
        is given, producers in later phases are excluded so selections stay
        phase-monotone.
        """
        eligible = [
            spec.id
            for spec in self._skills.values()
            if category in spec.produces
            and (max_phase is None or spec.phase.order <= max_phase.order)
        ]
        eligible.sort()
        if pinned is not None and pinned in eligible:
            eligible.remove(pinned)
            eligible.insert(0, pinned)
        return eligible

    def load_skill_dir(self, path: Path | str) -> list[SkillSpec]:
        """Register every *.json skill manifest under a directory."""
        loaded = []
        for manifest_path in sorted(Path(path).glob("*.json")):
            data = json.loads(manifest_path.read_text(encoding="utf-8"))
            loaded.append(self.register_skill(SkillSpec.from_dict(data)))
        return loaded

    # ------------------------------------------------------------------
    # Personas

    def get_persona(self, persona_id: str) -> PersonaPack:
        try:
            return self._personas[persona_id]
        except KeyError:
            raise UnknownIdError(f"no persona {persona_id}") from None

    def has_persona(self, persona_id: str) -> bool:
        return persona_id in self._personas

    def list_personas(self) -> list[PersonaPack]:
        return [self._personas[k] for k in sorted(self._personas)]

    def onboard_persona_pack(
        self,
        manifest: dict,
        templates=None,
        references: dict[str, str] | None = None,
    ) -> PersonaPack:
        """Validate and register an external persona pack.

        The manifest declares identity fields, one or more skills, and the
        workflows the persona offers. Each declared need must be producible
        by the registry or by a sibling skill in the pack. Skills are
        normalized onto the pipeline contract: compose phase, agent runner,
        produces persona_view, plus a gate_report dependency when a gate is
        registered. Reference notes are appended verbatim to the skill body.
        """
        references = references or {}
        persona_id = manifest.get("id")
        if not persona_id:
            raise ValidationError("malformed pack manifest: missing id")
        if persona_id in self._personas:
            raise DuplicateIdError(f"persona already registered: {persona_id}")
        declared_skills = manifest.get("skills") or []
        if not declared_skills:
            raise ValidationError(f"malformed pack manifest {persona_id}: zero skills")

        pack_produces = set()
        for entry in declared_skills:
            pack_produces.update(entry.get("produces", ()))

        normalized: list[SkillSpec] = []
        for entry in declared_skills:
            raw = SkillSpec.from_dict({"phase": "compose", "runner": "agent", **entry})
            unresolved = [
                need
                for need in sorted(raw.needs)
                if not self.producers_of(need)
                and need not in pack_produces
                and need not in OPTIONAL_CATEGORIES
            ]
            if unresolved:
                raise UnresolvableNeedError(
                    f"pack {persona_id} skill {raw.id}: no producer for {unresolved}"
                )
            needs = set(raw.needs)
            if self.producers_of("gate_report"):
                needs.add("gate_report")
            needs.discard("persona_view")
            body = raw.body
            for note_name in sorted(references):
                body += f"\n\n# Reference note: {note_name}\n\n{references[note_name].strip()}\n"
            normalized.append(
                SkillSpec(
                    id=raw.id,
                    name=raw.name,
                    phase=Phase.COMPOSE,
                    runner=RunnerKind.AGENT,
                    needs=frozenset(needs),
                    produces=frozenset({"persona_view"}),
                    body=body,
                    model_config=raw.model_config,
                    limits=raw.limits,
                    owner_persona=persona_id,
                )
            )

        workflow_dicts = manifest.get("workflows") or []
        if not workflow_dicts:
            raise ValidationError(f"malformed pack manifest {persona_id}: zero workflows")
        entries = tuple(
            WorkflowEntry(
                name=w["name"], template=w["template"], description=w.get("description", "")
            )
            for w in workflow_dicts
        )

        pack = PersonaPack(
            id=persona_id,
            name=manifest.get("name", persona_id),
            title=manifest.get("title", ""),
            sector_hint=manifest.get("sector_hint", ""),
            voice=manifest.get("voice", ""),
            skills=tuple(spec.id for spec in normalized),
            default_template=manifest.get("default_template", entries[0].template),
            workflows=entries,
            references=tuple(sorted(references)),
            config=dict(manifest.get("config", {})),
        )
        violations = validate_pack(pack)
        if violations:
            raise ValidationError(f"invalid pack {persona_id}: " + "; ".join(violations))

        if templates is not None:
            self._register_pack_templates(pack, workflow_dicts, manifest, templates)

        for spec in normalized:
            self.register_skill(spec)
        self._personas[persona_id] = pack
        log.info("onboarded persona %s with skills %s", persona_id, list(pack.skills))
        return pack

    def _register_pack_templates(self, pack, workflow_dicts, manifest, templates) -> None:
        """Create plan templates for pack workflows not already registered.

        New templates are variants of a base template (default pitch-memo):
        same compose skill and phases, with persona_view pinned to the
        pack's own skill and any per-workflow section list carried in params.
        """
        for entry in workflow_dicts:
            template_id = entry["template"]
            if templates.has(template_id):
                continue
            base_id = entry.get("base_template") or manifest.get("base_template") or "pitch-memo"
            if not templates.has(base_id):
                raise UnknownIdError(
                    f"pack {pack.id} workflow {entry['name']!r}: unknown base template {base_id}"
                )
            base = templates.get(base_id)
            params = dict(base.params)
            params.pop("required_sections", None)
            params["workflow_name"] = entry["name"]
            params["persona"] = pack.id
            if entry.get("sections"):
                params["sections"] = list(entry["sections"])
                params["required_sections"] = list(entry["sections"])
            templates.register(
                PlanTemplate(
                    id=template_id,
                    engagement_type=base.engagement_type,
                    compose_skill=base.compose_skill,
                    required_phases=base.required_phases,
                    pinned_producers={**base.pinned_producers, "persona_view": pack.primary_skill()},
                    params=params,
                )
            )
