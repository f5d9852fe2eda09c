"""Core declarative types: phases, runner kinds, skills, personas, templates.

A SkillSpec is the unit of capability. Its needs/produces contract (artifact
categories in, artifact categories out) is what the planner wires into task
graphs; the body is opaque procedural content interpreted by the runner.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .categories import is_valid_category
from .errors import ValidationError

ID_PATTERN = re.compile(r"^[a-z][a-z0-9_-]*$")


class Phase(str, Enum):
    """Engagement phases, ordered. Edges never point to an earlier phase."""

    SETUP = "setup"
    INGEST = "ingest"
    ANALYZE = "analyze"
    COMPOSE = "compose"
    MAINTAIN = "maintain"

    @property
    def order(self) -> int:
        return _PHASE_ORDER[self]


_PHASE_ORDER = {
    Phase.SETUP: 0,
    Phase.INGEST: 1,
    Phase.ANALYZE: 2,
    Phase.COMPOSE: 3,
    Phase.MAINTAIN: 4,
}

PHASES_IN_ORDER = tuple(sorted(Phase, key=lambda p: p.order))


class RunnerKind(str, Enum):
    DETERMINISTIC = "deterministic"
    HYBRID = "hybrid"
    AGENT = "agent"


DEFAULT_LIMITS = {
    RunnerKind.DETERMINISTIC: {"max_seconds": 30.0, "max_provider_calls": 0},
    RunnerKind.HYBRID: {"max_seconds": 60.0, "max_provider_calls": 4},
    RunnerKind.AGENT: {"max_seconds": 300.0, "max_provider_calls": 8},
}


@dataclass(frozen=True)
class SkillSpec:
    """Declarative description of one skill."""

    id: str
    name: str
    phase: Phase
    runner: RunnerKind
    needs: frozenset[str]
    produces: frozenset[str]
    body: str
    model_config: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict)
    owner_persona: str | None = None

    def effective_limits(self) -> dict:
        merged = dict(DEFAULT_LIMITS[self.runner])
        merged.update(self.limits)
        return merged

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "phase": self.phase.value,
            "runner": self.runner.value,
            "needs": sorted(self.needs),
            "produces": sorted(self.produces),
            "body": self.body,
            "model_config": dict(self.model_config),
            "limits": dict(self.limits),
            "owner_persona": self.owner_persona,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SkillSpec":
        try:
            return cls(
                id=data["id"],
                name=data.get("name", data["id"]),
                phase=Phase(data["phase"]),
                runner=RunnerKind(data["runner"]),
                needs=frozenset(data.get("needs", ())),
                produces=frozenset(data.get("produces", ())),
                body=data.get("body", ""),
                model_config=dict(data.get("model_config", {})),
                limits=dict(data.get("limits", {})),
                owner_persona=data.get("owner_persona"),
            )
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"malformed skill manifest: {exc}") from exc


def validate_spec(spec: SkillSpec) -> list[str]:
    """Structural checks; returns a list of violations (empty means valid)."""
    violations = []
    if not ID_PATTERN.match(spec.id):
        violations.append(f"bad skill id: {spec.id!r}")
    if not spec.produces:
        violations.append("produces must be non-empty")
    overlap = spec.needs & spec.produces
    if overlap:
        violations.append(f"needs and produces overlap: {sorted(overlap)}")
    for category in sorted(spec.needs | spec.produces):
        if not is_valid_category(category):
            violations.append(f"bad category id: {category!r}")
    if spec.runner is RunnerKind.DETERMINISTIC and spec.model_config:
        violations.append("deterministic skill must not carry model_config")
    limits = spec.effective_limits()
    if limits.get("max_seconds", 0) <= 0:
        violations.append("max_seconds must be positive")
    if limits.get("max_provider_calls", 0) < 0:
        violations.append("max_provider_calls must be >= 0")
    return violations


@dataclass(frozen=True)
class WorkflowEntry:
    """One launchable workflow shown under a persona."""

    name: str
    template: str
    description: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "template": self.template, "description": self.description}


@dataclass(frozen=True)
class PersonaPack:
    """A registered persona: identity, voice, owned skills, and workflows."""

    id: str
    name: str
    title: str
    sector_hint: str
    voice: str
    skills: tuple[str, ...]
    default_template: str
    workflows: tuple[WorkflowEntry, ...]
    references: tuple[str, ...] = ()
    config: dict = field(default_factory=dict)

    def primary_skill(self) -> str:
        return self.skills[0]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "title": self.title,
            "sector_hint": self.sector_hint,
            "voice": self.voice,
            "skills": list(self.skills),
            "default_template": self.default_template,
            "workflows": [w.to_dict() for w in self.workflows],
            "references": list(self.references),
            "config": dict(self.config),
        }


def validate_pack(pack: PersonaPack) -> list[str]:
    violations = []
    if not ID_PATTERN.match(pack.id):
        violations.append(f"bad persona id: {pack.id!r}")
    if not pack.skills:
        violations.append("pack declares no skills")
    if not pack.workflows:
        violations.append("pack declares no workflows")
    template_ids = {w.template for w in pack.workflows}
    if pack.default_template not in template_ids:
        violations.append(
            f"default_template {pack.default_template!r} not among workflow templates"
        )
    return violations


@dataclass(frozen=True)
class PlanTemplate:
    """Engagement recipe: which compose skill anchors the graph, which
    phases are required, and any pinned producers for ambiguous categories."""

    id: str
    engagement_type: str
    compose_skill: str
    required_phases: tuple[Phase, ...]
    pinned_producers: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "engagement_type": self.engagement_type,
            "compose_skill": self.compose_skill,
            "required_phases": [p.value for p in self.required_phases],
            "pinned_producers": dict(self.pinned_producers),
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanTemplate":
        try:
            return cls(
                id=data["id"],
                engagement_type=data.get("engagement_type", data["id"]),
                compose_skill=data["compose_skill"],
                required_phases=tuple(Phase(p) for p in data.get("required_phases", [])),
                pinned_producers=dict(data.get("pinned_producers", {})),
                params=dict(data.get("params", {})),
            )
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"malformed template: {exc}") from exc
