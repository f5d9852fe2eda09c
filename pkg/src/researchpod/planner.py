"""Task graph derivation and validation.

A plan template names the compose skill that anchors an engagement. The
planner walks that skill's declared needs backwards through the registry,
selecting one producer per category (template pin first, then lexicographic
id), until every chain bottoms out at a setup-phase leaf. The result is a
typed DAG: edges carry the artifact category that flows along them, and
never point to an earlier phase.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .categories import OPTIONAL_CATEGORIES
from .errors import CycleError, MissingProducerError, UnknownIdError, ValidationError
from .registry import SkillRegistry
from .specs import PersonaPack, Phase, PlanTemplate
from .util import canonical_json, utc_now_iso

log = logging.getLogger(__name__)


class TaskStatus(str, Enum):
    PENDING = "pending"
    IN_PROGRESS = "in_progress"
    DONE = "done"
    ERROR = "error"
    SKIPPED = "skipped"


TERMINAL_STATUSES = frozenset({TaskStatus.DONE, TaskStatus.ERROR, TaskStatus.SKIPPED})

# Legal lifecycle transitions. Resume is the only path that re-opens a
# terminal state, and done is never re-opened.
ALLOWED_TRANSITIONS = frozenset(
    {
        (TaskStatus.PENDING, TaskStatus.IN_PROGRESS),
        (TaskStatus.IN_PROGRESS, TaskStatus.DONE),
        (TaskStatus.IN_PROGRESS, TaskStatus.ERROR),
        (TaskStatus.PENDING, TaskStatus.SKIPPED),
        (TaskStatus.SKIPPED, TaskStatus.PENDING),
        (TaskStatus.ERROR, TaskStatus.PENDING),
    }
)


@dataclass
class Task:
    id: str
    skill: str
    phase: Phase
    status: TaskStatus = TaskStatus.PENDING
    attempt_count: int = 0
    outputs: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "skill": self.skill,
            "phase": self.phase.value,
            "status": self.status.value,
            "attempt_count": self.attempt_count,
            "outputs": list(self.outputs),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Task":
        return cls(
            id=data["id"],
            skill=data["skill"],
            phase=Phase(data["phase"]),
            status=TaskStatus(data["status"]),
            attempt_count=data.get("attempt_count", 0),
            outputs=list(data.get("outputs", [])),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class TaskEdge:
    producer: str
    consumer: str
    category: str

    def to_tuple(self) -> tuple[str, str, str]:
        return (self.producer, self.consumer, self.category)


@dataclass
class TaskGraph:
    engagement_id: str
    version: int
    tasks: dict[str, Task]
    edges: list[TaskEdge]
    params: dict = field(default_factory=dict)
    created_at: str = field(default_factory=utc_now_iso)

    def dependencies(self, task_id: str) -> list[TaskEdge]:
        return [e for e in self.edges if e.consumer == task_id]

    def dependents(self, task_id: str) -> list[TaskEdge]:
        return [e for e in self.edges if e.producer == task_id]

    def transitive_dependents(self, task_id: str) -> set[str]:
        out: set[str] = set()
        frontier = [task_id]
        while frontier:
            current = frontier.pop()
            for edge in self.dependents(current):
                if edge.consumer not in out:
                    out.add(edge.consumer)
                    frontier.append(edge.consumer)
        return out

    def leaves(self) -> list[str]:
        consumers = {e.consumer for e in self.edges}
        return sorted(t for t in self.tasks if t not in consumers)

    def topo_order(self) -> list[str]:
        """Dependency-respecting order; phase order then id breaks ties."""
        indegree = {t: 0 for t in self.tasks}
        for edge in self.edges:
            indegree[edge.consumer] += 1
        ready = sorted(
            (t for t, d in indegree.items() if d == 0),
            key=lambda t: (self.tasks[t].phase.order, t),
        )
        out: list[str] = []
        while ready:
            current = ready.pop(0)
            out.append(current)
            for edge in self.dependents(current):
                indegree[edge.consumer] -= 1
                if indegree[edge.consumer] == 0:
                    ready.append(edge.consumer)
            ready.sort(key=lambda t: (self.tasks[t].phase.order, t))
        if len(out) != len(self.tasks):
            raise CycleError(sorted(set(self.tasks) - set(out)))
        return out

    def to_canonical_dict(self) -> dict:
        """Stable structural form: sorted tasks and edges, no wall-clock."""
        return {
            "engagement_id": self.engagement_id,
            "version": self.version,
            "tasks": [self.tasks[k].to_dict() for k in sorted(self.tasks)],
            "edges": sorted(e.to_tuple() for e in self.edges),
            "params": dict(sorted(self.params.items())),
        }

    def canonical_json(self) -> str:
        return canonical_json(self.to_canonical_dict())

    def to_dict(self) -> dict:
        data = self.to_canonical_dict()
        data["created_at"] = self.created_at
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TaskGraph":
        return cls(
            engagement_id=data["engagement_id"],
            version=data["version"],
            tasks={t["id"]: Task.from_dict(t) for t in data["tasks"]},
            edges=[TaskEdge(*e) for e in data["edges"]],
            params=dict(data.get("params", {})),
            created_at=data.get("created_at", utc_now_iso()),
        )


class TemplateRegistry:
    def __init__(self) -> None:
        self._templates: dict[str, PlanTemplate] = {}

    def register(self, template: PlanTemplate) -> PlanTemplate:
        if template.id in self._templates:
            raise ValidationError(f"template already registered: {template.id}")
        self._templates[template.id] = template
        return template

    def has(self, template_id: str) -> bool:
        return template_id in self._templates

    def get(self, template_id: str) -> PlanTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownIdError(f"unknown template {template_id}") from None

    def list_templates(self) -> list[PlanTemplate]:
        return [self._templates[k] for k in sorted(self._templates)]

    def load_dir(self, path: Path | str) -> list[PlanTemplate]:
        loaded = []
        for manifest_path in sorted(Path(path).glob("*.json")):
            data = json.loads(manifest_path.read_text(encoding="utf-8"))
            loaded.append(self.register(PlanTemplate.from_dict(data)))
        return loaded


def derive_dag(
    template: PlanTemplate,
    registry: SkillRegistry,
    engagement_id: str,
    pins: dict | None = None,
    seed_categories: frozenset[str] = frozenset(),
    params: dict | None = None,
    version: int = 1,
) -> TaskGraph:
    """Backward-derive the task graph anchored at the template's compose skill.

    For every need of every reached skill the producer is chosen as: the
    pinned skill when one qualifies, else the lexicographically first
    producer whose phase does not exceed the consumer's. Needs with no
    producer are tolerated only when seeded by engagement parameters or
    marked optional; anything else raises missing-producer. When the
    template requires the maintain phase, the graph-write skill is appended
    and wired the same way.
    """
    pins = {**template.pinned_producers, **(pins or {})}
    compose = registry.get_skill(template.compose_skill)

    nodes: dict[str, object] = {}
    edges: set[tuple[str, str, str]] = set()
    missing: dict[str, list[str]] = {}

    def process(skill) -> None:
        stack = [skill]
        if skill.id not in nodes:
            nodes[skill.id] = skill
        while stack:
            consumer = stack.pop()
            for category in sorted(consumer.needs):
                producers = registry.producers_of(
                    category, pinned=pins.get(category), max_phase=consumer.phase
                )
                if not producers:
                    if category in seed_categories:
                        continue
                    if category in OPTIONAL_CATEGORIES:
                        log.debug(
                            "optional category %s has no producer; %s will see empty input",
                            category,
                            consumer.id,
                        )
                        continue
                    missing.setdefault(category, []).append(consumer.id)
                    continue
                chosen = producers[0]
                if len(producers) > 1 and chosen != pins.get(category):
                    # A pin is a deliberate choice; only an unguided tie-break
                    # deserves a warning.
                    log.warning(
                        "multiple producers for %s (%s); selected %s",
                        category,
                        ", ".join(producers),
                        chosen,
                    )
                edges.add((chosen, consumer.id, category))
                if chosen not in nodes:
                    spec = registry.get_skill(chosen)
                    nodes[chosen] = spec
                    stack.append(spec)

    process(compose)

    if Phase.MAINTAIN in template.required_phases and not any(
        spec.phase is Phase.MAINTAIN for spec in nodes.values()
    ):
        writers = registry.producers_of(
            "graph_facts", pinned=pins.get("graph_facts"), max_phase=Phase.MAINTAIN
        )
        if not writers:
            missing.setdefault("graph_facts", []).append("<maintain>")
        else:
            process(registry.get_skill(writers[0]))

    if missing:
        raise MissingProducerError(missing.keys(), consumer=_summarize_consumers(missing))

    graph = TaskGraph(
        engagement_id=engagement_id,
        version=version,
        tasks={
            skill_id: Task(id=skill_id, skill=skill_id, phase=spec.phase)
            for skill_id, spec in nodes.items()
        },
        edges=[TaskEdge(*e) for e in sorted(edges)],
        params=dict(params or {}),
    )
    graph.topo_order()  # raises CycleError on a cyclic registry
    return graph


def _summarize_consumers(missing: dict) -> str:
    return "; ".join(f"{cat}<-{'/'.join(consumers)}" for cat, consumers in sorted(missing.items()))


def validate_dag(
    graph: TaskGraph,
    registry: SkillRegistry,
    seed_categories: frozenset[str] = frozenset(),
) -> list[str]:
    """Check the five structural invariants; returns violations (empty = valid).

    Typed edges, phase monotonicity, acyclicity, closure (every required
    need covered by an edge or a seed parameter), and rootedness (every
    leaf is a setup-phase task).
    """
    violations = []
    specs = {}
    for task in graph.tasks.values():
        try:
            specs[task.id] = registry.get_skill(task.skill)
        except UnknownIdError:
            violations.append(f"task {task.id}: unknown skill {task.skill}")
    for edge in graph.edges:
        if edge.producer not in graph.tasks or edge.consumer not in graph.tasks:
            violations.append(f"edge {edge.to_tuple()}: endpoint missing from graph")
            continue
        producer = specs.get(edge.producer)
        consumer = specs.get(edge.consumer)
        if producer is None or consumer is None:
            continue
        if edge.category not in producer.produces:
            violations.append(f"edge {edge.to_tuple()}: {edge.producer} does not produce {edge.category}")
        if edge.category not in consumer.needs:
            violations.append(f"edge {edge.to_tuple()}: {edge.consumer} does not need {edge.category}")
        if producer.phase.order > consumer.phase.order:
            violations.append(
                f"edge {edge.to_tuple()}: phase regression {producer.phase.value}->{consumer.phase.value}"
            )
    try:
        graph.topo_order()
    except CycleError as exc:
        violations.append(f"cycle among tasks: {exc.cycle}")
    for task in graph.tasks.values():
        spec = specs.get(task.id)
        if spec is None:
            continue
        covered = {e.category for e in graph.dependencies(task.id)}
        for need in sorted(spec.needs):
            if need in covered or need in seed_categories or need in OPTIONAL_CATEGORIES:
                continue
            violations.append(f"task {task.id}: need {need} not covered")
    incoming = {e.consumer for e in graph.edges}
    for task_id in sorted(graph.tasks):
        if task_id not in incoming and graph.tasks[task_id].phase is not Phase.SETUP:
            violations.append(f"leaf task {task_id} is not setup-phase")
    return violations


class Planner:
    """Binds templates, registry, and persona pins into engagement plans."""

    def __init__(self, registry: SkillRegistry, templates: TemplateRegistry) -> None:
        self.registry = registry
        self.templates = templates

    def plan(
        self,
        template_id: str,
        engagement_id: str,
        params: dict | None = None,
        persona: PersonaPack | str | None = None,
        version: int = 1,
    ) -> TaskGraph:
        template = self.templates.get(template_id)
        if isinstance(persona, str):
            persona = self.registry.get_persona(persona)
        pins = {}
        if persona is not None:
            # The engagement's persona supplies the view, overriding the
            # template's default pin.
            pins["persona_view"] = persona.primary_skill()
        graph = derive_dag(
            template,
            self.registry,
            engagement_id,
            pins=pins,
            params=params,
            version=version,
        )
        problems = validate_dag(graph, self.registry)
        if problems:
            raise ValidationError(
                f"derived graph failed validation: {'; '.join(problems)}"
            )
        return graph
