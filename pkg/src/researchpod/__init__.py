"""Multi-persona equity research orchestration.

Declarative skills compile into typed task DAGs; persona-conditioned agent
skills produce independent views; every intermediate lands in a
content-addressed evidence store; a property graph over the store answers
coverage, theme, and comparison queries.
"""

from .categories import CANONICAL_CATEGORIES, OPTIONAL_CATEGORIES, CategoryVocabulary
from .dispatcher import Dispatcher, DispatchResult, EventBus, TaskEvent
from .engine import Engine, EngagementRecord
from .errors import (
    DuplicateIdError,
    ResearchPodError,
    UnknownIdError,
    ValidationError,
)
from .evidence import Artifact, EvidenceStore, compute_artifact_id
from .planner import Planner, PlanTemplate, Task, TaskGraph, TaskStatus, TemplateRegistry
from .registry import SkillRegistry
from .specs import (
    DEFAULT_LIMITS,
    PHASES_IN_ORDER,
    PersonaPack,
    Phase,
    RunnerKind,
    SkillSpec,
    WorkflowEntry,
    validate_pack,
    validate_spec,
)

__version__ = "0.1.0"

__all__ = [
    "Artifact",
    "CANONICAL_CATEGORIES",
    "CategoryVocabulary",
    "DEFAULT_LIMITS",
    "Dispatcher",
    "DispatchResult",
    "DuplicateIdError",
    "EngagementRecord",
    "Engine",
    "EventBus",
    "EvidenceStore",
    "OPTIONAL_CATEGORIES",
    "PHASES_IN_ORDER",
    "PersonaPack",
    "Phase",
    "PlanTemplate",
    "Planner",
    "ResearchPodError",
    "RunnerKind",
    "SkillRegistry",
    "SkillSpec",
    "Task",
    "TaskEvent",
    "TaskGraph",
    "TaskStatus",
    "TemplateRegistry",
    "UnknownIdError",
    "ValidationError",
    "WorkflowEntry",
    "compute_artifact_id",
    "validate_pack",
    "validate_spec",
    "__version__",
]
