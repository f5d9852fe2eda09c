"""Exception hierarchy shared across the engine.

Every error that crosses a module boundary derives from ResearchPodError so
the CLI and API can map failures onto stable exit codes and HTTP statuses.
"""

from __future__ import annotations


class ResearchPodError(Exception):
    """Base class for all engine errors."""

    code = "error"


class ValidationError(ResearchPodError):
    """A document, spec, or request failed structural validation."""

    code = "validation"


class DuplicateIdError(ValidationError):
    code = "duplicate-id"


class UnknownIdError(ResearchPodError):
    """Lookup of a skill, persona, template, engagement, or artifact failed."""

    code = "unknown-id"


class MissingProducerError(ResearchPodError):
    """A needed category has no registered producer and no seed coverage."""

    code = "missing-producer"

    def __init__(self, categories, consumer=None):
        self.categories = sorted(set(categories))
        self.consumer = consumer
        detail = ", ".join(self.categories)
        suffix = f" (needed by {consumer})" if consumer else ""
        super().__init__(f"no producer for: {detail}{suffix}")


class CycleError(ResearchPodError):
    """Dependency derivation found a cycle; carries the offending skill ids."""

    code = "cycle-detected"

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle))


class UnresolvableNeedError(ValidationError):
    """Persona onboarding declared a need nothing can produce."""

    code = "unresolvable-need"


class StoreIntegrityError(ResearchPodError):
    """Evidence store content failed hash or lineage verification."""

    code = "integrity"


class DanglingParentError(ValidationError):
    """An artifact referenced a parent id not present in the store."""

    code = "dangling-parent"


class RunnerError(ResearchPodError):
    """A skill body failed while executing."""

    code = "runner-error"


class VerifierRejectedError(RunnerError):
    """Provider output failed verification after all regeneration attempts."""

    code = "verifier-rejected"

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class LimitExceededError(RunnerError):
    """A task ran past its provider-call or wall-clock budget."""

    code = "limit-exceeded"


class CitationError(RunnerError):
    """A memo cited an artifact id that does not resolve."""

    code = "unresolved-citation"


class ProviderError(ResearchPodError):
    """The model provider returned a transport-level failure."""

    code = "provider-error"


class LifecycleError(ResearchPodError):
    """An operation was attempted against a task in the wrong state."""

    code = "lifecycle"
