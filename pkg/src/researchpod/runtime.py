"""Shared execution state passed into skill runners.

RunContext carries everything a running task may touch: the evidence store,
the provider, the engagement clock, counters, and test hooks. Skill bodies
return ArtifactDraft values; the dispatcher appends them to the store with
engagement and task attribution.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LimitExceededError, RunnerError
from .providers import ProviderCall, rough_tokens
from .util import utc_now_iso


@dataclass
class ArtifactDraft:
    """A produced payload awaiting store append."""

    category: str
    payload: object
    parents: tuple[str, ...] = ()
    payload_kind: str | None = None


class CallLog:
    """Append-only NDJSON transcript of provider calls for one engagement."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, call: ProviderCall) -> None:
        line = json.dumps(call.to_dict(), ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with self.path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


class _ForbiddenProvider:
    """Stands in for the provider inside deterministic skill bodies."""

    def complete(self, *args, **kwargs):
        raise RunnerError("deterministic skill attempted a provider call")


@dataclass
class RunContext:
    """Per-engagement execution state shared by all tasks."""

    engagement_id: str
    store: object
    provider: object
    registry: object = None
    seed: int = 0
    as_of: str = field(default_factory=utc_now_iso)
    params: dict = field(default_factory=dict)
    persona_id: str | None = None
    call_log: CallLog | None = None
    uncited_policy: str = "warn"
    fixtures_root: Path | None = None
    live_sources: bool = False
    disabled_skills: frozenset = frozenset()
    stop_after_phase: object = None

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self.provider_calls = 0
        self.calls_by_task: dict[str, int] = {}
        self.runner_invocations: dict[str, int] = {}
        self.tool_reads: dict[str, list[str]] = {}
        self.resolved_input_ids: dict[str, list[str]] = {}

    # -- accounting ----------------------------------------------------

    def note_runner_invocation(self, task_id: str) -> None:
        with self._lock:
            self.runner_invocations[task_id] = self.runner_invocations.get(task_id, 0) + 1

    def total_runner_invocations(self) -> int:
        return sum(self.runner_invocations.values())

    def note_tool_read(self, task_id: str, artifact_id: str) -> None:
        with self._lock:
            self.tool_reads.setdefault(task_id, []).append(artifact_id)

    def note_resolved_inputs(self, task_id: str, artifact_ids: list[str]) -> None:
        with self._lock:
            self.resolved_input_ids[task_id] = list(artifact_ids)

    # -- provider access ----------------------------------------------

    def call_provider(
        self,
        task_id: str,
        skill_id: str,
        system: str,
        prompt: str,
        schema: dict | None,
        max_calls: int,
    ) -> str:
        """One provider round trip with budget enforcement and transcripting."""
        with self._lock:
            used = self.calls_by_task.get(task_id, 0)
            if used >= max_calls:
                raise LimitExceededError(
                    f"task {task_id} exceeded provider-call budget ({max_calls})"
                )
            self.calls_by_task[task_id] = used + 1
            self.provider_calls += 1
        call = ProviderCall(
            task_id=task_id,
            skill=skill_id,
            system=system,
            prompt=prompt,
            schema_title=(schema or {}).get("title"),
            seed=self.seed,
            prompt_tokens=rough_tokens(system + prompt),
        )
        response = self.provider.complete(system=system, prompt=prompt, schema=schema, seed=self.seed)
        call.response = response
        call.response_tokens = rough_tokens(response)
        if self.call_log is not None:
            self.call_log.record(call)
        return response

    def deterministic_view(self) -> "RunContext":
        """A context whose provider refuses calls; given to deterministic bodies."""
        clone = RunContext(
            engagement_id=self.engagement_id,
            store=self.store,
            provider=_ForbiddenProvider(),
            registry=self.registry,
            seed=self.seed,
            as_of=self.as_of,
            params=self.params,
            persona_id=self.persona_id,
            call_log=None,
            uncited_policy=self.uncited_policy,
            fixtures_root=self.fixtures_root,
            live_sources=self.live_sources,
        )
        return clone
