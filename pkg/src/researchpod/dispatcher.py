"""Engagement execution: wave scheduling, lifecycle enforcement, and events.

The dispatcher walks a TaskGraph phase by phase. Within a phase, tasks whose
dependencies are all terminal run concurrently on a small worker pool. An
errored task skips every dependent that required one of its categories; a
source-quality gate that reports passed=false short-circuits all later
phases and closes the engagement with a brief assessment instead of a memo.
Events are numbered per engagement and persisted to an append-only log that
subscribers replay before tailing.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

from .categories import OPTIONAL_CATEGORIES
from .errors import LifecycleError, ResearchPodError
from .planner import ALLOWED_TRANSITIONS, Task, TaskGraph, TaskStatus, TERMINAL_STATUSES
from .runners import run_task
from .runtime import RunContext
from .specs import PHASES_IN_ORDER, Phase
from .util import utc_now_iso

log = logging.getLogger(__name__)

TASK_EVENTS = ("task_started", "task_done", "task_error", "task_skipped")
TERMINAL_EVENTS = frozenset({"engagement_done", "engagement_aborted"})
EVENT_TYPES = TASK_EVENTS + tuple(sorted(TERMINAL_EVENTS))

BRIEF_ASSESSMENT_CATEGORY = "brief_assessment"


@dataclass
class TaskEvent:
    """One progress event; the persisted and wire shape are the same dict."""

    engagement_id: str
    event: str
    sequence_no: int
    timestamp: str
    task_id: str | None = None
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "engagement_id": self.engagement_id,
            "event": self.event,
            "sequence_no": self.sequence_no,
            "timestamp": self.timestamp,
            "task_id": self.task_id,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskEvent":
        return cls(
            engagement_id=data["engagement_id"],
            event=data["event"],
            sequence_no=data["sequence_no"],
            timestamp=data["timestamp"],
            task_id=data.get("task_id"),
            detail=data.get("detail"),
        )


class EventBus:
    """Per-engagement event fanout backed by an NDJSON log.

    Sequence numbers continue across process restarts: the next number is
    derived from the persisted log, so a resumed engagement keeps a single
    strictly increasing sequence. Subscribers replay the log, then tail live
    events until a terminal event arrives.
    """

    def __init__(self, engagement_id: str, log_path: Path | str) -> None:
        self.engagement_id = engagement_id
        self.log_path = Path(log_path)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._queues: list[queue.SimpleQueue] = []
        stored = self._read_log()
        self._next_seq = stored[-1].sequence_no + 1 if stored else 1

    def _read_log(self) -> list[TaskEvent]:
        if not self.log_path.exists():
            return []
        events = []
        with self.log_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    events.append(TaskEvent.from_dict(json.loads(line)))
        return events

    def emit(self, event: str, task_id: str | None = None, detail: str | None = None) -> TaskEvent:
        with self._lock:
            record = TaskEvent(
                engagement_id=self.engagement_id,
                event=event,
                sequence_no=self._next_seq,
                timestamp=utc_now_iso(),
                task_id=task_id,
                detail=detail,
            )
            self._next_seq += 1
            with self.log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
            for q in self._queues:
                q.put(record)
        return record

    def replay(self) -> list[TaskEvent]:
        with self._lock:
            return self._read_log()

    def subscribe(self, after: int = 0, follow: bool = True, timeout: float | None = None):
        """Yield events with sequence_no > after: full replay, then live tail.

        The tail ends at the first terminal event (or on timeout). A finished
        engagement therefore replays to completion and stops.
        """
        with self._lock:
            stored = self._read_log()
            finished = bool(stored) and stored[-1].event in TERMINAL_EVENTS
            live_q: queue.SimpleQueue | None = None
            if follow and not finished:
                live_q = queue.SimpleQueue()
                self._queues.append(live_q)
        try:
            for event in stored:
                if event.sequence_no > after:
                    yield event
            if live_q is None:
                return
            while True:
                try:
                    event = live_q.get(timeout=timeout)
                except queue.Empty:
                    return
                if event.sequence_no > after:
                    yield event
                if event.event in TERMINAL_EVENTS:
                    return
        finally:
            if live_q is not None:
                with self._lock:
                    if live_q in self._queues:
                        self._queues.remove(live_q)


@dataclass
class DispatchResult:
    status: str  # done | aborted | paused
    graph: TaskGraph
    detail: str | None = None


def transition(task: Task, new_status: TaskStatus) -> None:
    if (task.status, new_status) not in ALLOWED_TRANSITIONS:
        raise LifecycleError(
            f"task {task.id}: illegal transition {task.status.value} -> {new_status.value}"
        )
    task.status = new_status


class Dispatcher:
    """Executes one engagement's TaskGraph against a RunContext."""

    def __init__(self, registry, bus: EventBus, *, max_workers: int = 4, persist=None) -> None:
        self.registry = registry
        self.bus = bus
        self.max_workers = max(1, max_workers)
        self._persist = persist or (lambda graph: None)

    # ------------------------------------------------------------------
    # Public operations

    def execute(self, graph: TaskGraph, ctx: RunContext) -> DispatchResult:
        stop_after = _normalize_phase(ctx.stop_after_phase)
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            for phase in PHASES_IN_ORDER:
                self._run_phase(graph, ctx, phase, pool)
                if stop_after is not None and phase is stop_after:
                    # Test hook: simulate the process dying at a phase
                    # boundary. No terminal event; resume picks it up.
                    self._persist(graph)
                    return DispatchResult("paused", graph, f"stopped after {phase.value}")
                gated = self._apply_gate_shortcircuit(graph, ctx)
                if gated is not None:
                    return gated
        return self._finish(graph)

    def step(self, graph: TaskGraph, task_id: str, ctx: RunContext) -> Task:
        """Run exactly one pending task synchronously.

        Done tasks are rejected; recovery for terminal states goes through
        resume, which is the only path that re-opens them.
        """
        task = graph.tasks[task_id]
        if task.status is not TaskStatus.PENDING:
            raise LifecycleError(
                f"task {task_id} is {task.status.value}; only pending tasks can be stepped"
            )
        spec = self.registry.get_skill(task.skill)
        self._begin(graph, task)
        try:
            output_ids = self._execute_task(graph, task, spec, ctx)
        except ResearchPodError as exc:
            self._record_error(graph, task, exc)
        except Exception as exc:  # skill bodies are third-party code
            self._record_error(graph, task, exc)
        else:
            self._record_done(graph, task, output_ids)
        return task

    def reopen(self, graph: TaskGraph) -> list[str]:
        """Resume preparation: error and skipped tasks become pending again.

        Done tasks are left alone so their artifacts are reused.
        """
        reopened = []
        for task_id in sorted(graph.tasks):
            task = graph.tasks[task_id]
            if task.status in (TaskStatus.ERROR, TaskStatus.SKIPPED):
                transition(task, TaskStatus.PENDING)
                task.error = None
                reopened.append(task_id)
        if reopened:
            self._persist(graph)
        return reopened

    # ------------------------------------------------------------------
    # Phase waves

    def _run_phase(self, graph: TaskGraph, ctx: RunContext, phase: Phase, pool) -> None:
        running: dict = {}
        while True:
            self._apply_skip_rules(graph, ctx, phase)
            for task in self._ready_tasks(graph, phase):
                spec = self.registry.get_skill(task.skill)
                self._begin(graph, task)
                future = pool.submit(self._execute_task, graph, task, spec, ctx)
                running[future] = task
            if not running:
                break
            finished, _ = wait(running, return_when=FIRST_COMPLETED)
            for future in finished:
                task = running.pop(future)
                try:
                    output_ids = future.result()
                except ResearchPodError as exc:
                    self._record_error(graph, task, exc)
                except Exception as exc:
                    self._record_error(graph, task, exc)
                else:
                    self._record_done(graph, task, output_ids)

    def _ready_tasks(self, graph: TaskGraph, phase: Phase) -> list[Task]:
        ready = []
        for task_id in sorted(graph.tasks):
            task = graph.tasks[task_id]
            if task.status is not TaskStatus.PENDING or task.phase is not phase:
                continue
            producers = {e.producer for e in graph.dependencies(task_id)}
            if all(graph.tasks[p].status in TERMINAL_STATUSES for p in producers):
                ready.append(task)
        return ready

    def _apply_skip_rules(self, graph: TaskGraph, ctx: RunContext, phase: Phase) -> None:
        for task_id in sorted(graph.tasks):
            task = graph.tasks[task_id]
            if task.status is not TaskStatus.PENDING or task.phase is not phase:
                continue
            reason = self._skip_reason(graph, ctx, task)
            if reason is not None:
                self._record_skip(graph, task, reason)

    def _skip_reason(self, graph: TaskGraph, ctx: RunContext, task: Task) -> str | None:
        if task.skill in ctx.disabled_skills:
            return f"skill {task.skill} disabled for this engagement"
        producers_by_category: dict[str, list[Task]] = {}
        for edge in graph.dependencies(task.id):
            producers_by_category.setdefault(edge.category, []).append(graph.tasks[edge.producer])
        for category in sorted(producers_by_category):
            if category in OPTIONAL_CATEGORIES:
                continue
            producers = producers_by_category[category]
            statuses = [p.status for p in producers]
            if any(s is TaskStatus.DONE for s in statuses):
                continue
            if any(s is TaskStatus.ERROR for s in statuses):
                failed = next(p.id for p in producers if p.status is TaskStatus.ERROR)
                return f"required input {category} failed upstream ({failed})"
            if all(s in TERMINAL_STATUSES for s in statuses):
                # All producers were skipped. The quality gate still runs so
                # it can grade the gap; everything else sits out.
                if not self._is_gate(task):
                    return f"required input {category} unavailable (producers skipped)"
        return None

    def _is_gate(self, task: Task) -> bool:
        spec = self.registry.get_skill(task.skill)
        return "gate_report" in spec.produces

    # ------------------------------------------------------------------
    # Gate short-circuit

    def _apply_gate_shortcircuit(self, graph: TaskGraph, ctx: RunContext) -> DispatchResult | None:
        found = self._failed_gate(graph, ctx)
        if found is None:
            return None
        gate_task, report = found
        pending = [
            graph.tasks[t]
            for t in sorted(graph.tasks)
            if graph.tasks[t].status is TaskStatus.PENDING
        ]
        for task in pending:
            self._record_skip(graph, task, f"gate {gate_task.id} reported insufficient sources")
        assessment = self._write_brief_assessment(ctx, gate_task, report)
        detail = f"insufficient sources; assessment {assessment.id}"
        self.bus.emit("engagement_done", detail=detail)
        self._persist(graph)
        return DispatchResult("done", graph, detail)

    def _failed_gate(self, graph: TaskGraph, ctx: RunContext):
        for task_id in sorted(graph.tasks):
            task = graph.tasks[task_id]
            if task.status is not TaskStatus.DONE or not self._is_gate(task):
                continue
            for artifact_id in task.outputs:
                artifact = ctx.store.get(artifact_id)
                if artifact.category != "gate_report":
                    continue
                report = artifact.data()
                if report.get("passed") is False:
                    return task, artifact
        return None

    def _write_brief_assessment(self, ctx: RunContext, gate_task: Task, report_artifact):
        report = report_artifact.data()
        missing = report.get("missing", [])
        names = ", ".join(entry[0] for entry in missing) or "unknown"
        payload = {
            "ticker": report.get("ticker", ""),
            "persona": ctx.persona_id,
            "as_of": ctx.as_of,
            "passed": False,
            "missing": missing,
            "summary": report.get("summary", ""),
            "assessment": (
                f"Coverage stopped before composition: required sources ({names}) "
                "were missing or failed validation. Address the gaps and resume."
            ),
        }
        return ctx.store.append(
            BRIEF_ASSESSMENT_CATEGORY,
            payload,
            engagement_id=ctx.engagement_id,
            producer_skill="dispatcher",
            producer_task=gate_task.id,
            parent_ids=(report_artifact.id,),
        )

    # ------------------------------------------------------------------
    # Task bookkeeping (main thread)

    def _begin(self, graph: TaskGraph, task: Task) -> None:
        transition(task, TaskStatus.IN_PROGRESS)
        task.attempt_count += 1
        task.error = None
        self.bus.emit("task_started", task.id, detail=f"skill {task.skill}")
        self._persist(graph)

    def _record_done(self, graph: TaskGraph, task: Task, output_ids: list[str]) -> None:
        task.outputs = list(output_ids)
        transition(task, TaskStatus.DONE)
        self.bus.emit("task_done", task.id, detail=f"{len(output_ids)} artifact(s)")
        self._persist(graph)

    def _record_error(self, graph: TaskGraph, task: Task, exc: Exception) -> None:
        code = getattr(exc, "code", "internal")
        task.error = f"{code}: {exc}"
        transition(task, TaskStatus.ERROR)
        log.warning("task %s failed: %s", task.id, task.error)
        self.bus.emit("task_error", task.id, detail=task.error)
        self._persist(graph)

    def _record_skip(self, graph: TaskGraph, task: Task, reason: str) -> None:
        transition(task, TaskStatus.SKIPPED)
        task.error = None
        self.bus.emit("task_skipped", task.id, detail=reason)
        self._persist(graph)

    def _finish(self, graph: TaskGraph) -> DispatchResult:
        errored = sorted(
            t for t, task in graph.tasks.items() if task.status is TaskStatus.ERROR
        )
        counts = {}
        for task in graph.tasks.values():
            counts[task.status.value] = counts.get(task.status.value, 0) + 1
        summary = ", ".join(f"{counts[k]} {k}" for k in sorted(counts))
        if errored:
            detail = "errors in: " + ", ".join(errored)
            self.bus.emit("engagement_aborted", detail=detail)
            self._persist(graph)
            return DispatchResult("aborted", graph, detail)
        self.bus.emit("engagement_done", detail=summary)
        self._persist(graph)
        return DispatchResult("done", graph, summary)

    # ------------------------------------------------------------------
    # Worker-side execution (thread safe: store appends and counters lock)

    def _execute_task(self, graph: TaskGraph, task: Task, spec, ctx: RunContext) -> list[str]:
        inputs = self._resolve_inputs(graph, task, ctx)
        drafts = run_task(spec, task.id, inputs, ctx)
        output_ids = []
        for draft in drafts:
            artifact = ctx.store.append(
                draft.category,
                draft.payload,
                engagement_id=ctx.engagement_id,
                producer_skill=spec.id,
                producer_task=task.id,
                parent_ids=draft.parents,
                payload_kind=draft.payload_kind,
            )
            output_ids.append(artifact.id)
        return output_ids

    def _resolve_inputs(self, graph: TaskGraph, task: Task, ctx: RunContext) -> dict:
        inputs: dict[str, list] = {}
        seen: set[str] = set()
        for edge in graph.dependencies(task.id):
            producer = graph.tasks[edge.producer]
            if producer.status is not TaskStatus.DONE:
                continue
            for artifact_id in producer.outputs:
                if artifact_id in seen:
                    continue
                artifact = ctx.store.get(artifact_id)
                if artifact.category == edge.category:
                    seen.add(artifact_id)
                    inputs.setdefault(edge.category, []).append(artifact)
        for artifacts in inputs.values():
            artifacts.sort(key=lambda a: a.id)
        return inputs


def _normalize_phase(value) -> Phase | None:
    if value is None:
        return None
    if isinstance(value, Phase):
        return value
    return Phase(value)
