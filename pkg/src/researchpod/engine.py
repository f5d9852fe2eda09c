"""Facade tying the registry, planner, dispatcher, and store to a workspace.

One Engine owns one workspace directory:

    workspace/
      store/                  content-addressed evidence store
      engagements/<id>/       record.json, graph.json, events.log, calls.ndjson
      idempotency.json        idempotency-key ledger for create requests

The engine loads the shipped skill/workflow/persona assets at startup, plans
engagements from templates, and runs or resumes them through the dispatcher.
The API service and the CLI both sit on this facade so identical requests
behave identically regardless of entry point.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .categories import CategoryVocabulary
from .dispatcher import Dispatcher, DispatchResult, EventBus
from .errors import DuplicateIdError, UnknownIdError, ValidationError
from .evidence import EvidenceStore
from .planner import Planner, TaskGraph, TemplateRegistry
from .providers import HttpProvider, StubProvider
from .registry import SkillRegistry
from .runtime import CallLog, RunContext
from .util import canonical_json, new_id, sha256_hex, utc_now_iso

log = logging.getLogger(__name__)

ASSETS_ROOT = Path(__file__).parent / "assets"


def provider_from_env():
    """Select the model provider from RESEARCHPOD_PROVIDER (default stub)."""
    kind = os.environ.get("RESEARCHPOD_PROVIDER", "stub").strip().lower()
    if kind in ("", "stub"):
        return StubProvider()
    if kind == "http":
        endpoint = os.environ.get("RESEARCHPOD_PROVIDER_ENDPOINT", "")
        if not endpoint:
            raise ValidationError(
                "RESEARCHPOD_PROVIDER=http requires RESEARCHPOD_PROVIDER_ENDPOINT"
            )
        return HttpProvider(endpoint)
    raise ValidationError(f"unknown provider kind {kind!r}")


@dataclass
class EngagementRecord:
    """Durable header for one engagement."""

    engagement_id: str
    template: str
    engagement_type: str
    ticker: str
    persona: str | None
    params: dict = field(default_factory=dict)
    status: str = "created"  # created | running | done | aborted | paused
    seed: int = 0
    as_of: str = ""
    created_at: str = ""
    updated_at: str = ""

    def to_dict(self) -> dict:
        return {
            "engagement_id": self.engagement_id,
            "template": self.template,
            "engagement_type": self.engagement_type,
            "ticker": self.ticker,
            "persona": self.persona,
            "params": dict(self.params),
            "status": self.status,
            "seed": self.seed,
            "as_of": self.as_of,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngagementRecord":
        return cls(
            engagement_id=data["engagement_id"],
            template=data["template"],
            engagement_type=data.get("engagement_type", ""),
            ticker=data.get("ticker", ""),
            persona=data.get("persona"),
            params=dict(data.get("params", {})),
            status=data.get("status", "created"),
            seed=data.get("seed", 0),
            as_of=data.get("as_of", ""),
            created_at=data.get("created_at", ""),
            updated_at=data.get("updated_at", ""),
        )


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)


class Engine:
    def __init__(
        self,
        workspace: Path | str,
        *,
        provider=None,
        fixtures_root: Path | str | None = None,
        live_sources: bool = False,
        max_workers: int = 4,
        uncited_policy: str = "warn",
        load_builtin: bool = True,
    ) -> None:
        self.workspace = Path(workspace)
        self.workspace.mkdir(parents=True, exist_ok=True)
        (self.workspace / "engagements").mkdir(exist_ok=True)
        self.store = EvidenceStore(self.workspace / "store")
        self.vocabulary = CategoryVocabulary()
        self.registry = SkillRegistry(self.vocabulary)
        self.templates = TemplateRegistry()
        self.planner = Planner(self.registry, self.templates)
        self.provider = provider if provider is not None else provider_from_env()
        self.fixtures_root = Path(fixtures_root) if fixtures_root else ASSETS_ROOT / "fixtures"
        self.live_sources = live_sources
        self.max_workers = max_workers
        self.uncited_policy = uncited_policy
        self._buses: dict[str, EventBus] = {}
        self._contexts: dict[str, RunContext] = {}
        self._lock = threading.Lock()
        self._threads: dict[str, threading.Thread] = {}
        if load_builtin:
            self.load_builtin_assets()
        self._load_workspace_personas()

    # ------------------------------------------------------------------
    # Asset loading

    def load_builtin_assets(self) -> None:
        self.registry.load_skill_dir(ASSETS_ROOT / "skills")
        self.templates.load_dir(ASSETS_ROOT / "workflows")
        for pack_dir in sorted((ASSETS_ROOT / "personas").iterdir()):
            if pack_dir.is_dir() and (pack_dir / "pack.json").exists():
                self.onboard_pack_dir(pack_dir, persist=False)

    def _load_workspace_personas(self) -> None:
        """Re-register packs onboarded into this workspace in earlier runs."""
        root = self.workspace / "personas"
        if not root.is_dir():
            return
        for pack_dir in sorted(root.iterdir()):
            if not (pack_dir / "pack.json").exists():
                continue
            if self.registry.has_persona(pack_dir.name):
                log.warning("workspace pack %s shadows a registered persona; skipped", pack_dir.name)
                continue
            self.onboard_pack_dir(pack_dir, persist=False)

    def onboard_pack_dir(self, pack_dir: Path | str, *, persist: bool = True):
        """Register a persona pack from a directory (pack.json + references/).

        Persisted packs land under workspace/personas/<id>/ so a later
        process sees the same persona pool."""
        pack_dir = Path(pack_dir)
        manifest_path = pack_dir / "pack.json"
        if not manifest_path.exists():
            raise ValidationError(f"no pack.json under {pack_dir}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        references = {}
        ref_dir = pack_dir / "references"
        if ref_dir.is_dir():
            references = {
                p.stem: p.read_text(encoding="utf-8") for p in sorted(ref_dir.glob("*.md"))
            }
        return self.onboard_pack_manifest(manifest, references=references, persist=persist)

    def onboard_pack_manifest(
        self, manifest: dict, references: dict[str, str] | None = None, *, persist: bool = True
    ):
        pack = self.registry.onboard_persona_pack(
            manifest, templates=self.templates, references=references or {}
        )
        if persist:
            target = self.workspace / "personas" / pack.id
            target.mkdir(parents=True, exist_ok=True)
            _write_json(target / "pack.json", manifest)
            if references:
                ref_dir = target / "references"
                ref_dir.mkdir(exist_ok=True)
                for name, text in references.items():
                    (ref_dir / f"{name}.md").write_text(text, encoding="utf-8")
        return pack

    # ------------------------------------------------------------------
    # Engagement lifecycle

    def create_engagement(
        self,
        workflow: str,
        ticker: str,
        persona: str | None = None,
        params: dict | None = None,
        *,
        engagement_type: str | None = None,
        engagement_id: str | None = None,
        idempotency_key: str | None = None,
        seed: int = 0,
    ) -> EngagementRecord:
        if not ticker:
            raise ValidationError("ticker must be non-empty")
        if not self.live_sources and not (self.fixtures_root / ticker).is_dir():
            raise ValidationError(
                f"no fixture data for ticker {ticker!r} under {self.fixtures_root}"
            )
        template = self.templates.get(workflow)
        if engagement_type and engagement_type != template.engagement_type:
            raise ValidationError(
                f"engagement_type {engagement_type!r} does not match workflow "
                f"{workflow!r} ({template.engagement_type})"
            )
        fingerprint = sha256_hex(
            canonical_json(
                {"workflow": workflow, "ticker": ticker, "persona": persona, "params": params or {}}
            ).encode("utf-8")
        )
        if idempotency_key:
            existing = self._idempotency_lookup(idempotency_key, fingerprint)
            if existing is not None:
                return self.get_engagement(existing)

        persona_id = persona or template.params.get("persona")
        if persona_id is not None:
            self.registry.get_persona(persona_id)  # raises UnknownIdError
        merged = dict(template.params)
        if persona is not None and persona != template.params.get("persona"):
            # An explicit persona replaces the template's analyst, and the
            # memo then follows that persona's section plan instead of the
            # template's.
            merged.pop("required_sections", None)
            merged.pop("sections", None)
        merged.update(params or {})
        merged["ticker"] = ticker

        engagement_id = engagement_id or new_id("eng")
        if (self.workspace / "engagements" / engagement_id).exists():
            raise DuplicateIdError(f"engagement already exists: {engagement_id}")
        graph = self.planner.plan(
            workflow, engagement_id, params=merged, persona=persona_id
        )
        now = utc_now_iso()
        record = EngagementRecord(
            engagement_id=engagement_id,
            template=workflow,
            engagement_type=template.engagement_type,
            ticker=ticker,
            persona=persona_id,
            params=merged,
            status="created",
            seed=seed,
            as_of=self._derive_as_of(ticker),
            created_at=now,
            updated_at=now,
        )
        self._save_record(record)
        self._save_graph(engagement_id, graph)
        if idempotency_key:
            self._idempotency_store(idempotency_key, fingerprint, engagement_id)
        return record

    def run_engagement(
        self,
        engagement_id: str,
        *,
        stop_after_phase=None,
        disabled_skills=(),
    ) -> DispatchResult:
        record = self.get_engagement(engagement_id)
        graph = self.load_graph(engagement_id)
        ctx = self._build_context(
            record, stop_after_phase=stop_after_phase, disabled_skills=disabled_skills
        )
        return self._drive(record, graph, ctx)

    def resume_engagement(self, engagement_id: str) -> DispatchResult:
        """Re-open error/skipped tasks and continue; done work is reused."""
        record = self.get_engagement(engagement_id)
        graph = self.load_graph(engagement_id)
        ctx = self._build_context(record)
        dispatcher = self._dispatcher(engagement_id)
        dispatcher.reopen(graph)
        return self._drive(record, graph, ctx, dispatcher=dispatcher)

    def start_engagement(
        self, engagement_id: str, *, resume: bool = False
    ) -> threading.Thread | None:
        """Run asynchronously; the API uses this to return 202 immediately.

        A second start while the first is alive is a no-op, and a replayed
        create against an engagement that already ran does not re-run it."""
        with self._lock:
            existing = self._threads.get(engagement_id)
            if existing is not None and existing.is_alive():
                return existing
        if not resume and self.get_engagement(engagement_id).status != "created":
            return None
        thread = threading.Thread(
            target=self._run_guarded, args=(engagement_id, resume), daemon=True
        )
        with self._lock:
            self._threads[engagement_id] = thread
        thread.start()
        return thread

    def _run_guarded(self, engagement_id: str, resume: bool = False) -> None:
        try:
            if resume:
                self.resume_engagement(engagement_id)
            else:
                self.run_engagement(engagement_id)
        except Exception:
            log.exception("engagement %s crashed", engagement_id)

    def replan_engagement(self, engagement_id: str) -> TaskGraph:
        """Operator action: derive a fresh graph (version+1) for the same
        engagement. Tasks whose skill already completed keep their results."""
        record = self.get_engagement(engagement_id)
        old = self.load_graph(engagement_id)
        new = self.planner.plan(
            record.template,
            engagement_id,
            params=record.params,
            persona=record.persona,
            version=old.version + 1,
        )
        from .planner import TaskStatus

        for task_id, task in new.tasks.items():
            prior = old.tasks.get(task_id)
            if prior is not None and prior.status is TaskStatus.DONE and prior.skill == task.skill:
                task.status = prior.status
                task.outputs = list(prior.outputs)
                task.attempt_count = prior.attempt_count
        self._save_graph(engagement_id, new)
        record.status = "created"
        record.updated_at = utc_now_iso()
        self._save_record(record)
        return new

    def _drive(self, record, graph, ctx, dispatcher=None) -> DispatchResult:
        dispatcher = dispatcher or self._dispatcher(record.engagement_id)
        record.status = "running"
        record.updated_at = utc_now_iso()
        self._save_record(record)
        result = dispatcher.execute(graph, ctx)
        record.status = result.status
        record.updated_at = utc_now_iso()
        self._save_record(record)
        return result

    def _dispatcher(self, engagement_id: str) -> Dispatcher:
        return Dispatcher(
            self.registry,
            self.bus(engagement_id),
            max_workers=self.max_workers,
            persist=lambda graph: self._save_graph(engagement_id, graph),
        )

    def _build_context(
        self, record: EngagementRecord, *, stop_after_phase=None, disabled_skills=()
    ) -> RunContext:
        eng_dir = self._engagement_dir(record.engagement_id)
        ctx = RunContext(
            engagement_id=record.engagement_id,
            store=self.store,
            provider=self.provider,
            registry=self.registry,
            seed=record.seed,
            as_of=record.as_of or utc_now_iso(),
            params=dict(record.params),
            persona_id=record.persona,
            call_log=CallLog(eng_dir / "calls.ndjson"),
            uncited_policy=self.uncited_policy,
            fixtures_root=self.fixtures_root,
            live_sources=self.live_sources,
            disabled_skills=frozenset(disabled_skills),
            stop_after_phase=stop_after_phase,
        )
        with self._lock:
            self._contexts[record.engagement_id] = ctx
        return ctx

    def last_context(self, engagement_id: str) -> RunContext | None:
        """Instrumentation hook: the context of the most recent run."""
        with self._lock:
            return self._contexts.get(engagement_id)

    def _derive_as_of(self, ticker: str) -> str:
        market_path = self.fixtures_root / ticker / "market.json"
        if not self.live_sources and market_path.exists():
            try:
                data = json.loads(market_path.read_text(encoding="utf-8"))
                if isinstance(data.get("as_of"), str):
                    return data["as_of"]
            except (OSError, json.JSONDecodeError):
                pass
        return utc_now_iso()

    # ------------------------------------------------------------------
    # Persistence

    def _engagement_dir(self, engagement_id: str) -> Path:
        return self.workspace / "engagements" / engagement_id

    def _save_record(self, record: EngagementRecord) -> None:
        eng_dir = self._engagement_dir(record.engagement_id)
        eng_dir.mkdir(parents=True, exist_ok=True)
        _write_json(eng_dir / "record.json", record.to_dict())

    def _save_graph(self, engagement_id: str, graph: TaskGraph) -> None:
        _write_json(self._engagement_dir(engagement_id) / "graph.json", graph.to_dict())

    def get_engagement(self, engagement_id: str) -> EngagementRecord:
        path = self._engagement_dir(engagement_id) / "record.json"
        if not path.exists():
            raise UnknownIdError(f"no engagement {engagement_id}")
        return EngagementRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def load_graph(self, engagement_id: str) -> TaskGraph:
        path = self._engagement_dir(engagement_id) / "graph.json"
        if not path.exists():
            raise UnknownIdError(f"no graph for engagement {engagement_id}")
        return TaskGraph.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_engagements(self) -> list[EngagementRecord]:
        records = []
        root = self.workspace / "engagements"
        for entry in sorted(root.iterdir()):
            record_path = entry / "record.json"
            if record_path.exists():
                records.append(
                    EngagementRecord.from_dict(json.loads(record_path.read_text(encoding="utf-8")))
                )
        records.sort(key=lambda r: (r.created_at, r.engagement_id), reverse=True)
        return records

    def bus(self, engagement_id: str) -> EventBus:
        with self._lock:
            bus = self._buses.get(engagement_id)
            if bus is None:
                bus = EventBus(
                    engagement_id, self._engagement_dir(engagement_id) / "events.log"
                )
                self._buses[engagement_id] = bus
            return bus

    def subscribe(self, engagement_id: str, after: int = 0, timeout: float | None = None):
        if not (self._engagement_dir(engagement_id) / "record.json").exists():
            raise UnknownIdError(f"no engagement {engagement_id}")
        return self.bus(engagement_id).subscribe(after=after, timeout=timeout)

    # ------------------------------------------------------------------
    # Persona distillation

    def distill_persona(
        self,
        corpus_dir: Path | str,
        out_dir: Path | str | None = None,
        *,
        config: dict | None = None,
        seed: int = 0,
    ):
        """Run the corpus-to-pack pipeline against this engine's store and
        provider; optionally write the resulting pack.json to out_dir."""
        from .distill import DistillationPipeline, export_pack, load_corpus

        corpus = load_corpus(corpus_dir)
        pipeline = DistillationPipeline(
            self.store,
            self.provider,
            persona_id=corpus.persona_id,
            name=corpus.name,
            seed=seed,
        )
        result = pipeline.distill(corpus, config=config, templates=self.templates)
        if out_dir is not None:
            export_pack(result.manifest, out_dir)
        return result

    # ------------------------------------------------------------------
    # Idempotency ledger

    def _idempotency_path(self) -> Path:
        return self.workspace / "idempotency.json"

    def _idempotency_lookup(self, key: str, fingerprint: str) -> str | None:
        path = self._idempotency_path()
        if not path.exists():
            return None
        ledger = json.loads(path.read_text(encoding="utf-8"))
        entry = ledger.get(key)
        if entry is None:
            return None
        if entry["fingerprint"] != fingerprint:
            raise DuplicateIdError(
                f"idempotency key {key!r} was already used for a different request"
            )
        return entry["engagement_id"]

    def _idempotency_store(self, key: str, fingerprint: str, engagement_id: str) -> None:
        path = self._idempotency_path()
        with self._lock:
            ledger = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
            ledger[key] = {"fingerprint": fingerprint, "engagement_id": engagement_id}
            _write_json(path, ledger)

    # ------------------------------------------------------------------
    # Library listings

    def list_data_sources(self) -> list[dict]:
        sources = [
            {
                "id": "edgar",
                "kind": "live",
                "description": "SEC EDGAR filings (throttled HTTP)",
                "enabled": self.live_sources,
            }
        ]
        if self.fixtures_root.is_dir():
            for ticker_dir in sorted(self.fixtures_root.iterdir()):
                if not ticker_dir.is_dir():
                    continue
                filings = len(list((ticker_dir / "filings").glob("*.txt"))) if (
                    ticker_dir / "filings"
                ).is_dir() else 0
                news = len(list((ticker_dir / "news").glob("*.json"))) if (
                    ticker_dir / "news"
                ).is_dir() else 0
                sources.append(
                    {
                        "id": f"fixture:{ticker_dir.name}",
                        "kind": "fixture",
                        "ticker": ticker_dir.name,
                        "filings": filings,
                        "news": news,
                        "has_market": (ticker_dir / "market.json").exists(),
                        "enabled": True,
                    }
                )
        return sources
