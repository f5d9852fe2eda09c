"""Engine facade: engagement creation, validation, idempotency, persistence,
replanning, async starts, and workspace persona onboarding."""

from __future__ import annotations

import json
import shutil
import threading
from pathlib import Path

import pytest

import researchpod
from researchpod.distill import bundle, default_pack_config, specify, PersonaDocument
from researchpod.engine import Engine, EngagementRecord, provider_from_env
from researchpod.errors import DuplicateIdError, UnknownIdError, ValidationError
from researchpod.planner import TaskStatus
from researchpod.providers import HttpProvider, StubProvider

from conftest import run_to_done

FIXTURES = Path(researchpod.__file__).parent / "assets" / "fixtures"
MARKET_AS_OF = "2026-02-26T21:00:00+00:00"


def make_tester_pack():
    document = PersonaDocument(
        traits="t",
        investment_heuristics="h",
        risk_profile="r",
        preferred_evidence="e",
        communication_style="c",
    )
    spec = specify(document, "tester", "Tester")
    return bundle(spec, default_pack_config("tester", "Tester"))


# ---------------------------------------------------------------------------
# Creation


class TestCreateEngagement:
    def test_record_and_graph_persisted(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", seed=7)
        assert record.status == "created"
        assert record.template == "pitch-memo"
        assert record.engagement_type == "pitch"
        assert record.ticker == "NVDA"
        assert record.persona == "generic"  # template default
        assert record.seed == 7
        assert record.as_of == MARKET_AS_OF
        assert record.params["ticker"] == "NVDA"
        assert record.params["required_sections"] == ["Thesis", "Risks"]
        eng_dir = engine.workspace / "engagements" / record.engagement_id
        assert (eng_dir / "record.json").exists()
        assert (eng_dir / "graph.json").exists()
        graph = engine.load_graph(record.engagement_id)
        assert len(graph.tasks) == 10
        assert all(t.status is TaskStatus.PENDING for t in graph.tasks.values())

    def test_no_tmp_files_left_behind(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA")
        eng_dir = engine.workspace / "engagements" / record.engagement_id
        assert list(eng_dir.glob("*.tmp")) == []

    def test_empty_ticker_rejected(self, engine):
        with pytest.raises(ValidationError, match="non-empty"):
            engine.create_engagement("pitch-memo", "")

    def test_unknown_ticker_rejected(self, engine):
        with pytest.raises(ValidationError, match="no fixture data"):
            engine.create_engagement("pitch-memo", "ZZZT")

    def test_unknown_workflow_rejected(self, engine):
        with pytest.raises(UnknownIdError):
            engine.create_engagement("no-such-workflow", "NVDA")

    def test_unknown_persona_rejected(self, engine):
        with pytest.raises(UnknownIdError):
            engine.create_engagement("pitch-memo", "NVDA", persona="nobody")

    def test_engagement_type_must_match_workflow(self, engine):
        with pytest.raises(ValidationError, match="does not match workflow"):
            engine.create_engagement("pitch-memo", "NVDA", engagement_type="earnings")
        record = engine.create_engagement("pitch-memo", "NVDA", engagement_type="pitch")
        assert record.engagement_type == "pitch"

    def test_explicit_engagement_id(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", engagement_id="eng-custom")
        assert record.engagement_id == "eng-custom"
        with pytest.raises(DuplicateIdError, match="already exists"):
            engine.create_engagement("pitch-memo", "NVDA", engagement_id="eng-custom")

    def test_request_params_override_template_defaults(self, engine):
        record = engine.create_engagement(
            "pitch-memo", "NVDA", params={"objective": "custom objective"}
        )
        assert record.params["objective"] == "custom objective"
        assert record.params["workflow_name"] == "Pitch Memo"

    def test_persona_override_replaces_section_plan(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", persona="buffett")
        assert record.persona == "buffett"
        assert "required_sections" not in record.params
        graph = engine.load_graph(record.engagement_id)
        assert "buffett" in graph.tasks
        assert "persona_analysis" not in graph.tasks

    def test_persona_override_keeps_explicit_sections(self, engine):
        record = engine.create_engagement(
            "pitch-memo", "NVDA", persona="buffett", params={"required_sections": ["Conclusion"]}
        )
        assert record.params["required_sections"] == ["Conclusion"]

    def test_template_default_persona_keeps_section_plan(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", persona="generic")
        assert record.params["required_sections"] == ["Thesis", "Risks"]

    def test_record_roundtrip(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", seed=3)
        clone = EngagementRecord.from_dict(record.to_dict())
        assert clone == record


# ---------------------------------------------------------------------------
# Idempotency


class TestIdempotency:
    def test_same_key_same_request_replays(self, engine):
        first = engine.create_engagement("pitch-memo", "NVDA", idempotency_key="k1")
        second = engine.create_engagement("pitch-memo", "NVDA", idempotency_key="k1")
        assert second.engagement_id == first.engagement_id
        dirs = list((engine.workspace / "engagements").iterdir())
        assert len(dirs) == 1

    def test_same_key_different_request_conflicts(self, engine):
        engine.create_engagement("pitch-memo", "NVDA", idempotency_key="k1")
        with pytest.raises(DuplicateIdError, match="already used"):
            engine.create_engagement(
                "pitch-memo", "NVDA", params={"objective": "other"}, idempotency_key="k1"
            )

    def test_no_key_creates_distinct_engagements(self, engine):
        a = engine.create_engagement("pitch-memo", "NVDA")
        b = engine.create_engagement("pitch-memo", "NVDA")
        assert a.engagement_id != b.engagement_id

    def test_ledger_survives_process_restart(self, engine):
        first = engine.create_engagement("pitch-memo", "NVDA", idempotency_key="k1")
        reopened = Engine(engine.workspace)
        second = reopened.create_engagement("pitch-memo", "NVDA", idempotency_key="k1")
        assert second.engagement_id == first.engagement_id

    def test_replayed_create_does_not_rerun(self, engine):
        record, result = run_to_done(engine, "pitch-memo", idempotency_key="k9")
        replay = engine.create_engagement("pitch-memo", "NVDA", idempotency_key="k9", seed=7)
        assert replay.engagement_id == record.engagement_id
        assert replay.status == "done"


# ---------------------------------------------------------------------------
# as_of derivation


class TestAsOf:
    def test_derived_from_market_fixture(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA")
        assert record.as_of == MARKET_AS_OF

    def test_falls_back_to_wall_clock(self, tmp_path):
        fixtures = tmp_path / "fixtures" / "TEST"
        fixtures.mkdir(parents=True)
        (fixtures / "market.json").write_text(json.dumps({"price": 1.0, "market_cap": 2.0}))
        engine = Engine(tmp_path / "ws", fixtures_root=tmp_path / "fixtures")
        record = engine.create_engagement("pitch-memo", "TEST")
        assert record.as_of != MARKET_AS_OF
        assert record.as_of.startswith("20")


# ---------------------------------------------------------------------------
# Run lifecycle and persistence


class TestRunLifecycle:
    def test_run_persists_done_status(self, engine):
        record, result = run_to_done(engine, "pitch-memo")
        assert result.status == "done"
        on_disk = engine.get_engagement(record.engagement_id)
        assert on_disk.status == "done"
        assert on_disk.updated_at >= on_disk.created_at

    def test_graph_on_disk_matches_run_result(self, engine):
        record, result = run_to_done(engine, "pitch-memo")
        loaded = engine.load_graph(record.engagement_id)
        assert loaded.to_dict() == result.graph.to_dict()
        assert all(t.status is TaskStatus.DONE for t in loaded.tasks.values())

    def test_unknown_engagement_lookups(self, engine):
        with pytest.raises(UnknownIdError, match="no engagement"):
            engine.get_engagement("eng-missing")
        with pytest.raises(UnknownIdError, match="no graph"):
            engine.load_graph("eng-missing")
        with pytest.raises(UnknownIdError):
            engine.subscribe("eng-missing")

    def test_list_engagements_newest_first(self, engine):
        first = engine.create_engagement("pitch-memo", "NVDA")
        second = engine.create_engagement("pitch-memo", "NVDA")
        listed = engine.list_engagements()
        assert {r.engagement_id for r in listed} == {
            first.engagement_id,
            second.engagement_id,
        }
        keys = [(r.created_at, r.engagement_id) for r in listed]
        assert keys == sorted(keys, reverse=True)

    def test_last_context_exposes_instrumentation(self, engine):
        record, _ = run_to_done(engine, "pitch-memo")
        ctx = engine.last_context(record.engagement_id)
        assert ctx is not None
        assert ctx.provider_calls == sum(ctx.calls_by_task.values()) > 0
        assert ctx.runner_invocations
        assert engine.last_context("eng-missing") is None

    def test_bus_instance_is_cached(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA")
        assert engine.bus(record.engagement_id) is engine.bus(record.engagement_id)

    def test_event_log_and_calls_persisted(self, engine):
        record, _ = run_to_done(engine, "pitch-memo")
        eng_dir = engine.workspace / "engagements" / record.engagement_id
        assert (eng_dir / "events.log").exists()
        assert (eng_dir / "calls.ndjson").exists()
        lines = (eng_dir / "calls.ndjson").read_text().strip().splitlines()
        assert all(json.loads(line)["task_id"] for line in lines)


class TestDeterminism:
    def test_same_seed_same_artifacts_and_events(self, tmp_path):
        outcomes = []
        for name in ("one", "two"):
            engine = Engine(tmp_path / name)
            record, result = run_to_done(engine, "pitch-memo", seed=7)
            key_ids = {
                task_id: tuple(result.graph.tasks[task_id].outputs)
                for task_id in ("extract_kpis", "assemble_memo", "kg_update")
            }
            events = [e.event for e in engine.bus(record.engagement_id).replay()]
            outcomes.append((key_ids, events))
        assert outcomes[0] == outcomes[1]


# ---------------------------------------------------------------------------
# Replanning


class TestReplan:
    def test_replan_bumps_version_and_keeps_done_work(self, engine):
        record, result = run_to_done(engine, "pitch-memo")
        old_outputs = {t.id: list(t.outputs) for t in result.graph.tasks.values()}
        new = engine.replan_engagement(record.engagement_id)
        assert new.version == result.graph.version + 1
        for task in new.tasks.values():
            assert task.status is TaskStatus.DONE
            assert task.outputs == old_outputs[task.id]
        assert engine.get_engagement(record.engagement_id).status == "created"

    def test_rerun_after_replan_executes_nothing(self, engine):
        record, _ = run_to_done(engine, "pitch-memo")
        engine.replan_engagement(record.engagement_id)
        result = engine.run_engagement(record.engagement_id)
        assert result.status == "done"
        ctx = engine.last_context(record.engagement_id)
        assert ctx.runner_invocations == {}

    def test_replan_before_run_keeps_everything_pending(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA")
        new = engine.replan_engagement(record.engagement_id)
        assert new.version == 2
        assert all(t.status is TaskStatus.PENDING for t in new.tasks.values())


# ---------------------------------------------------------------------------
# Async starts


class TestStartEngagement:
    def test_start_runs_in_background(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", seed=7)
        thread = engine.start_engagement(record.engagement_id)
        assert isinstance(thread, threading.Thread)
        thread.join(timeout=30)
        assert not thread.is_alive()
        assert engine.get_engagement(record.engagement_id).status == "done"

    def test_second_start_reuses_live_thread(self, engine):
        record = engine.create_engagement("pitch-memo", "NVDA", seed=7)
        first = engine.start_engagement(record.engagement_id)
        second = engine.start_engagement(record.engagement_id)
        assert second is first or second is None
        first.join(timeout=30)

    def test_start_after_done_is_a_no_op(self, engine):
        record, _ = run_to_done(engine, "pitch-memo")
        assert engine.start_engagement(record.engagement_id) is None


# ---------------------------------------------------------------------------
# Provider selection


class TestProviderSelection:
    def test_default_is_stub(self, monkeypatch):
        monkeypatch.delenv("RESEARCHPOD_PROVIDER", raising=False)
        assert isinstance(provider_from_env(), StubProvider)

    def test_http_requires_endpoint(self, monkeypatch):
        monkeypatch.setenv("RESEARCHPOD_PROVIDER", "http")
        monkeypatch.delenv("RESEARCHPOD_PROVIDER_ENDPOINT", raising=False)
        with pytest.raises(ValidationError, match="RESEARCHPOD_PROVIDER_ENDPOINT"):
            provider_from_env()

    def test_http_with_endpoint(self, monkeypatch):
        monkeypatch.setenv("RESEARCHPOD_PROVIDER", "http")
        monkeypatch.setenv("RESEARCHPOD_PROVIDER_ENDPOINT", "http://localhost:9")
        assert isinstance(provider_from_env(), HttpProvider)

    def test_unknown_kind_rejected(self, monkeypatch):
        monkeypatch.setenv("RESEARCHPOD_PROVIDER", "oracle9000")
        with pytest.raises(ValidationError, match="unknown provider kind"):
            provider_from_env()


# ---------------------------------------------------------------------------
# Persona onboarding persistence


class TestOnboarding:
    def test_persisted_pack_survives_restart(self, tmp_path):
        engine = Engine(tmp_path / "ws")
        assert not engine.registry.has_persona("tester")
        engine.onboard_pack_manifest(make_tester_pack(), persist=True)
        assert engine.registry.has_persona("tester")
        assert (tmp_path / "ws" / "personas" / "tester" / "pack.json").exists()
        reopened = Engine(tmp_path / "ws")
        assert reopened.registry.has_persona("tester")
        assert reopened.registry.get_persona("tester").default_template == "tester-pitch"

    def test_references_are_persisted(self, tmp_path):
        engine = Engine(tmp_path / "ws")
        engine.onboard_pack_manifest(
            make_tester_pack(), references={"notes": "# Notes\n"}, persist=True
        )
        ref = tmp_path / "ws" / "personas" / "tester" / "references" / "notes.md"
        assert ref.read_text() == "# Notes\n"

    def test_workspace_pack_cannot_shadow_builtin(self, tmp_path, caplog):
        workspace = tmp_path / "ws"
        target = workspace / "personas" / "buffett"
        target.mkdir(parents=True)
        shutil.copy(
            Path(researchpod.__file__).parent / "assets" / "personas" / "buffett" / "pack.json",
            target / "pack.json",
        )
        import logging

        with caplog.at_level(logging.WARNING, logger="researchpod.engine"):
            engine = Engine(workspace)
        assert engine.registry.has_persona("buffett")
        assert any("shadows" in rec.message for rec in caplog.records)

    def test_onboard_pack_dir_requires_manifest(self, engine, tmp_path):
        with pytest.raises(ValidationError, match="no pack.json"):
            engine.onboard_pack_dir(tmp_path)


# ---------------------------------------------------------------------------
# Data-source listing


class TestDataSources:
    def test_lists_edgar_and_fixtures(self, engine):
        sources = {s["id"]: s for s in engine.list_data_sources()}
        assert sources["edgar"]["kind"] == "live"
        assert sources["edgar"]["enabled"] is False
        nvda = sources["fixture:NVDA"]
        assert nvda["filings"] == 1
        assert nvda["news"] == 2
        assert nvda["has_market"] is True
