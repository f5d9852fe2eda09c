"""Acceptance gate: one test per release criterion, in order.

Each test prints a single PASS line with its measured values (bypassing
capture so the line lands in piped output); a failed assertion surfaces as
the usual pytest FAILED line for that criterion.
"""

from __future__ import annotations

import random
import time

import pytest
from fastapi.testclient import TestClient

import researchpod.graph as kg
from researchpod.api import CITATION_PATTERN, create_app
from researchpod.distill import DistillationPipeline, PersonaDocument, load_corpus
from researchpod.engine import ASSETS_ROOT, Engine
from researchpod.library.demo import seed_demo_graph
from researchpod.library.maintain import facts_from_memo
from researchpod.library.memos import MemoDocument
from researchpod.providers import StubProvider
from researchpod.runners import PERSONA_SCOPED_CATEGORIES, artifact_persona
from researchpod.specs import Phase, validate_spec

from conftest import run_to_done
from oracle_dag import compare_with_oracle, random_contract

FIG3_SKILLS = {
    "assemble_memo",
    "coverage_brief",
    "extract_kpis",
    "fetch_filings",
    "fetch_market",
    "fetch_news",
    "gate_check",
    "kg_update",
    "parse_segments",
    "persona_analysis",
}


@pytest.fixture()
def report(capsys):
    def _report(line: str) -> None:
        with capsys.disabled():
            print(flush=True)
            print(line, flush=True)

    return _report


@pytest.fixture()
def engine(tmp_path):
    return Engine(tmp_path / "ws")


def test_ac01_planner_matches_bruteforce_oracle(report):
    """Randomized registries: planner and oracle agree on nodes and edges."""
    rng = random.Random(20260823)
    trials = 1000
    derived = refused = 0
    started = time.perf_counter()
    for _ in range(trials):
        registry, skills, template, _ = random_contract(rng)
        assert len(skills) <= 12
        graph = compare_with_oracle(registry, skills, template)
        if graph is None:
            refused += 1
        else:
            derived += 1
    elapsed = time.perf_counter() - started
    assert derived + refused == trials
    assert derived > 0 and refused > 0  # both branches exercised
    assert elapsed < 60.0
    report(
        f"AC01 PASS: {trials} randomized registries matched the brute-force "
        f"oracle exactly ({derived} derived, {refused} refused on both sides) "
        f"in {elapsed:.1f}s (< 60s)"
    )


def test_ac02_pitch_memo_plan_reproduction(engine, report):
    template = engine.templates.get("pitch-memo")
    skills = {s.id: s for s in engine.registry.list_skills()}
    graph = compare_with_oracle(engine.registry, skills, template)
    assert graph is not None
    assert len(graph.tasks) == 10
    assert {t.skill for t in graph.tasks.values()} == FIG3_SKILLS
    leaves = graph.leaves()
    assert leaves
    assert all(graph.tasks[t].phase is Phase.SETUP for t in leaves)
    for edge in graph.edges:
        producer = graph.tasks[edge.producer]
        consumer = graph.tasks[edge.consumer]
        assert producer.phase.order <= consumer.phase.order, edge
    report(
        f"AC02 PASS: pitch-memo derives the 10-task plan, dependency-free "
        f"leaves {leaves} all setup-phase, all {len(graph.edges)} edges "
        f"phase-monotone, node and edge sets oracle-verified"
    )


def test_ac03_idempotent_resume(engine, report):
    record = engine.create_engagement("pitch-memo", "NVDA", seed=7)
    paused = engine.run_engagement(record.engagement_id, stop_after_phase="ingest")
    assert paused.status == "paused"
    done_before = {
        task_id
        for task_id, task in paused.graph.tasks.items()
        if task.status.value == "done"
    }
    remaining = set(paused.graph.tasks) - done_before
    assert done_before and remaining

    resumed = engine.resume_engagement(record.engagement_id)
    assert resumed.status == "done"
    ctx = engine.last_context(record.engagement_id)
    re_executed = set(ctx.runner_invocations) & done_before
    assert re_executed == set()
    assert set(ctx.runner_invocations) == remaining
    assert all(count == 1 for count in ctx.runner_invocations.values())
    report(
        f"AC03 PASS: killed after ingest with {len(done_before)} tasks done; "
        f"resume re-executed 0 of them and ran exactly the {len(remaining)} "
        f"remaining tasks once each"
    )


def test_ac04_gate_short_circuit(engine, report):
    record = engine.create_engagement("pitch-memo", "NVDA", seed=7)
    result = engine.run_engagement(
        record.engagement_id, disabled_skills=["extract_kpis"]
    )
    ctx = engine.last_context(record.engagement_id)
    graph = result.graph

    assessments = [
        a
        for a in engine.store.query(category="brief_assessment")
        if a.engagement_id == record.engagement_id
    ]
    assert len(assessments) == 1
    assert assessments[0].data()["passed"] is False

    compose_tasks = {
        task_id for task_id, task in graph.tasks.items() if task.phase is Phase.COMPOSE
    }
    assert compose_tasks
    assert set(ctx.runner_invocations) & compose_tasks == set()

    events = list(engine.bus(record.engagement_id).replay())
    gate_done = [e for e in events if e.event == "task_done" and e.task_id == "gate_check"]
    assert len(gate_done) == 1
    after_gate = [e for e in events if e.sequence_no > gate_done[0].sequence_no]
    assert all(e.event in ("task_skipped", "engagement_done") for e in after_gate)
    assert events[-1].event == "engagement_done"
    assert "insufficient sources" in events[-1].detail

    done_by_gate = {
        e.task_id
        for e in events
        if e.event == "task_done" and e.sequence_no <= gate_done[0].sequence_no
    }
    assert set(ctx.calls_by_task) <= done_by_gate  # zero provider calls after gate
    report(
        "AC04 PASS: with the kpis producer disabled the gate published "
        "passed=false, compose-phase runner invocations = 0, and all "
        f"{ctx.provider_calls} provider calls ({dict(ctx.calls_by_task)}) "
        "happened at or before the gate; 0 after"
    )


def test_ac05_seed_determinism(tmp_path, report):
    artifact_sets = []
    exports = []
    for name in ("first", "second"):
        engine = Engine(tmp_path / name)
        run_to_done(engine, "pitch-memo", seed=7)
        artifact_sets.append({a.id for a in engine.store.query()})
        exports.append(kg.rebuild(engine.store).to_canonical_json())
    assert artifact_sets[0] == artifact_sets[1]
    assert exports[0] == exports[1]
    report(
        f"AC05 PASS: two seed-7 runs produced bit-identical artifact id sets "
        f"({len(artifact_sets[0])} artifacts) and byte-identical canonical "
        f"graph exports ({len(exports[0])} bytes)"
    )


def test_ac06_evidence_integrity(engine, tmp_path, report):
    run_to_done(engine, "pitch-memo", seed=7)
    store = engine.store

    pristine = store.verify_integrity()
    assert pristine.ok and pristine.failures == []

    # every lineage parent of every artifact resolves
    for artifact in store.query():
        for parent in artifact.parent_ids:
            assert parent in store

    memos = store.query(category="memo")
    assert len(memos) == 1
    memo = memos[0]
    citations = sorted(set(CITATION_PATTERN.findall(memo.text())))
    assert citations
    assert all(cited in store for cited in citations)

    ancestors = store.lineage(memo.id)
    filings = [a for a in ancestors if a.category == "filings"]
    assert filings and any(
        a.data().get("raw_text", "").startswith("FORM: 10-K") for a in filings
    )

    index = tmp_path / "ws" / "store" / "index.ndjson"
    raw = bytearray(index.read_bytes())
    position = raw.find(b"FORM: 10-K")
    assert position != -1
    raw[position + 9] ^= 0x01  # flips one bit: the filing K becomes J
    index.write_bytes(bytes(raw))
    tampered = store.verify_integrity()
    assert not tampered.ok
    assert any("hash-mismatch" in str(failure) for failure in tampered.failures)
    report(
        f"AC06 PASS: pristine store verified ({pristine.checked} artifacts), "
        f"memo cites {len(citations)} resolvable artifacts, lineage closure "
        f"reaches the raw 10-K, and a single byte-flip was detected "
        f"({len(tampered.failures)} finding)"
    )


def test_ac07_demo_graph_reproduction(engine, report):
    ids = seed_demo_graph(engine.store)
    graph = kg.rebuild(engine.store)
    counts = graph.counts()
    assert counts == {"ticker": 3, "memo": 4, "analyst": 3, "theme": 2, "edges": 13}
    assert graph.edges_of("cites") == [("cites", ids["D"], ids["A"])]
    gaps = kg.gap_report(graph)
    assert gaps == [
        {"ticker": "MSFT", "personas": ["quant"]},
        {"ticker": "NVDA", "personas": ["quant"]},
    ]
    report(
        "AC07 PASS: four-memo fixture rebuilds to 3 ticker / 4 memo / "
        "3 analyst / 2 theme nodes with 13 edges including cites(D->A); gap "
        "report flags exactly the single-persona tickers MSFT and NVDA"
    )


def test_ac08_buffett_pack_onboarding(engine, report):
    pack = engine.registry.get_persona("buffett")
    assert pack.id == "buffett"
    assert pack.title == "Value Investor"
    assert pack.default_template == "buffett-pitch"
    template_ids = sorted(w.template for w in pack.workflows)
    assert template_ids == ["buffett-pitch", "buffett-quick-filter", "buffett-sell-check"]
    for template_id in template_ids:
        assert engine.templates.get(template_id).id == template_id
    report(
        "AC08 PASS: shipped pack loads as id=buffett, title='Value Investor', "
        "default_template=buffett-pitch with registered workflow templates "
        "buffett-pitch / buffett-quick-filter / buffett-sell-check"
    )


def test_ac09_persona_contrast(engine, report):
    run_to_done(engine, "buffett-pitch", persona="buffett", seed=7)
    run_to_done(engine, "pitch-memo", seed=7)
    by_persona = {}
    for artifact in engine.store.query(category="memo"):
        by_persona[artifact_persona(artifact)] = MemoDocument.parse(artifact.text())
    buffett = by_persona["buffett"]
    generic = by_persona["generic"]

    buffett_titles = buffett.section_titles()
    assert "8-Question Filter" in buffett_titles
    assert "Circle of Competence" in buffett_titles
    assert buffett.verdict in {"Buy", "Pass", "Hold", "Sell"}

    generic_titles = generic.section_titles()
    assert "8-Question Filter" not in generic_titles
    assert "Circle of Competence" not in generic_titles
    assert len(generic_titles) < len(buffett_titles)
    report(
        f"AC09 PASS: buffett memo carries the 8-Question Filter and Circle of "
        f"Competence sections with verdict '{buffett.verdict}' (four-value "
        f"scale); generic memo has neither and fewer sections "
        f"({len(generic_titles)} vs {len(buffett_titles)})"
    )


def test_ac10_persona_independence(engine, report):
    records = [
        run_to_done(engine, "pitch-memo", seed=7)[0],
        run_to_done(engine, "buffett-pitch", persona="buffett", seed=7)[0],
    ]
    scoped_seen = 0
    for record in records:
        own_persona = record.persona or "generic"
        ctx = engine.last_context(record.engagement_id)
        consumed = set()
        for ids in ctx.resolved_input_ids.values():
            consumed.update(ids)
        for ids in ctx.tool_reads.values():
            consumed.update(ids)
        assert consumed
        for artifact_id in consumed:
            artifact = engine.store.get(artifact_id)
            if artifact.category not in PERSONA_SCOPED_CATEGORIES:
                continue
            owner = artifact_persona(artifact)
            if owner is not None:
                scoped_seen += 1
                assert owner == own_persona, (
                    f"{record.engagement_id} ({own_persona}) consumed "
                    f"{artifact.category} {artifact_id} owned by {owner}"
                )
    assert scoped_seen > 0  # the check actually saw persona-owned inputs
    report(
        f"AC10 PASS: generic and buffett runs over one ticker consumed "
        f"{scoped_seen} persona-owned artifacts as inputs or tool reads, all "
        f"owned by the consuming persona; zero cross-persona reads"
    )


def test_ac11_distillation_chain(tmp_path, report):
    from researchpod.evidence import EvidenceStore

    corpus = load_corpus(ASSETS_ROOT / "corpora" / "buffett")
    store = EvidenceStore(tmp_path / "store")
    pipeline = DistillationPipeline(store, StubProvider(), persona_id="buffett", seed=7)

    material, a1 = pipeline.run_extract(corpus)
    calls_after_extract = pipeline.provider_calls
    document, a2 = pipeline.run_generate(material, parent=a1.id)
    calls_after_generate = pipeline.provider_calls
    spec, a3 = pipeline.run_specify(document, parent=a2.id)
    manifest, a4 = pipeline.run_bundle(spec, parent=a3.id)
    assert calls_after_extract == 0
    assert calls_after_generate == 1
    assert pipeline.provider_calls == 1
    assert validate_spec(spec) == []

    # edit the generated profile, then recompile the downstream steps
    edited = PersonaDocument.from_dict(
        {**document.to_dict(), "risk_profile": document.risk_profile + " Edited offline."}
    )
    calls_before_recompile = pipeline.provider_calls
    spec2, _ = pipeline.run_specify(edited, parent=a2.id)
    pipeline.run_bundle(spec2, parent=a3.id)
    assert pipeline.provider_calls == calls_before_recompile
    assert validate_spec(spec2) == []
    assert "Edited offline." in spec2.body
    report(
        "AC11 PASS: a0->a4 chain made exactly 1 provider call, at the "
        "generate step (0 after extract, 1 after generate, 1 total); the "
        "distilled spec validates; editing the profile and re-running "
        "specify+bundle cost 0 additional calls"
    )


def test_ac12_graph_rebuild_latency(tmp_path, report):
    from researchpod.evidence import EvidenceStore

    store = EvidenceStore(tmp_path / "store")
    verdicts = ["Buy", "Hold", None, "Sell"]
    for i in range(300):
        doc = MemoDocument(
            ticker=f"T{i % 40:02d}",
            persona=f"persona_{i % 7}",
            workflow="pitch-memo",
            created_at=f"2026-03-{(i % 28) + 1:02d}T{i % 24:02d}:00:00+00:00",
            themes=[f"Theme {i % 11}"],
            verdict=verdicts[i % 4],
            sections=[("Thesis", f"Synthetic engagement {i} keeps the id unique.")],
        )
        memo = store.append(
            "memo",
            doc.render(),
            engagement_id=f"synthetic-{i:03d}",
            producer_skill="assemble_memo",
            producer_task=f"memo-{i:03d}",
            created_at=doc.created_at,
        )
        facts = facts_from_memo(memo, store)
        store.append(
            "graph_facts",
            facts,
            engagement_id=f"synthetic-{i:03d}",
            producer_skill="kg_update",
            producer_task=f"facts-{i:03d}",
            parent_ids=[memo.id],
            created_at=doc.created_at,
        )

    started = time.perf_counter()
    graph = kg.rebuild(store)
    elapsed = time.perf_counter() - started
    counts = graph.counts()
    assert counts["memo"] == 300
    assert counts["ticker"] == 40
    assert counts["analyst"] == 7
    assert counts["theme"] == 11
    assert graph.built_from == f"index:{len(store)}"
    assert elapsed < 2.0
    report(
        f"AC12 PASS: rebuild over 300 synthetic engagements ({len(store)} "
        f"artifacts) took {elapsed * 1000:.0f} ms (soft budget 2000 ms)"
    )


def test_ac13_console_parity_server_side(engine, report):
    """Server half of the console parity criterion; the client half lives in
    the frontend test suite and asserts the same three behaviors there."""
    seed_demo_graph(engine.store)
    client = TestClient(create_app(engine))

    # graph counts served to the console equal a direct rebuild
    direct = kg.rebuild(engine.store)
    body = client.get("/graph").json()
    assert body["counts"] == direct.counts()
    assert len(body["nodes"]) == sum(
        v for k, v in direct.counts().items() if k != "edges"
    )
    assert len(body["edges"]) == direct.counts()["edges"]

    # a gap row carries the uncovered ticker the launcher pre-fills
    gaps = client.get("/graph/gaps").json()["gaps"]
    launchable = [row for row in gaps if row["ticker"] == "NVDA"]
    assert launchable
    created = client.post(
        "/engagements",
        json={"workflow_id": "pitch-memo", "ticker": launchable[0]["ticker"], "seed": 7},
    )
    assert created.status_code == 202
    engagement_id = created.json()["engagement_id"]
    assert engine.get_engagement(engagement_id).ticker == launchable[0]["ticker"]

    deadline = time.time() + 30
    while time.time() < deadline:
        if client.get(f"/engagements/{engagement_id}").json()["status"] in (
            "done",
            "aborted",
        ):
            break
        time.sleep(0.05)
    assert client.get(f"/engagements/{engagement_id}").json()["status"] == "done"

    # SSE stream ids equal persisted sequence numbers, including on reconnect
    def frames(headers=None):
        raw = client.get(f"/engagements/{engagement_id}/events", headers=headers or {})
        out = []
        for block in raw.text.strip().split("\n\n"):
            fields = dict(
                line.partition(": ")[::2] for line in block.splitlines()
            )
            out.append((int(fields["id"]), fields["event"]))
        return out

    full = frames()
    persisted = [
        (e.sequence_no, e.event) for e in engine.bus(engagement_id).replay()
    ]
    assert full == persisted
    assert [i for i, _ in full] == sorted({i for i, _ in full})
    cut = full[len(full) // 2][0]
    resumed = frames({"Last-Event-ID": str(cut)})
    assert resumed == [entry for entry in persisted if entry[0] > cut]
    report(
        f"AC13 PASS (server half): /graph counts equal a direct rebuild "
        f"{direct.counts()}, the gap row ticker launches an engagement with "
        f"that ticker pre-filled, and the {len(full)}-event SSE stream "
        f"matches persisted sequence numbers on full read and on reconnect "
        f"after id {cut}"
    )
