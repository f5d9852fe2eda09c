"""Seed a small multi-analyst memo corpus for graph demos and tests.

Three tickers, four memos, three personas, two themes. Memo D (macro, AAPL,
rate sensitivity) cites memo A (value, same ticker), so the corpus exercises
every edge kind: wrote, covers, explores, and cites. NVDA and MSFT are each
covered by a single persona and should surface in the gap report; AAPL has
two distinct authors and should not.
"""

from __future__ import annotations

from .maintain import facts_from_memo
from .memos import MemoDocument

DEMO_ENGAGEMENT = "demo-graph-fixture"

_MEMOS = (
    {
        "key": "A",
        "ticker": "AAPL",
        "persona": "value",
        "themes": ["AI Infra Spending"],
        "verdict": "Buy",
        "created_at": "2026-03-01T12:00:00+00:00",
        "thesis": "Services attach keeps gross profit compounding through the device cycle.",
    },
    {
        "key": "B",
        "ticker": "MSFT",
        "persona": "quant",
        "themes": ["AI Infra Spending"],
        "verdict": None,
        "created_at": "2026-03-02T12:00:00+00:00",
        "thesis": "Capex intensity screens two sigma above the ten-year trend.",
    },
    {
        "key": "C",
        "ticker": "NVDA",
        "persona": "quant",
        "themes": ["AI Infra Spending"],
        "verdict": "Hold",
        "created_at": "2026-03-03T12:00:00+00:00",
        "thesis": "Momentum and revision factors remain positive but crowding is extreme.",
    },
    {
        "key": "D",
        "ticker": "AAPL",
        "persona": "macro",
        "themes": ["Rate Sensitivity"],
        "verdict": "Hold",
        "created_at": "2026-03-04T12:00:00+00:00",
        "thesis": "Duration-like cash flows make the multiple a rates trade.",
        "cites": "A",
    },
)


def seed_demo_graph(store) -> dict[str, str]:
    """Append the four demo memos plus their graph facts; returns key -> memo id."""
    memo_ids: dict[str, str] = {}
    for entry in _MEMOS:
        body = entry["thesis"]
        cited_key = entry.get("cites")
        if cited_key:
            body += (
                f" This builds on the earlier coverage [[artifact:{memo_ids[cited_key]}]] "
                "from the value desk."
            )
        doc = MemoDocument(
            ticker=entry["ticker"],
            persona=entry["persona"],
            workflow="pitch-memo",
            created_at=entry["created_at"],
            themes=list(entry["themes"]),
            verdict=entry["verdict"],
            sections=[("Thesis", body)],
        )
        memo = store.append(
            "memo",
            doc.render(),
            engagement_id=DEMO_ENGAGEMENT,
            producer_skill="assemble_memo",
            producer_task=f"demo-memo-{entry['key']}",
            created_at=entry["created_at"],
        )
        memo_ids[entry["key"]] = memo.id
        facts = facts_from_memo(memo, store)
        store.append(
            "graph_facts",
            facts,
            engagement_id=DEMO_ENGAGEMENT,
            producer_skill="kg_update",
            producer_task=f"demo-facts-{entry['key']}",
            parent_ids=[memo.id] + facts["cites"],
            created_at=entry["created_at"],
        )
    return memo_ids
