"""Maintain-phase graph write: distill memos into fact records.

kg_update reads each memo artifact, extracts the front matter and citation
set, and appends one graph_facts artifact per memo. The knowledge graph is
rebuilt from these facts alone, so they carry everything a graph query
needs: ticker, authoring persona, themes as written, cited memo ids,
verdict, and the memo's timestamp. Theme identity (case folding etc.) is
the graph builder's concern, not ours.
"""

from __future__ import annotations

from ..errors import RunnerError, UnknownIdError
from ..runtime import ArtifactDraft
from .memos import MemoDocument


def facts_from_memo(memo_artifact, store) -> dict:
    doc = MemoDocument.parse(memo_artifact.text())
    if not doc.ticker or not doc.persona:
        raise RunnerError(
            f"malformed memo {memo_artifact.id[:12]}: missing ticker or persona front matter"
        )
    cites = []
    for cited_id in doc.citations():
        if cited_id == memo_artifact.id:
            raise RunnerError(f"malformed memo {memo_artifact.id[:12]}: cites itself")
        try:
            cited = store.get(cited_id)
        except UnknownIdError:
            continue
        if cited.category == "memo":
            cites.append(cited_id)
    return {
        "memo": memo_artifact.id,
        "ticker": doc.ticker,
        "persona": doc.persona,
        "themes": sorted({t.strip() for t in doc.themes if t.strip()}),
        "cites": cites,
        "verdict": doc.verdict,
        "timestamp": doc.created_at,
    }


def kg_update(inputs: dict, params: dict, ctx) -> list[ArtifactDraft]:
    memos = inputs.get("memo", [])
    if not memos:
        raise RunnerError("kg_update ran with no memo input")
    drafts = []
    for memo_artifact in sorted(memos, key=lambda a: a.id):
        facts = facts_from_memo(memo_artifact, ctx.store)
        parents = tuple([memo_artifact.id] + facts["cites"])
        drafts.append(ArtifactDraft(category="graph_facts", payload=facts, parents=parents))
    return drafts
