"""Memo documents and the shared memo assembler skill.

A memo is Markdown: a YAML front-matter block (ticker, persona, workflow,
themes, verdict, created_at) followed by `## `-headed sections. Inline
citations use [[artifact:<id>]] markers; the assembler resolves every marker
against the evidence store and appends a Sources section, erroring on any
citation that does not resolve.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import yaml

from ..errors import CitationError, UnknownIdError, ValidationError
from ..runners import CITATION_RE, VerifierReport, register_hybrid
from ..runtime import ArtifactDraft

MEMO_SCHEMA = {
    "title": "memo_document",
    "type": "object",
    "required": ["ticker", "persona", "workflow", "sections"],
    "properties": {
        "ticker": {"type": "string"},
        "persona": {"type": "string"},
        "workflow": {"type": "string"},
        "sections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["title", "body"],
                "properties": {"title": {"type": "string"}, "body": {"type": "string"}},
            },
        },
        "themes": {"type": "array", "items": {"type": "string"}},
        "verdict": {"enum": ["Buy", "Pass", "Hold", "Sell", None]},
    },
}

_SECTION_RE = re.compile(r"^## (.+)$", re.MULTILINE)


@dataclass
class MemoDocument:
    ticker: str
    persona: str
    workflow: str
    created_at: str
    themes: list[str] = field(default_factory=list)
    verdict: str | None = None
    sections: list[tuple[str, str]] = field(default_factory=list)

    def section_titles(self) -> list[str]:
        return [title for title, _ in self.sections]

    def citations(self) -> list[str]:
        seen: list[str] = []
        for _, body in self.sections:
            for artifact_id in CITATION_RE.findall(body):
                if artifact_id not in seen:
                    seen.append(artifact_id)
        return seen

    def render(self) -> str:
        front = {
            "ticker": self.ticker,
            "persona": self.persona,
            "workflow": self.workflow,
            "themes": list(self.themes),
            "verdict": self.verdict,
            "created_at": self.created_at,
        }
        head = yaml.safe_dump(front, sort_keys=True, default_flow_style=False).strip()
        parts = [f"---\n{head}\n---", ""]
        for title, body in self.sections:
            parts.append(f"## {title}\n\n{body.rstrip()}\n")
        return "\n".join(parts)

    @classmethod
    def parse(cls, text: str) -> "MemoDocument":
        match = re.match(r"\A---\n(.*?)\n---\n?(.*)\Z", text, re.DOTALL)
        if not match:
            raise ValidationError("memo missing front-matter block")
        try:
            front = yaml.safe_load(match.group(1)) or {}
        except yaml.YAMLError as exc:
            raise ValidationError(f"memo front matter unreadable: {exc}") from exc
        body = match.group(2)
        sections: list[tuple[str, str]] = []
        headers = list(_SECTION_RE.finditer(body))
        for idx, header in enumerate(headers):
            end = headers[idx + 1].start() if idx + 1 < len(headers) else len(body)
            sections.append((header.group(1).strip(), body[header.end():end].strip()))
        return cls(
            ticker=str(front.get("ticker", "")),
            persona=str(front.get("persona", "")),
            workflow=str(front.get("workflow", "")),
            created_at=str(front.get("created_at", "")),
            themes=[str(t) for t in front.get("themes") or []],
            verdict=front.get("verdict"),
            sections=sections,
        )


# ---------------------------------------------------------------------------
# assemble_memo hybrid implementation

def _verify_memo(parsed: dict, inputs: dict, ctx) -> VerifierReport:
    problems = []
    if not parsed.get("sections"):
        problems.append("memo has no sections")
    titles = {s["title"] for s in parsed.get("sections", [])}
    for required in ctx.params.get("required_sections", []):
        if required not in titles:
            problems.append(f"required section missing: {required}")
    verdict = parsed.get("verdict")
    if verdict is not None and verdict not in ("Buy", "Pass", "Hold", "Sell"):
        problems.append(f"bad verdict: {verdict}")
    return VerifierReport(ok=not problems, problems=problems)


def _build_memo(parsed: dict, inputs: dict, ctx, spec) -> list[ArtifactDraft]:
    doc = MemoDocument(
        ticker=parsed["ticker"],
        persona=parsed["persona"],
        workflow=parsed["workflow"],
        created_at=ctx.as_of,
        themes=[str(t) for t in parsed.get("themes") or []],
        verdict=parsed.get("verdict"),
        sections=[(s["title"], s["body"]) for s in parsed["sections"]],
    )
    cited = doc.citations()
    source_lines = []
    for artifact_id in cited:
        try:
            artifact = ctx.store.get(artifact_id)
        except UnknownIdError:
            raise CitationError(
                f"memo cites {artifact_id} which is not in the evidence store"
            ) from None
        source_lines.append(
            f"- [[artifact:{artifact.id}]] {artifact.category} from {artifact.producer_skill}"
        )
    doc.sections.append(
        ("Sources", "\n".join(source_lines) if source_lines else "No citations recorded.")
    )
    input_ids = sorted(a.id for artifacts in inputs.values() for a in artifacts)
    parents = tuple(sorted(set(input_ids) | set(cited)))
    return [ArtifactDraft(category="memo", payload=doc.render(), parents=parents)]


register_hybrid("assemble_memo", schema=MEMO_SCHEMA, verifier=_verify_memo, builder=_build_memo)
