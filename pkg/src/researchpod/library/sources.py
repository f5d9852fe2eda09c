"""Setup and ingest skill bodies: coverage brief and the source fetchers.

Fixture mode reads from a directory tree:

    fixtures/<TICKER>/filings/*.txt      pre-extracted filing text
    fixtures/<TICKER>/market.json        price and market-cap snapshot
    fixtures/<TICKER>/news/*.json        one article per file

Live mode (opt-in) pulls filings from EDGAR, caching raw responses into the
evidence store so a repeated run needs no network.
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path

from ..errors import RunnerError
from ..runtime import ArtifactDraft

log = logging.getLogger(__name__)

FILING_SECTION_HEADERS = (
    ("business_overview", re.compile(r"^ITEM 1\. BUSINESS\s*$", re.MULTILINE)),
    ("risk_factors", re.compile(r"^ITEM 1A\. RISK FACTORS\s*$", re.MULTILINE)),
    ("mdna", re.compile(r"^ITEM 7\. MANAGEMENT'S DISCUSSION AND ANALYSIS\s*$", re.MULTILINE)),
)

_META_RE = re.compile(r"^([A-Z ]+):\s*(.+)$")


def split_filing_sections(raw: str) -> dict[str, str]:
    """Slice section text between ITEM headers.

    Convention shared with the segment mapper: a section spans from the
    character after the header line's newline to the start of the next
    header (or end of document), with no trimming, so offsets round-trip.
    """
    found = []
    for name, pattern in FILING_SECTION_HEADERS:
        match = pattern.search(raw)
        if match:
            found.append((name, match.start(), match.end()))
    found.sort(key=lambda item: item[1])
    sections = {}
    for idx, (name, start, header_end) in enumerate(found):
        content_start = header_end + 1
        content_end = found[idx + 1][1] if idx + 1 < len(found) else len(raw)
        if content_start <= content_end:
            sections[name] = raw[content_start:content_end]
    return sections


def parse_filing_text(raw: str) -> dict:
    """Parse one fixture filing file into a filing document payload."""
    meta = {}
    for line in raw.splitlines()[:12]:
        match = _META_RE.match(line.strip())
        if match:
            meta[match.group(1).strip().lower().replace(" ", "_")] = match.group(2).strip()
    return {
        "ticker": meta.get("ticker", ""),
        "form_type": meta.get("form", meta.get("form_type", "10-K")),
        "accession": meta.get("accession", ""),
        "filing_date": meta.get("filed", ""),
        "period": meta.get("period", ""),
        "raw_text": raw,
        "sections": split_filing_sections(raw),
    }


def _fixture_dir(params: dict, ctx) -> Path:
    root = ctx.fixtures_root
    if root is None:
        raise RunnerError("no fixtures root configured")
    ticker = params.get("ticker", "")
    if not ticker:
        raise RunnerError("engagement has no ticker")
    return Path(root) / ticker


def _brief_parent(inputs: dict) -> tuple[str, ...]:
    briefs = inputs.get("coverage_brief", [])
    return (briefs[0].id,) if briefs else ()


# ---------------------------------------------------------------------------
# Skill bodies

def coverage_brief(inputs: dict, params: dict, ctx) -> list[ArtifactDraft]:
    """Materialize the engagement parameters as the setup artifact."""
    payload = {
        "ticker": params.get("ticker", ""),
        "persona": params.get("persona", ""),
        "workflow": params.get("workflow", ""),
        "objective": params.get("objective", ""),
        "as_of": ctx.as_of,
        "requested_sources": ["filings", "market_snapshot", "news"],
    }
    return [ArtifactDraft(category="coverage_brief", payload=payload)]


def fetch_filings(inputs: dict, params: dict, ctx) -> list[ArtifactDraft]:
    """One filing-document artifact per source document."""
    if ctx.live_sources:
        from . import edgar

        return edgar.fetch_live_filings(inputs, params, ctx)
    directory = _fixture_dir(params, ctx) / "filings"
    files = sorted(directory.glob("*.txt")) if directory.exists() else []
    if not files:
        raise RunnerError(f"no filing fixtures for {params.get('ticker')} under {directory}")
    parents = _brief_parent(inputs)
    drafts = []
    for path in files:
        payload = parse_filing_text(path.read_text(encoding="utf-8"))
        payload.setdefault("ticker", params.get("ticker", ""))
        drafts.append(ArtifactDraft(category="filings", payload=payload, parents=parents))
    return drafts


def fetch_market(inputs: dict, params: dict, ctx) -> list[ArtifactDraft]:
    path = _fixture_dir(params, ctx) / "market.json"
    if not path.exists():
        raise RunnerError(f"no market fixture for {params.get('ticker')}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    return [ArtifactDraft(category="market_snapshot", payload=payload, parents=_brief_parent(inputs))]


def fetch_news(inputs: dict, params: dict, ctx) -> list[ArtifactDraft]:
    """Zero or more article artifacts; absence is a warning, not an error."""
    directory = _fixture_dir(params, ctx) / "news"
    files = sorted(directory.glob("*.json")) if directory.exists() else []
    if not files:
        log.warning("no news fixtures for %s; continuing with empty news", params.get("ticker"))
        return []
    parents = _brief_parent(inputs)
    drafts = []
    for path in files:
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload.setdefault("ticker", params.get("ticker", ""))
        drafts.append(ArtifactDraft(category="news", payload=payload, parents=parents))
    return drafts
