"""Analyze-phase hybrid skills: KPI extraction, segment mapping, gate check.

Each pairs a fixed output schema with a deterministic semantic verifier.
The verifier is the authority: provider output that disagrees with it is
regenerated with feedback and ultimately rejected, so accepted artifacts
are correct by construction regardless of which provider produced them.
"""

from __future__ import annotations

from ..runners import VerifierReport, register_hybrid
from ..runtime import ArtifactDraft

REQUIRED_FILING_SECTIONS = ("business_overview", "risk_factors", "mdna")

# Gate rubric: these categories must each contribute at least one valid
# artifact; news and transcripts are graded as optional context.
GATE_REQUIRED = ("filings", "kpis", "market_snapshot", "segments")

KPI_SCHEMA = {
    "title": "kpi_set",
    "type": "object",
    "required": ["ticker", "metrics"],
    "properties": {
        "ticker": {"type": "string"},
        "metrics": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["value", "unit", "citation"],
                "properties": {
                    "value": {"type": "number"},
                    "unit": {"enum": ["usd", "ratio", "count"]},
                    "citation": {"type": "string"},
                },
            },
        },
    },
}

SEGMENT_SCHEMA = {
    "title": "segment_map",
    "type": "object",
    "required": ["filing", "sections"],
    "properties": {
        "filing": {"type": "string"},
        "sections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "title", "start", "end"],
                "properties": {
                    "name": {"type": "string"},
                    "title": {"type": "string"},
                    "start": {"type": "integer"},
                    "end": {"type": "integer"},
                },
            },
        },
    },
}

GATE_SCHEMA = {
    "title": "gate_report",
    "type": "object",
    "required": ["passed", "missing", "summary"],
    "properties": {
        "passed": {"type": "boolean"},
        "missing": {"type": "array", "items": {"type": "array"}},
        "summary": {"type": "string"},
    },
}


def _input_index(inputs: dict) -> dict:
    return {a.id: a for artifacts in inputs.values() for a in artifacts}


# ---------------------------------------------------------------------------
# extract_kpis

def _verify_kpis(parsed: dict, inputs: dict, ctx) -> VerifierReport:
    problems = []
    metrics = parsed.get("metrics", {})
    if not metrics:
        problems.append("no metrics extracted")
    index = _input_index(inputs)
    for name, metric in sorted(metrics.items()):
        value = metric.get("value")
        unit = metric.get("unit")
        if unit == "ratio" and not (0.0 <= value <= 1.0):
            problems.append(f"{name}: ratio {value} outside [0, 1]")
        if unit == "usd" and value < 0:
            problems.append(f"{name}: negative amount {value}")
        citation = metric.get("citation", "")
        cited = index.get(citation)
        if cited is None:
            problems.append(f"{name}: citation {citation[:12]} not among inputs")
        elif cited.category not in ("filings", "market_snapshot"):
            problems.append(f"{name}: cited a {cited.category} artifact")
    return VerifierReport(ok=not problems, problems=problems)


def _build_kpis(parsed: dict, inputs: dict, ctx, spec) -> list[ArtifactDraft]:
    cited = sorted({m["citation"] for m in parsed.get("metrics", {}).values()})
    return [ArtifactDraft(category="kpis", payload=parsed, parents=tuple(cited))]


register_hybrid("extract_kpis", schema=KPI_SCHEMA, verifier=_verify_kpis, builder=_build_kpis)


# ---------------------------------------------------------------------------
# parse_segments

def _segments_view(artifact):
    """Embed the raw filing text verbatim so offsets are meaningful."""
    if artifact.category != "filings":
        return None
    data = artifact.data() if isinstance(artifact.payload, dict) else None
    if not isinstance(data, dict) or "raw_text" not in data:
        return None
    return f"RAW_TEXT_BEGIN\n{data['raw_text']}\nRAW_TEXT_END"


def _verify_segments(parsed: dict, inputs: dict, ctx) -> VerifierReport:
    problems = []
    index = _input_index(inputs)
    filing = index.get(parsed.get("filing", ""))
    if filing is None or filing.category != "filings":
        return VerifierReport(ok=False, problems=["segment map does not reference an input filing"])
    data = filing.data()
    raw = data.get("raw_text", "")
    declared = data.get("sections", {})
    named = {s["name"]: s for s in parsed.get("sections", [])}
    for required in REQUIRED_FILING_SECTIONS:
        if required not in named:
            problems.append(f"required section missing: {required}")
    for name, section in sorted(named.items()):
        start, end = section["start"], section["end"]
        if not (0 <= start < end <= len(raw)):
            problems.append(f"{name}: offsets [{start}, {end}) out of range")
            continue
        slice_text = raw[start:end]
        if not slice_text.strip():
            problems.append(f"{name}: empty section")
        if name in declared and slice_text != declared[name]:
            problems.append(f"{name}: offsets do not reproduce the section text")
    return VerifierReport(ok=not problems, problems=problems)


def _build_segments(parsed: dict, inputs: dict, ctx, spec) -> list[ArtifactDraft]:
    return [ArtifactDraft(category="segments", payload=parsed, parents=(parsed["filing"],))]


register_hybrid(
    "parse_segments",
    schema=SEGMENT_SCHEMA,
    verifier=_verify_segments,
    builder=_build_segments,
    view=_segments_view,
)


# ---------------------------------------------------------------------------
# gate_check

def _filing_valid(artifact) -> bool:
    try:
        data = artifact.data()
    except Exception:
        return False
    return bool(data.get("raw_text")) and bool(data.get("sections"))


def _market_valid(artifact) -> bool:
    try:
        data = artifact.data()
    except Exception:
        return False
    return data.get("price", 0) > 0 and data.get("market_cap", 0) > 0


def _kpis_valid(artifact) -> bool:
    try:
        data = artifact.data()
    except Exception:
        return False
    return bool(data.get("metrics"))


def _segments_valid(artifact) -> bool:
    try:
        data = artifact.data()
    except Exception:
        return False
    return bool(data.get("sections"))


_VALIDATORS = {
    "filings": _filing_valid,
    "market_snapshot": _market_valid,
    "kpis": _kpis_valid,
    "segments": _segments_valid,
}


def evaluate_gate(inputs: dict) -> tuple[bool, list[list[str]]]:
    """The deterministic gate rubric: a pure function of the input artifacts."""
    missing: list[list[str]] = []
    for category in GATE_REQUIRED:
        artifacts = inputs.get(category, [])
        if not artifacts:
            missing.append([category, "no artifact"])
            continue
        if not any(_VALIDATORS[category](a) for a in artifacts):
            missing.append([category, "no valid artifact"])
    return (not missing), missing


def _verify_gate(parsed: dict, inputs: dict, ctx) -> VerifierReport:
    passed, missing = evaluate_gate(inputs)
    problems = []
    got_missing = [list(m) for m in parsed.get("missing", [])]
    if bool(parsed.get("passed")) != passed:
        problems.append(f"passed should be {passed}")
    if got_missing != missing:
        problems.append(f"missing={missing}")
    if bool(parsed.get("passed")) != (not got_missing):
        problems.append("passed flag contradicts missing list")
    return VerifierReport(ok=not problems, problems=problems)


def _build_gate(parsed: dict, inputs: dict, ctx, spec) -> list[ArtifactDraft]:
    payload = {
        "ticker": ctx.params.get("ticker", ""),
        "passed": parsed["passed"],
        "missing": [list(m) for m in parsed["missing"]],
        "summary": parsed["summary"],
    }
    parents = tuple(sorted(a.id for artifacts in inputs.values() for a in artifacts))
    return [ArtifactDraft(category="gate_report", payload=payload, parents=parents)]


register_hybrid("gate_check", schema=GATE_SCHEMA, verifier=_verify_gate, builder=_build_gate)
