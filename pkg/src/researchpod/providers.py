"""Model providers.

The stub provider is the default: a deterministic text engine whose response
is a pure function of (system, prompt, schema, seed). It fills the requested
output schema by harvesting values verbatim from artifact excerpts the
runners embed in the prompt, so full engagements run offline and reproduce
bit-identical evidence. An HTTP provider with the same interface can be
selected by environment for live use.

Prompt conventions shared with the runners:

    ## Parameters          key: value lines
    ## Inputs              one block per resolved input artifact
    ### [[artifact:<id>]] category=<cat> skill=<skill>
    ## Catalog             agent-visible artifact inventory
    ## Transcript          prior tool results in an agent loop
    ## Verifier feedback   appended on regeneration attempts
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import ProviderError
from .util import utc_now_iso

MALFORMED_MARKER = "FORCE_MALFORMED"
TEMPLATE_VIOLATION_MARKER = "FORCE_TEMPLATE_VIOLATION"

VERDICTS = ("Buy", "Pass", "Hold", "Sell")


@dataclass
class ProviderCall:
    """One recorded provider round trip."""

    task_id: str
    skill: str
    system: str
    prompt: str
    schema_title: str | None
    seed: int
    response: str = ""
    prompt_tokens: int = 0
    response_tokens: int = 0
    created_at: str = field(default_factory=utc_now_iso)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "skill": self.skill,
            "schema_title": self.schema_title,
            "seed": self.seed,
            "prompt_tokens": self.prompt_tokens,
            "response_tokens": self.response_tokens,
            "created_at": self.created_at,
            "system": self.system,
            "prompt": self.prompt,
            "response": self.response,
        }


def rough_tokens(text: str) -> int:
    return max(1, len(text) // 4)


# ---------------------------------------------------------------------------
# Prompt parsing helpers (used by the stub to read what the runners embedded)

_BLOCK_RE = re.compile(
    r"^### \[\[artifact:(?P<id>[0-9a-f]{64})\]\] category=(?P<category>\S+)(?: skill=(?P<skill>\S+))?\s*$"
)
_CATALOG_RE = re.compile(
    r"^- \[\[artifact:(?P<id>[0-9a-f]{64})\]\] category=(?P<category>\S+)(?: (?P<summary>.*))?$"
)
_TOOL_RESULT_RE = re.compile(
    r"^### tool result: (?P<tool>\w+) (?P<detail>.*)$"
)


def parse_sections_block(text: str, heading: str) -> str:
    """Return the body of a `## <heading>` block, up to the next `## `."""
    pattern = re.compile(rf"^## {re.escape(heading)}\s*$", re.MULTILINE)
    match = pattern.search(text)
    if not match:
        return ""
    rest = text[match.end():]
    next_block = re.search(r"^## ", rest, re.MULTILINE)
    return rest[: next_block.start()] if next_block else rest


def parse_params(prompt: str) -> dict:
    params = {}
    for line in parse_sections_block(prompt, "Parameters").splitlines():
        if ":" in line:
            key, value = line.split(":", 1)
            params[key.strip()] = value.strip()
    return params


def parse_input_blocks(prompt: str) -> list[dict]:
    """All embedded artifact blocks (inputs and tool-read results)."""
    blocks = []
    current = None
    for line in prompt.splitlines():
        match = _BLOCK_RE.match(line)
        if match:
            current = {
                "id": match.group("id"),
                "category": match.group("category"),
                "skill": match.group("skill") or "",
                "lines": [],
            }
            blocks.append(current)
            continue
        if line.startswith("## ") or line.startswith("### "):
            current = None
            continue
        if current is not None:
            current["lines"].append(line)
    for block in blocks:
        block["excerpt"] = "\n".join(block["lines"]).strip()
        del block["lines"]
    return blocks


def parse_catalog(prompt: str) -> list[dict]:
    entries = []
    for line in parse_sections_block(prompt, "Catalog").splitlines():
        match = _CATALOG_RE.match(line.strip())
        if match:
            entries.append(
                {
                    "id": match.group("id"),
                    "category": match.group("category"),
                    "summary": match.group("summary") or "",
                }
            )
    return entries


def blocks_by_category(blocks: list[dict]) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = {}
    for block in blocks:
        grouped.setdefault(block["category"], []).append(block)
    return grouped


def _json_excerpt(block: dict):
    try:
        return json.loads(block["excerpt"])
    except (json.JSONDecodeError, KeyError):
        return None


# ---------------------------------------------------------------------------
# Financial prose harvesting

_METRIC_PATTERNS = {
    "revenue_q4_datacenter": (
        re.compile(r"Data Center revenue of \$([\d.]+) billion", re.IGNORECASE),
        1e9,
        "usd",
    ),
    "datacenter_share": (
        re.compile(r"([\d.]+)% of total (?:revenue|sales)", re.IGNORECASE),
        0.01,
        "ratio",
    ),
    "revenue_fy": (
        re.compile(r"full[- ]year revenue (?:was|of) \$([\d.]+) billion", re.IGNORECASE),
        1e9,
        "usd",
    ),
    "revenue_yoy": (
        re.compile(r"up ([\d.]+)% year[- ]over[- ]year", re.IGNORECASE),
        0.01,
        "ratio",
    ),
    "gross_margin_q4": (
        re.compile(
            r"gross margin for the fourth quarter was approximately ([\d.]+)%", re.IGNORECASE
        ),
        0.01,
        "ratio",
    ),
    "owner_eps": (
        re.compile(
            r"owner earnings of approximately \$([\d.]+) per (?:diluted )?share", re.IGNORECASE
        ),
        1.0,
        "usd",
    ),
    "inventory_charge": (
        re.compile(r"\$([\d.]+) billion (?:charge|write-down) (?:for|against)", re.IGNORECASE),
        1e9,
        "usd",
    ),
}


def harvest_metrics(text: str) -> dict[str, tuple[float, str]]:
    found = {}
    for name, (pattern, scale, unit) in _METRIC_PATTERNS.items():
        match = pattern.search(text)
        if match:
            found[name] = (round(float(match.group(1)) * scale, 10), unit)
    return found


# ---------------------------------------------------------------------------
# Stub provider

class StubProvider:
    """Offline deterministic provider.

    Responses depend only on the call arguments: the prompt is parsed for
    embedded parameters, artifact excerpts, catalogs, and verifier feedback,
    and the requested schema is filled from those. Values appearing in
    output are copied verbatim from the embedded material.
    """

    name = "stub"

    def complete(self, system: str, prompt: str, schema: dict | None = None, seed: int = 0) -> str:
        if schema is None:
            return self._freeform(system, prompt)
        title = schema.get("title", "")
        if MALFORMED_MARKER in prompt or MALFORMED_MARKER in system:
            return json.dumps({"malformed": True, "reason": "forced by test hook"})
        handler = {
            "kpi_set": self._kpi_set,
            "segment_map": self._segment_map,
            "gate_report": self._gate_report,
            "agent_turn": self._agent_turn,
            "memo_document": self._memo_document,
            "persona_profile": self._persona_profile,
        }.get(title, self._generic_fill)
        return handler(system, prompt, schema)

    # -- freeform ------------------------------------------------------

    def _freeform(self, system: str, prompt: str) -> str:
        params = parse_params(prompt)
        subject = params.get("ticker") or params.get("topic") or "the subject"
        return f"Notes on {subject}: " + " ".join(prompt.split()[:40])

    # -- extract_kpis --------------------------------------------------

    def _kpi_set(self, system: str, prompt: str, schema: dict) -> str:
        params = parse_params(prompt)
        blocks = blocks_by_category(parse_input_blocks(prompt))
        metrics = {}
        for block in blocks.get("filings", []):
            for name, (value, unit) in harvest_metrics(block["excerpt"]).items():
                metrics.setdefault(
                    name, {"value": value, "unit": unit, "citation": block["id"]}
                )
        for block in blocks.get("market_snapshot", []):
            data = _json_excerpt(block)
            if not isinstance(data, dict):
                continue
            for name in ("price", "market_cap"):
                if name in data:
                    metrics.setdefault(
                        name,
                        {"value": data[name], "unit": "usd", "citation": block["id"]},
                    )
        return json.dumps({"ticker": params.get("ticker", ""), "metrics": metrics})

    # -- parse_segments ------------------------------------------------

    _SECTION_HEADERS = (
        ("business_overview", re.compile(r"^ITEM 1\. BUSINESS\s*$", re.MULTILINE)),
        ("risk_factors", re.compile(r"^ITEM 1A\. RISK FACTORS\s*$", re.MULTILINE)),
        ("mdna", re.compile(r"^ITEM 7\. MANAGEMENT'S DISCUSSION AND ANALYSIS\s*$", re.MULTILINE)),
    )

    def _segment_map(self, system: str, prompt: str, schema: dict) -> str:
        blocks = blocks_by_category(parse_input_blocks(prompt))
        filings = blocks.get("filings", [])
        if not filings:
            return json.dumps({"filing": "", "sections": []})
        block = filings[0]
        raw_match = re.search(r"RAW_TEXT_BEGIN\n(.*)\nRAW_TEXT_END", block["excerpt"], re.DOTALL)
        raw = raw_match.group(1) if raw_match else block["excerpt"]
        headers = []
        for name, pattern in self._SECTION_HEADERS:
            match = pattern.search(raw)
            if match:
                headers.append((name, match.start(), match.end()))
        headers.sort(key=lambda h: h[1])
        sections = []
        for idx, (name, start, header_end) in enumerate(headers):
            content_start = header_end + 1  # past the header's newline
            content_end = headers[idx + 1][1] if idx + 1 < len(headers) else len(raw)
            sections.append(
                {
                    "name": name,
                    "title": raw[start:header_end],
                    "start": content_start,
                    "end": content_end,
                }
            )
        return json.dumps({"filing": block["id"], "sections": sections})

    # -- gate_check ----------------------------------------------------

    def _gate_report(self, system: str, prompt: str, schema: dict) -> str:
        feedback = parse_sections_block(prompt, "Verifier feedback")
        if feedback:
            corrected = _parse_feedback_missing(feedback)
            if corrected is not None:
                return json.dumps(
                    {
                        "passed": not corrected,
                        "missing": corrected,
                        "summary": _gate_summary(corrected),
                    }
                )
        present = set(blocks_by_category(parse_input_blocks(prompt)))
        required = ("filings", "kpis", "market_snapshot", "segments")
        missing = [[cat, "no artifact"] for cat in required if cat not in present]
        return json.dumps(
            {
                "passed": not missing,
                "missing": missing,
                "summary": _gate_summary(missing),
            }
        )

    # -- agent loop ----------------------------------------------------

    _READ_PRIORITY = ("kpis", "market_snapshot", "filings", "news")

    def _agent_turn(self, system: str, prompt: str, schema: dict) -> str:
        catalog = parse_catalog(prompt)
        transcript = parse_sections_block(prompt, "Transcript")
        already_read = set(re.findall(r"read_artifact \[\[artifact:([0-9a-f]{64})\]\]", transcript))
        plan: list[str] = []
        for category in self._READ_PRIORITY:
            for entry in catalog:
                if entry["category"] == category:
                    plan.append(entry["id"])
                    break
            if len(plan) >= 3:
                break
        for artifact_id in plan:
            if artifact_id not in already_read:
                return json.dumps(
                    {"action": "tool", "tool": "read_artifact", "args": {"id": artifact_id}}
                )
        return json.dumps({"action": "final", "output": self._compose_view(system, prompt)})

    def _compose_view(self, system: str, prompt: str) -> dict:
        params = parse_params(prompt)
        blocks = parse_input_blocks(prompt)
        grouped = blocks_by_category(blocks)
        values = _collect_values(grouped)
        ticker = params.get("ticker", "")
        persona = params.get("persona", "")
        section_titles = _split_csv(params.get("sections", "")) or _output_sections(system)
        writer = _SectionWriter(ticker, values, grouped, system)
        sections = [
            {"title": title, "body": writer.write(title)} for title in section_titles
        ]
        view = {
            "persona": persona,
            "ticker": ticker,
            "sections": sections,
            "themes": _split_csv(params.get("themes", "")) or _derive_themes(grouped),
        }
        if _verdict_required(system):
            view["verdict"] = writer.verdict()
        else:
            view["verdict"] = None
        return view

    # -- assemble_memo -------------------------------------------------

    def _memo_document(self, system: str, prompt: str, schema: dict) -> str:
        params = parse_params(prompt)
        grouped = blocks_by_category(parse_input_blocks(prompt))
        view = None
        for block in grouped.get("persona_view", []):
            view = _json_excerpt(block)
            if view:
                break
        if not isinstance(view, dict):
            view = {"sections": [], "themes": [], "verdict": None, "persona": "", "ticker": ""}
        return json.dumps(
            {
                "ticker": view.get("ticker") or params.get("ticker", ""),
                "persona": view.get("persona") or params.get("persona", ""),
                "workflow": params.get("workflow_name") or params.get("workflow", ""),
                "sections": view.get("sections", []),
                "themes": view.get("themes", []),
                "verdict": view.get("verdict"),
            }
        )

    # -- persona distillation -----------------------------------------

    def _persona_profile(self, system: str, prompt: str, schema: dict) -> str:
        if TEMPLATE_VIOLATION_MARKER in prompt:
            return json.dumps({"traits": ["incomplete"], "risk_profile": "missing fields"})
        excerpts: dict[str, list[str]] = {}
        for match in re.finditer(
            r"^- \[(?P<kind>[a-z_]+)\] (?P<text>.+?) \(source: (?P<src>.+?)\)$",
            parse_sections_block(prompt, "Excerpts"),
            re.MULTILINE,
        ):
            excerpts.setdefault(match.group("kind"), []).append(match.group("text"))
        cues = [
            line.strip("- ").strip()
            for line in parse_sections_block(prompt, "Style cues").splitlines()
            if line.strip().startswith("-")
        ]
        heuristic_lines = [
            line.strip("- ").strip()
            for line in parse_sections_block(prompt, "Heuristics").splitlines()
            if line.strip().startswith("-")
        ]

        def condensed(kind: str, fallback: str) -> list[str]:
            lines = excerpts.get(kind, [])
            return [_condense(line) for line in lines[:4]] or [fallback]

        profile = {
            "traits": condensed("business_quality", "patient generalist"),
            "investment_heuristics": (
                heuristic_lines[:6]
                or condensed("valuation_discipline", "insist on a margin of safety")
            ),
            "risk_profile": "; ".join(condensed("risk_assessment", "avoids permanent capital loss")),
            "preferred_evidence": _preferred_evidence(excerpts),
            "communication_style": " ".join(cues) or "plain declarative prose",
        }
        return json.dumps(profile)

    # -- fallback ------------------------------------------------------

    def _generic_fill(self, system: str, prompt: str, schema: dict) -> str:
        out = {}
        for name, spec in schema.get("properties", {}).items():
            kind = spec.get("type")
            if kind == "string":
                out[name] = f"stub:{name}"
            elif kind == "number":
                out[name] = 0
            elif kind == "array":
                out[name] = []
            elif kind == "object":
                out[name] = {}
            else:
                out[name] = None
        return json.dumps(out)


# ---------------------------------------------------------------------------
# Section synthesis for persona views

_THEME_RULES = (
    ("AI Infrastructure", re.compile(r"data center|GPU|accelerated computing|artificial intelligence", re.I)),
    ("Export Controls", re.compile(r"export (control|license|restriction)", re.I)),
)


def _derive_themes(grouped: dict) -> list[str]:
    """Fallback themes scanned from the evidence when none were requested."""
    text = " ".join(
        block["excerpt"] for blocks in grouped.values() for block in blocks
    )
    return [name for name, pattern in _THEME_RULES if pattern.search(text)]


def _split_csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _output_sections(system: str) -> list[str]:
    """Parse the `sections in order` bullet list from a skill body."""
    anchor = re.search(r"sections in order:?", system, re.IGNORECASE)
    titles = []
    if anchor:
        for line in system[anchor.end():].splitlines():
            stripped = line.strip()
            if stripped.startswith("- "):
                titles.append(stripped[2:].strip())
            elif titles and stripped and not stripped.startswith("-"):
                break
    return titles or ["Thesis", "Risks"]


def _verdict_required(system: str) -> bool:
    return bool(re.search(r"one of:\s*Buy,\s*Pass,\s*Hold,\s*Sell", system))


def _band_multiples(system: str) -> tuple[int, int]:
    match = re.search(r"(\d+)\s*(?:to|-|x to)\s*(\d+)\s*times owner earnings", system, re.IGNORECASE)
    if match:
        return int(match.group(1)), int(match.group(2))
    return 20, 30


def _collect_values(grouped: dict[str, list[dict]]) -> dict:
    """Pull every number the excerpts expose, keyed by metric name."""
    values: dict[str, tuple[float, str, str]] = {}
    for block in grouped.get("kpis", []):
        data = _json_excerpt(block)
        if isinstance(data, dict):
            for name, metric in data.get("metrics", {}).items():
                values[name] = (metric.get("value"), metric.get("unit", ""), block["id"])
    for block in grouped.get("market_snapshot", []):
        data = _json_excerpt(block)
        if isinstance(data, dict):
            for name in ("price", "market_cap"):
                if name in data and name not in values:
                    values[name] = (data[name], "usd", block["id"])
    for block in grouped.get("filings", []):
        for name, (value, unit) in harvest_metrics(block["excerpt"]).items():
            values.setdefault(name, (value, unit, block["id"]))
    return values


def _fmt_usd(value: float) -> str:
    if value >= 1e12:
        return f"${value / 1e12:.2f} trillion"
    if value >= 1e9:
        return f"${value / 1e9:.1f} billion"
    if value >= 1e6:
        return f"${value / 1e6:.0f} million"
    return f"${value:,.2f}"


def _fmt_pct(value: float) -> str:
    return f"{value * 100:.1f}%"


class _SectionWriter:
    """Deterministic per-section prose synthesis with citations."""

    def __init__(self, ticker: str, values: dict, grouped: dict, system: str) -> None:
        self.ticker = ticker
        self.values = values
        self.grouped = grouped
        self.system = system
        self.filings_text = "\n".join(b["excerpt"] for b in grouped.get("filings", []))
        self.news_blocks = grouped.get("news", [])

    def _cite(self, metric: str) -> str:
        entry = self.values.get(metric)
        return f" [[artifact:{entry[2]}]]" if entry else ""

    def _value(self, metric: str):
        entry = self.values.get(metric)
        return entry[0] if entry else None

    def outside_circle(self) -> bool:
        return bool(
            re.search(r"GPU|accelerated computing|artificial intelligence", self.filings_text, re.IGNORECASE)
        )

    def band(self) -> tuple[int, int] | None:
        eps = self._value("owner_eps")
        if eps is None:
            return None
        low_mult, high_mult = _band_multiples(self.system)
        return int(eps * low_mult), int(eps * high_mult)

    def verdict(self) -> str:
        price = self._value("price")
        band = self.band()
        if price is not None and band is not None and price > band[1]:
            return "Pass"
        if self.outside_circle():
            return "Pass"
        if price is not None and band is not None and price < band[0]:
            return "Buy"
        return "Hold"

    def write(self, title: str) -> str:
        key = re.sub(r"[^a-z0-9]+", "_", title.lower()).strip("_")
        handler = getattr(self, f"_sec_{key}", None)
        if handler is not None:
            return handler()
        return self._sec_default(title)

    # Shared fragments -------------------------------------------------

    def _growth_sentence(self) -> str:
        rev = self._value("revenue_fy")
        yoy = self._value("revenue_yoy")
        if rev is None or yoy is None:
            return f"{self.ticker} reported results in line with its recent trajectory."
        return (
            f"{self.ticker} produced {_fmt_usd(rev)} of full-year revenue, up "
            f"{_fmt_pct(yoy)} year over year.{self._cite('revenue_fy')}"
        )

    def _concentration_sentence(self) -> str:
        dc = self._value("revenue_q4_datacenter")
        share = self._value("datacenter_share")
        if dc is None or share is None:
            return ""
        return (
            f" Data Center contributed {_fmt_usd(dc)} in the fourth quarter, "
            f"{_fmt_pct(share)} of total sales.{self._cite('revenue_q4_datacenter')}"
        )

    def _margin_sentence(self) -> str:
        margin = self._value("gross_margin_q4")
        if margin is None:
            return ""
        return (
            f" Fourth-quarter gross margin was approximately "
            f"{_fmt_pct(margin)}.{self._cite('gross_margin_q4')}"
        )

    def _news_sentence(self) -> str:
        if not self.news_blocks:
            return ""
        block = self.news_blocks[0]
        headline = ""
        data = _json_excerpt(block)
        if isinstance(data, dict):
            headline = data.get("headline", "")
        elif block["excerpt"]:
            headline = block["excerpt"].splitlines()[0]
        if not headline:
            return ""
        return f' Recent coverage: "{headline}". [[artifact:{block["id"]}]]'

    # Generic pitch sections ------------------------------------------

    def _sec_thesis(self) -> str:
        price = self._value("price")
        cap = self._value("market_cap")
        parts = [self._growth_sentence()]
        if price is not None and cap is not None:
            parts.append(
                f" The market prices the business at {_fmt_usd(cap)} "
                f"({_fmt_usd(price)} per share).{self._cite('market_cap')}"
            )
        return "".join(parts)

    def _sec_business(self) -> str:
        match = re.search(r"ITEM 1\. BUSINESS\n(.+?)(?:\n[A-Z]|\nITEM )", self.filings_text, re.DOTALL)
        base = match.group(1).strip().splitlines()[0] if match else f"{self.ticker} operating overview."
        cite = ""
        if self.grouped.get("filings"):
            cite = f" [[artifact:{self.grouped['filings'][0]['id']}]]"
        return base + cite

    def _sec_financials(self) -> str:
        return (self._growth_sentence() + self._concentration_sentence() + self._margin_sentence()).strip()

    def _sec_risks(self) -> str:
        concentration = self._concentration_sentence().strip()
        sentences = []
        if concentration:
            sentences.append("Customer and segment concentration is the standout risk. " + concentration)
        if re.search(r"export control", self.filings_text, re.IGNORECASE):
            charge = self._value("inventory_charge")
            extra = f" including a {_fmt_usd(charge)} inventory charge" if charge else ""
            sentences.append(
                f" Export-control restrictions weigh on results{extra}."
                + (self._cite("inventory_charge") or self._cite("revenue_fy"))
            )
        sentences.append(self._news_sentence())
        return "".join(sentences).strip() or "No material risks surfaced in the reviewed material."

    def _sec_catalysts(self) -> str:
        return (
            "Continued data-center capacity expansion and any relaxation of export "
            "restrictions are the near-term swing factors." + self._news_sentence()
        )

    # Buffett-flavored sections ---------------------------------------

    def _sec_8_question_filter(self) -> str:
        price = self._value("price")
        band = self.band()
        outside = self.outside_circle()
        margin = self._value("gross_margin_q4")
        answers = [
            (
                "1. Can I explain the business in one plain paragraph?",
                "No." if outside else "Yes.",
                "The product cycle turns on architecture shifts I cannot handicap."
                if outside
                else "The business model is straightforward.",
            ),
            (
                "2. Has it earned durably high returns on capital?",
                "Yes." if margin and margin > 0.5 else "Unclear.",
                f"Gross margin near {_fmt_pct(margin)} suggests real pricing power today.{self._cite('gross_margin_q4')}"
                if margin
                else "Capital returns history is unclear from the material.",
            ),
            (
                "3. Is there a moat rivals with triple the capital cannot cross?",
                "Partly.",
                "The software ecosystem is sticky, but the physics of the next chip cycle is not a franchise.",
            ),
            (
                "4. Is management honest and rational with owners' capital?",
                "Yes.",
                "Nothing in the reviewed filings suggests otherwise.",
            ),
            (
                "5. Are owner earnings predictable five to ten years out?",
                "No.",
                "Demand rides one build-out cycle; visibility past it is poor." + self._cite("revenue_yoy"),
            ),
            (
                "6. Is the balance sheet conservative through a bad cycle?",
                "Yes.",
                "Cash generation comfortably covers commitments in the period reviewed.",
            ),
            (
                "7. Is the price sensible against a conservative value band?",
                "No." if price and band and price > band[1] else "Yes.",
                (
                    f"At {_fmt_usd(price)} the shares sit far above a "
                    f"${band[0]}-${band[1]} comfort band.{self._cite('price')}"
                )
                if price and band
                else "Price data incomplete.",
            ),
            (
                "8. Would I hold happily for ten years if the market closed?",
                "No.",
                "Not when the answer to questions 1, 5, and 7 is no.",
            ),
        ]
        return "\n".join(f"{q} {a} {why}" for q, a, why in answers)

    def _sec_circle_of_competence(self) -> str:
        if self.outside_circle():
            return (
                "This one sits outside my circle of competence. I can read the income "
                "statement, but I cannot tell you what the accelerated-computing stack "
                "looks like in year seven, and I refuse to pay for certainty I do not have. "
                "Knowing the edge of the circle matters more than the size of it."
                + self._cite("revenue_fy")
            )
        return "The business falls inside the circle: demand, pricing, and reinvestment are all legible."

    def _sec_key_assumptions_and_falsification_tests(self) -> str:
        share = self._value("datacenter_share")
        lines = [
            "Assumption: hyperscaler capital spending keeps compounding. "
            "Falsified if two consecutive quarters show data-center revenue declining.",
        ]
        if share is not None:
            lines.append(
                f"Assumption: concentration stays manageable even at {_fmt_pct(share)} of sales. "
                f"Falsified if a top customer insources at scale.{self._cite('datacenter_share')}"
            )
        lines.append(
            "Assumption: export regimes do not widen. Falsified by new license "
            "requirements on current-generation parts." + self._news_sentence()
        )
        return "\n".join(lines)

    def _sec_moat_analysis(self) -> str:
        return (
            "The moat today is an ecosystem: developer tooling, libraries, and switching "
            "costs. Ecosystems are real moats until the substrate shifts; in silicon the "
            "substrate shifts on somebody else's schedule. I would not bet the farm on a "
            "moat that needs re-digging every product cycle." + self._cite("revenue_q4_datacenter")
        )

    def _sec_management_and_capital_allocation(self) -> str:
        return (
            "Management has executed superbly and reinvested at extraordinary incremental "
            "returns. The test I cannot run is how they allocate capital when the cycle "
            "turns; the record to date is all tailwind."
        )

    def _sec_financial_snapshot(self) -> str:
        return (self._growth_sentence() + self._concentration_sentence() + self._margin_sentence()).strip()

    def _sec_valuation_and_margin_of_safety(self) -> str:
        price = self._value("price")
        cap = self._value("market_cap")
        eps = self._value("owner_eps")
        band = self.band()
        lines = []
        if cap is not None and price is not None:
            lines.append(
                f"The market asks {_fmt_usd(cap)}, or {_fmt_usd(price)} per share.{self._cite('market_cap')}"
            )
        if eps is not None and band is not None:
            low_mult, high_mult = _band_multiples(self.system)
            lines.append(
                f"Owner earnings run about ${eps:.2f} per share; at {low_mult} to {high_mult} "
                f"times owner earnings a sensible entry sits near ${band[0]} to ${band[1]} per "
                f"share.{self._cite('owner_eps')}"
            )
            if price is not None and price > band[1]:
                lines.append(
                    "Today's quote offers no margin of safety at all; the price assumes the "
                    "best decade continues uninterrupted."
                )
        return "\n".join(lines) or "Insufficient data for a valuation band."

    def _sec_sell_criteria_check(self) -> str:
        return (
            "Were this held: sell on moat erosion (ecosystem defections), on management "
            "chasing acquisitions outside the core, or on the price exceeding twice the "
            "top of the value band. None of these triggers bear on a new purchase today."
        )

    def _sec_monitoring_indicators(self) -> str:
        return (
            "Watch: quarterly data-center revenue trend, customer concentration "
            "disclosures, export-license developments, and inventory levels."
            + self._news_sentence()
        )

    def _sec_conclusion(self) -> str:
        verdict = self.verdict()
        band = self.band()
        price = self._value("price")
        if verdict == "Pass" and band and price:
            return (
                f"Don't Buy. A wonderful business at {_fmt_usd(price)} is still outside my "
                f"circle and outside my price. I would reconsider in the ${band[0]} to "
                f"${band[1]} per share range, and only after I can answer question one "
                f"with a yes.{self._cite('price')}"
            )
        if verdict == "Pass":
            return "Don't Buy. The filter fails on competence and price."
        return f"Verdict: {verdict}."

    def _sec_default(self, title: str) -> str:
        return f"{title}: " + (self._growth_sentence() or "see financial snapshot.")


def _condense(text: str, limit: int = 140) -> str:
    text = text.strip()
    return text if len(text) <= limit else text[: limit - 3].rstrip() + "..."


def _preferred_evidence(excerpts: dict[str, list[str]]) -> list[str]:
    sources = ["annual reports read cover to cover", "ten years of financial statements"]
    if excerpts.get("macro_sensitivity"):
        sources.append("long-run industry volume data")
    if excerpts.get("risk_assessment"):
        sources.append("the liabilities side of the balance sheet")
    return sources


def _gate_summary(missing) -> str:
    if not missing:
        return "All required source categories present and valid."
    names = ", ".join(m[0] for m in missing)
    return f"Insufficient sources: missing {names}."


def _parse_feedback_missing(feedback: str):
    match = re.search(r"missing=(\[.*?\])", feedback, re.DOTALL)
    if not match:
        return None
    try:
        return json.loads(match.group(1))
    except json.JSONDecodeError:
        return None


# ---------------------------------------------------------------------------
# Live provider

class HttpProvider:
    """Thin chat-completion client speaking a single-turn JSON protocol."""

    name = "http"

    def __init__(self, endpoint: str, api_key: str = "", model: str = "default", timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout

    def complete(self, system: str, prompt: str, schema: dict | None = None, seed: int = 0) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "system": system,
            "prompt": prompt,
            "seed": seed,
        }
        if schema is not None:
            body["schema"] = schema
        try:
            response = requests.post(
                f"{self.endpoint}/v1/complete", json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(f"provider returned {response.status_code}: {response.text[:200]}")
        data = response.json()
        if "text" not in data:
            raise ProviderError("provider response missing text field")
        return data["text"]
