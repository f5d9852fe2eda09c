"""Persona distillation: source corpus to deployable persona pack.

Four steps, each leaving an inspectable artifact in the evidence store:

    a0 corpus     directory of source documents plus a manifest
    a1 material   extract: rule-based excerpts indexed by judgment type
    a2 profile    generate: one model call fills a fixed five-field template
    a3 spec       specify: deterministic compilation into a skill spec
    a4 pack       bundle: pack manifest with workflows and config

Only step 2 talks to the provider. Editing any intermediate and re-running
the later steps never reaches back to earlier inputs, so a corrected profile
recompiles to a pack without burning another model call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import re

from .errors import UnknownIdError, ValidationError, VerifierRejectedError
from .providers import TEMPLATE_VIOLATION_MARKER
from .specs import Phase, RunnerKind, SkillSpec, validate_spec
from .util import canonical_json, sha256_hex

JUDGMENT_TYPES = (
    "business_quality",
    "valuation_discipline",
    "risk_assessment",
    "macro_sensitivity",
)

DOCUMENT_KINDS = ("letter", "interview", "book_excerpt", "post")

DISTILLED_NEEDS = frozenset(
    {
        "coverage_brief",
        "filings",
        "market_snapshot",
        "kpis",
        "segments",
        "gate_report",
        "news",
        "transcripts",
    }
)

PERSONA_PROFILE_SCHEMA = {
    "title": "persona_profile",
    "type": "object",
    "properties": {
        "traits": {"type": "array", "items": {"type": "string"}},
        "investment_heuristics": {"type": "array", "items": {"type": "string"}},
        "risk_profile": {"type": "string"},
        "preferred_evidence": {"type": "array", "items": {"type": "string"}},
        "communication_style": {"type": "string"},
    },
    "required": [
        "traits",
        "investment_heuristics",
        "risk_profile",
        "preferred_evidence",
        "communication_style",
    ],
}

PROFILE_FIELDS = tuple(PERSONA_PROFILE_SCHEMA["required"])


# ---------------------------------------------------------------------------
# a0: source corpus


@dataclass(frozen=True)
class CorpusDocument:
    title: str
    kind: str
    text: str


@dataclass(frozen=True)
class SourceCorpus:
    persona_id: str
    name: str
    documents: tuple[CorpusDocument, ...]


def load_corpus(path: Path | str) -> SourceCorpus:
    """Read a corpus directory: manifest.json naming the documents."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    persona_id = manifest.get("persona")
    if not persona_id:
        raise ValidationError("corpus manifest missing persona id")
    documents = []
    for entry in manifest.get("documents", []):
        kind = entry.get("kind", "")
        if kind not in DOCUMENT_KINDS:
            raise ValidationError(f"bad document kind {kind!r} for {entry.get('title')!r}")
        text = (root / entry["file"]).read_text(encoding="utf-8")
        if not text.strip():
            raise ValidationError(f"empty corpus document: {entry['file']}")
        documents.append(CorpusDocument(title=entry["title"], kind=kind, text=text))
    return SourceCorpus(
        persona_id=persona_id,
        name=manifest.get("name", persona_id),
        documents=tuple(documents),
    )


# ---------------------------------------------------------------------------
# a1: structured material


@dataclass(frozen=True)
class Excerpt:
    text: str
    source: str
    judgment_type: str


@dataclass(frozen=True)
class StructuredMaterial:
    excerpts: tuple[Excerpt, ...]
    style_cues: tuple[str, ...]
    heuristics: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "excerpts": [
                {"text": e.text, "source": e.source, "judgment_type": e.judgment_type}
                for e in self.excerpts
            ],
            "style_cues": list(self.style_cues),
            "heuristics": list(self.heuristics),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StructuredMaterial":
        return cls(
            excerpts=tuple(
                Excerpt(e["text"], e["source"], e["judgment_type"])
                for e in data.get("excerpts", [])
            ),
            style_cues=tuple(data.get("style_cues", [])),
            heuristics=tuple(data.get("heuristics", [])),
        )

    def digest(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()).encode("utf-8"))

    def by_type(self, judgment_type: str) -> list[Excerpt]:
        return [e for e in self.excerpts if e.judgment_type == judgment_type]


# Keyword lexicons, checked in this order; the first hit claims the sentence.
# Macro and risk terms are scanned before the broader business vocabulary so
# "inflation forces pricing power" lands under macro, not moats.
_JUDGMENT_LEXICON = (
    (
        "macro_sensitivity",
        (
            "interest rate",
            "inflation",
            "macro",
            "economy as a whole",
            "recession",
            "the cycle",
            "gdp",
        ),
    ),
    (
        "risk_assessment",
        (
            "risk",
            "permanent loss",
            "leverage",
            "debt",
            "swimming naked",
            "go broke",
            "downside",
            "ruin",
        ),
    ),
    (
        "valuation_discipline",
        (
            "intrinsic value",
            "margin of safety",
            "owner earnings",
            "price is what you pay",
            "discount",
            "multiple of earnings",
            "pay a fair price",
            "cheap",
        ),
    ),
    (
        "business_quality",
        (
            "moat",
            "competitive advantage",
            "wonderful business",
            "pricing power",
            "franchise",
            "returns on capital",
            "return on capital",
            "brand",
            "low-cost producer",
        ),
    ),
)

_STYLE_TERMS = (
    "plain english",
    "simple language",
    "folksy",
    "omaha",
    "stories",
    "metaphor",
)

_HEURISTIC_PREFIXES = ("Never ", "Always ", "Only ", "Rule ", "If ", "Be ", "Avoid ")

# Sentence boundary: terminal punctuation not preceded by a known honorific
# or "No." (as in Rule No. 1).
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])(?<!Mr\.)(?<!Mrs\.)(?<!Dr\.)(?<!No\.)\s+")


def _sentences(text: str) -> list[str]:
    flat = " ".join(text.split())
    return [s.strip() for s in _SENTENCE_SPLIT.split(flat) if s.strip()]


def extract(corpus: SourceCorpus) -> StructuredMaterial:
    """Step 1: deterministic parse of the corpus into judgment-indexed
    excerpts, style cues, and decision heuristics. No provider involved."""
    if not corpus.documents:
        raise ValidationError("empty corpus: no documents to extract from")
    excerpts: list[Excerpt] = []
    style_cues: list[str] = []
    heuristics: list[str] = []
    seen: set[str] = set()
    for document in corpus.documents:
        for sentence in _sentences(document.text):
            if sentence in seen:
                continue
            seen.add(sentence)
            lowered = sentence.lower()
            if any(term in lowered for term in _STYLE_TERMS):
                style_cues.append(sentence)
                continue
            if sentence.startswith(_HEURISTIC_PREFIXES):
                heuristics.append(sentence)
                continue
            for judgment_type, terms in _JUDGMENT_LEXICON:
                if any(term in lowered for term in terms):
                    excerpts.append(Excerpt(sentence, document.title, judgment_type))
                    break
    return StructuredMaterial(
        excerpts=tuple(excerpts),
        style_cues=tuple(style_cues),
        heuristics=tuple(heuristics),
    )


# ---------------------------------------------------------------------------
# a2: persona document


@dataclass
class PersonaDocument:
    """The fixed five-field persona template; fixing the fields keeps
    personas comparable side by side."""

    traits: str
    investment_heuristics: str
    risk_profile: str
    preferred_evidence: str
    communication_style: str

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PROFILE_FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "PersonaDocument":
        missing = missing_fields(data)
        if missing:
            raise ValidationError(f"persona document missing fields: {', '.join(missing)}")
        return cls(**{name: _as_text(data[name]) for name in PROFILE_FIELDS})


def missing_fields(data: dict) -> list[str]:
    out = []
    for name in PROFILE_FIELDS:
        value = data.get(name)
        if value is None or not _as_text(value).strip():
            out.append(name)
    return out


def _as_text(value) -> str:
    if isinstance(value, (list, tuple)):
        return "; ".join(str(v) for v in value)
    return str(value)


GENERATE_SYSTEM = (
    "You compile an investor persona profile from source excerpts. Fill every "
    "field of the fixed template in the first person, grounded only in the "
    "supplied material: traits, investment_heuristics, risk_profile, "
    "preferred_evidence, communication_style."
)


def render_generate_prompt(material: StructuredMaterial, persona_id: str, name: str) -> str:
    lines = ["## Parameters", f"persona: {persona_id}", f"name: {name}", ""]
    lines.append("## Excerpts")
    for excerpt in material.excerpts:
        lines.append(f"- [{excerpt.judgment_type}] {excerpt.text} (source: {excerpt.source})")
    lines.append("")
    lines.append("## Style cues")
    for cue in material.style_cues:
        lines.append(f"- {cue}")
    lines.append("")
    lines.append("## Heuristics")
    for heuristic in material.heuristics:
        lines.append(f"- {heuristic}")
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# a3: skill spec


def specify(document: PersonaDocument, persona_id: str, name: str | None = None) -> SkillSpec:
    """Step 3: deterministic compilation of the persona document into an
    agent skill spec on the shared compose contract."""
    display = name or persona_id
    body = (
        f"You are {display}. Stay in character; judge the evidence through the "
        "profile below and cite every number with its [[artifact:...]] marker.\n"
        "\n"
        f"# Traits\n{document.traits}\n"
        "\n"
        f"# Investment heuristics\n{document.investment_heuristics}\n"
        "\n"
        f"# Risk profile\n{document.risk_profile}\n"
        "\n"
        f"# Preferred evidence\n{document.preferred_evidence}\n"
        "\n"
        f"# Communication style\n{document.communication_style}\n"
        "\n"
        "Produce these sections in order:\n"
        "- Thesis\n"
        "- Business\n"
        "- Risks\n"
        "- Conclusion\n"
    )
    return SkillSpec(
        id=persona_id,
        name=f"{display} analysis",
        phase=Phase.COMPOSE,
        runner=RunnerKind.AGENT,
        needs=DISTILLED_NEEDS,
        produces=frozenset({"persona_view"}),
        body=body,
        owner_persona=persona_id,
    )


# ---------------------------------------------------------------------------
# a4: pack manifest


def default_pack_config(persona_id: str, name: str) -> dict:
    return {
        "title": "Distilled Analyst",
        "sector_hint": "",
        "voice": "",
        "default_template": f"{persona_id}-pitch",
        "workflows": [
            {
                "name": "Full Pitch",
                "template": f"{persona_id}-pitch",
                "base_template": "pitch-memo",
                "description": f"Full analysis in the style of {name}.",
            }
        ],
    }


def bundle(spec: SkillSpec, config: dict, templates=None) -> dict:
    """Step 4: package the spec with workflows and runtime config into an
    onboardable pack manifest."""
    workflows = config.get("workflows") or []
    if not workflows:
        raise ValidationError("pack config declares no workflows")
    if templates is not None:
        for workflow in workflows:
            template_id = workflow.get("template", "")
            if templates.has(template_id):
                continue
            base = workflow.get("base_template") or config.get("base_template")
            if base and templates.has(base):
                continue
            raise UnknownIdError(
                f"unknown-workflow-template: {template_id!r} is not registered "
                "and names no registered base_template"
            )
    default_template = config.get("default_template") or workflows[0]["template"]
    if default_template not in {w["template"] for w in workflows}:
        raise ValidationError(
            f"default_template {default_template!r} not among pack workflows"
        )
    return {
        "id": spec.id,
        "name": config.get("name", spec.name.removesuffix(" analysis")),
        "title": config.get("title", ""),
        "sector_hint": config.get("sector_hint", ""),
        "voice": config.get("voice", ""),
        "skills": [
            {
                "id": spec.id,
                "name": spec.name,
                "runner": spec.runner.value,
                "needs": sorted(spec.needs),
                "produces": sorted(spec.produces),
                "limits": dict(spec.limits),
                "body": spec.body,
            }
        ],
        "default_template": default_template,
        "workflows": [dict(w) for w in workflows],
        "config": dict(config.get("runtime", {})),
    }


def export_pack(manifest: dict, out_dir: Path | str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "pack.json"
    path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Pipeline driver


@dataclass
class DistillResult:
    material: StructuredMaterial
    document: PersonaDocument
    spec: SkillSpec
    manifest: dict
    artifacts: dict = field(default_factory=dict)  # step name -> artifact id
    provider_calls: int = 0


class DistillationPipeline:
    """Drives a0 through a4 against a store and a provider, leaving one
    artifact per step. Provider usage is counted on the instance."""

    def __init__(
        self,
        store,
        provider,
        *,
        persona_id: str,
        name: str | None = None,
        engagement_id: str | None = None,
        seed: int = 0,
        force_template_violation: bool = False,
    ) -> None:
        self.store = store
        self.provider = provider
        self.persona_id = persona_id
        self.name = name or persona_id
        self.engagement_id = engagement_id or f"distill-{persona_id}"
        self.seed = seed
        self.provider_calls = 0
        self.force_template_violation = force_template_violation

    def _append(self, category: str, payload, step: str, parents=()):
        return self.store.append(
            category,
            payload,
            engagement_id=self.engagement_id,
            producer_skill=f"distill_{step}",
            producer_task=f"{self.engagement_id}:{step}",
            parent_ids=tuple(parents),
        )

    # -- steps ---------------------------------------------------------

    def run_extract(self, corpus: SourceCorpus):
        material = extract(corpus)
        payload = material.to_dict()
        payload["corpus_digest"] = sha256_hex(
            canonical_json(
                [{"title": d.title, "kind": d.kind, "text": d.text} for d in corpus.documents]
            ).encode("utf-8")
        )
        artifact = self._append("distill_material", payload, "extract")
        return material, artifact

    def run_generate(self, material: StructuredMaterial, parent: str | None = None):
        prompt = render_generate_prompt(material, self.persona_id, self.name)
        if self.force_template_violation:
            prompt += f"\n{TEMPLATE_VIOLATION_MARKER}\n"
        last_missing: list[str] = []
        attempt_prompt = prompt
        for attempt in range(2):  # one shot plus one regeneration
            self.provider_calls += 1
            raw = self.provider.complete(
                system=GENERATE_SYSTEM,
                prompt=attempt_prompt,
                schema=PERSONA_PROFILE_SCHEMA,
                seed=self.seed,
            )
            try:
                data = json.loads(raw)
            except json.JSONDecodeError:
                data = {}
            last_missing = missing_fields(data if isinstance(data, dict) else {})
            if not last_missing:
                document = PersonaDocument.from_dict(data)
                artifact = self._append(
                    "distill_profile",
                    document.to_dict(),
                    "generate",
                    parents=(parent,) if parent else (),
                )
                return document, artifact
            attempt_prompt = (
                prompt
                + f"\n## Verifier feedback\nattempt {attempt + 1} rejected: "
                + f"missing template fields {', '.join(last_missing)}\n"
            )
        raise VerifierRejectedError(
            "template violation: persona document missing "
            + ", ".join(last_missing)
        )

    def run_specify(self, document: PersonaDocument, parent: str | None = None):
        spec = specify(document, self.persona_id, self.name)
        violations = validate_spec(spec)
        if violations:
            raise ValidationError(f"distilled spec invalid: {'; '.join(violations)}")
        artifact = self._append(
            "distill_spec", spec.to_dict(), "specify", parents=(parent,) if parent else ()
        )
        return spec, artifact

    def run_bundle(self, spec: SkillSpec, config: dict | None = None, templates=None, parent: str | None = None):
        merged = default_pack_config(self.persona_id, self.name)
        merged.update(config or {})
        manifest = bundle(spec, merged, templates=templates)
        artifact = self._append(
            "distill_pack", manifest, "bundle", parents=(parent,) if parent else ()
        )
        return manifest, artifact

    def distill(self, corpus: SourceCorpus, config: dict | None = None, templates=None) -> DistillResult:
        material, a1 = self.run_extract(corpus)
        document, a2 = self.run_generate(material, parent=a1.id)
        spec, a3 = self.run_specify(document, parent=a2.id)
        manifest, a4 = self.run_bundle(spec, config, templates=templates, parent=a3.id)
        return DistillResult(
            material=material,
            document=document,
            spec=spec,
            manifest=manifest,
            artifacts={"extract": a1.id, "generate": a2.id, "specify": a3.id, "bundle": a4.id},
            provider_calls=self.provider_calls,
        )
