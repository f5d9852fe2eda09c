"""Artifact category vocabulary.

Categories are the typed payloads that flow along graph edges. The canonical
set below covers the built-in pipeline; additional categories may be
registered at runtime (unknown ones are legal in skill contracts but logged).
"""

from __future__ import annotations

import logging
import re

log = logging.getLogger(__name__)

CATEGORY_PATTERN = re.compile(r"^[a-z][a-z0-9_]*$")

# The canonical vocabulary shipped with the engine.
CANONICAL_CATEGORIES = frozenset(
    {
        "coverage_brief",
        "filings",
        "market_snapshot",
        "news",
        "transcripts",
        "segments",
        "kpis",
        "gate_report",
        "persona_view",
        "memo",
        "graph_facts",
    }
)

# Categories a consumer may declare without requiring a producer; when no
# producer exists the resolved input is simply empty.
OPTIONAL_CATEGORIES = frozenset({"news", "transcripts"})

# Extensions used by the engine itself (registered up front so they do not
# trip the unknown-category warning). The distill_* set carries the persona
# distillation chain; each pipeline step is an inspectable store artifact.
ENGINE_CATEGORIES = frozenset(
    {
        "brief_assessment",
        "edgar_raw",
        "distill_material",
        "distill_profile",
        "distill_spec",
        "distill_pack",
    }
)


def is_valid_category(category: str) -> bool:
    return bool(CATEGORY_PATTERN.match(category))


class CategoryVocabulary:
    """Mutable view of known categories: canonical set plus registrations."""

    def __init__(self) -> None:
        self._known = set(CANONICAL_CATEGORIES) | set(ENGINE_CATEGORIES)

    def register(self, category: str) -> None:
        if not is_valid_category(category):
            raise ValueError(f"invalid category id: {category!r}")
        self._known.add(category)

    def known(self) -> frozenset[str]:
        return frozenset(self._known)

    def check(self, category: str, context: str = "") -> None:
        """Validate shape and warn (once per category) when unknown."""
        if not is_valid_category(category):
            raise ValueError(f"invalid category id: {category!r}")
        if category not in self._known:
            where = f" in {context}" if context else ""
            log.warning("unknown category %r%s; treating as extension", category, where)
            self._known.add(category)
