"""Stateless research graph rebuilt from graph_facts artifacts.

Nothing here holds state between calls: every query rebuilds (or accepts a
freshly rebuilt) graph from the evidence store, so the graph is always
exactly as current as the store. Personas never touch this module; it is
the cross-persona query substrate for the person running the pod.

Node kinds: ticker, memo, analyst, theme. Edge kinds: wrote (analyst to
memo), covers (memo to ticker), explores (memo to theme), cites (memo to
memo). Theme identity is the normalized lowercase snake key; the display
string from the first memo that used it is kept as an attribute.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import UnknownIdError
from .util import canonical_json

NODE_KINDS = ("ticker", "memo", "analyst", "theme")
EDGE_KINDS = ("wrote", "covers", "explores", "cites")

# Edge kind -> (from-node kind, to-node kind); every edge must conform.
EDGE_ENDPOINTS = {
    "wrote": ("analyst", "memo"),
    "covers": ("memo", "ticker"),
    "explores": ("memo", "theme"),
    "cites": ("memo", "memo"),
}


def normalize_theme(theme: str) -> str:
    """Lowercase snake_case so Rate Sensitivity and rate-sensitivity merge."""
    return re.sub(r"[^a-z0-9]+", "_", theme.strip().lower()).strip("_")


@dataclass(frozen=True)
class Node:
    kind: str
    key: str


@dataclass
class ResearchGraph:
    built_from: str = ""
    nodes: dict = field(default_factory=dict)  # Node -> attributes dict
    edges: set = field(default_factory=set)  # (kind, from_key, to_key)
    warnings: list = field(default_factory=list)

    # -- construction --------------------------------------------------

    def add_node(self, kind: str, key: str, **attributes) -> Node:
        node = Node(kind, key)
        current = self.nodes.setdefault(node, {})
        for name, value in attributes.items():
            current.setdefault(name, value)
        return node

    def add_edge(self, kind: str, from_key: str, to_key: str) -> None:
        from_kind, to_kind = EDGE_ENDPOINTS[kind]
        if Node(from_kind, from_key) not in self.nodes or Node(to_kind, to_key) not in self.nodes:
            raise ValueError(f"dangling {kind} edge {from_key} -> {to_key}")
        self.edges.add((kind, from_key, to_key))

    # -- views ---------------------------------------------------------

    def nodes_of(self, kind: str) -> list[Node]:
        return sorted((n for n in self.nodes if n.kind == kind), key=lambda n: n.key)

    def counts(self) -> dict:
        out = {kind: 0 for kind in NODE_KINDS}
        for node in self.nodes:
            out[node.kind] += 1
        out["edges"] = len(self.edges)
        return out

    def edges_of(self, kind: str, from_key: str | None = None, to_key: str | None = None):
        return sorted(
            (e for e in self.edges
             if e[0] == kind
             and (from_key is None or e[1] == from_key)
             and (to_key is None or e[2] == to_key))
        )

    def to_export(self) -> dict:
        nodes = [
            {"kind": node.kind, "key": node.key, "attributes": dict(sorted(attrs.items()))}
            for node, attrs in sorted(self.nodes.items(), key=lambda kv: (kv[0].kind, kv[0].key))
        ]
        edges = [
            {"kind": kind, "from": from_key, "to": to_key}
            for kind, from_key, to_key in sorted(self.edges)
        ]
        return {"built_from": self.built_from, "nodes": nodes, "edges": edges}

    def to_canonical_json(self) -> str:
        return canonical_json(self.to_export())


def rebuild(store) -> ResearchGraph:
    """Derive the graph from every graph_facts artifact in the store.

    Deterministic: facts are processed in artifact-id order and the export
    is canonically sorted, so identical stores serialize identically.
    """
    graph = ResearchGraph(built_from=f"index:{len(store)}")
    facts_artifacts = sorted(
        (a for a in store.iter_artifacts() if a.category == "graph_facts"),
        key=lambda a: a.id,
    )
    facts_by_memo: dict[str, dict] = {}
    for artifact in facts_artifacts:
        payload = artifact.data()
        memo_id = payload.get("memo")
        if not isinstance(memo_id, str) or not memo_id:
            graph.warnings.append(f"facts {artifact.id[:12]} carry no memo id")
            continue
        # First fact wins; identical re-runs dedupe to the same artifact id
        # anyway, so collisions only happen when facts logic changed.
        facts_by_memo.setdefault(memo_id, payload)

    for memo_id in sorted(facts_by_memo):
        payload = facts_by_memo[memo_id]
        if memo_id not in store:
            graph.warnings.append(f"facts reference unknown memo {memo_id[:12]}")
        ticker = payload.get("ticker", "")
        persona = payload.get("persona", "")
        graph.add_node(
            "memo",
            memo_id,
            ticker=ticker,
            persona=persona,
            timestamp=payload.get("timestamp", ""),
            verdict=payload.get("verdict"),
        )
        if ticker:
            graph.add_node("ticker", ticker)
            graph.add_edge("covers", memo_id, ticker)
        if persona:
            graph.add_node("analyst", persona)
            graph.add_edge("wrote", persona, memo_id)
        for theme in payload.get("themes", []):
            key = normalize_theme(theme)
            if not key:
                continue
            graph.add_node("theme", key, display=theme)
            graph.add_edge("explores", memo_id, key)

    # Cites second pass: targets need memo nodes. A cited memo without its
    # own facts still gets a stub node when the artifact exists.
    for memo_id in sorted(facts_by_memo):
        for cited in facts_by_memo[memo_id].get("cites", []):
            if Node("memo", cited) in graph.nodes:
                graph.add_edge("cites", memo_id, cited)
            elif cited in store:
                cited_artifact = store.get(cited)
                graph.add_node("memo", cited, ticker=cited_artifact.ticker() or "")
                graph.add_edge("cites", memo_id, cited)
            else:
                graph.warnings.append(
                    f"memo {memo_id[:12]} cites unknown artifact {cited[:12]}"
                )
    return graph


# ---------------------------------------------------------------------------
# Queries


def gap_report(graph: ResearchGraph) -> list[dict]:
    """Tickers covered by at most one distinct persona, with that set."""
    coverage: dict[str, set[str]] = {n.key: set() for n in graph.nodes_of("ticker")}
    for _, memo_id, ticker in graph.edges_of("covers"):
        persona = graph.nodes.get(Node("memo", memo_id), {}).get("persona")
        if persona:
            coverage[ticker].add(persona)
    return [
        {"ticker": ticker, "personas": sorted(personas)}
        for ticker, personas in sorted(coverage.items())
        if len(personas) <= 1
    ]


def theme_view(graph: ResearchGraph, theme_key: str) -> dict:
    """Everything reachable from one theme via explores."""
    key = normalize_theme(theme_key)
    node = Node("theme", key)
    if node not in graph.nodes:
        raise UnknownIdError(f"no theme {theme_key!r}")
    memo_ids = sorted(e[1] for e in graph.edges_of("explores", to_key=key))
    tickers: set[str] = set()
    analysts: set[str] = set()
    memos = []
    for memo_id in memo_ids:
        attrs = graph.nodes.get(Node("memo", memo_id), {})
        memos.append({"memo": memo_id, **{k: attrs.get(k) for k in ("ticker", "persona", "timestamp", "verdict")}})
        if attrs.get("ticker"):
            tickers.add(attrs["ticker"])
        if attrs.get("persona"):
            analysts.add(attrs["persona"])
    return {
        "theme": key,
        "display": graph.nodes[node].get("display", key),
        "memos": memos,
        "tickers": sorted(tickers),
        "analysts": sorted(analysts),
    }


def compare_views(graph: ResearchGraph, ticker: str) -> list[dict]:
    """Per-persona rows for one ticker, newest first."""
    if Node("ticker", ticker) not in graph.nodes:
        raise UnknownIdError(f"no ticker {ticker!r} in graph")
    rows = []
    for _, memo_id, _ in graph.edges_of("covers", to_key=ticker):
        attrs = graph.nodes.get(Node("memo", memo_id), {})
        rows.append(
            {
                "persona": attrs.get("persona", ""),
                "memo": memo_id,
                "verdict": attrs.get("verdict"),
                "created_at": attrs.get("timestamp", ""),
            }
        )
    rows.sort(key=lambda r: (r["created_at"], r["memo"]))
    rows.reverse()
    return rows


def provenance_chain(store, memo_id: str) -> list[dict]:
    """The memo's lineage closure, nearest ancestors first, with categories."""
    if memo_id not in store:
        raise UnknownIdError(f"no artifact {memo_id}")
    chain = []
    for artifact in store.lineage(memo_id):
        chain.append(
            {
                "id": artifact.id,
                "category": artifact.category,
                "producer_skill": artifact.producer_skill,
            }
        )
    return chain


def verify_edge_typing(graph: ResearchGraph) -> list[str]:
    """Defensive check used by tests: every edge endpoint matches its kind."""
    problems = []
    for kind, from_key, to_key in sorted(graph.edges):
        from_kind, to_kind = EDGE_ENDPOINTS[kind]
        if Node(from_kind, from_key) not in graph.nodes:
            problems.append(f"{kind} edge from missing {from_kind} {from_key}")
        if Node(to_kind, to_key) not in graph.nodes:
            problems.append(f"{kind} edge to missing {to_kind} {to_key}")
    return problems
