"""Content-addressed, append-only evidence store.

Every piece of fetched or produced research material is an Artifact: an
immutable record whose id is the SHA-256 of its canonical serialization
(identity metadata, then payload bytes). Identity covers category, producing
skill, parent ids, and the payload itself; it deliberately excludes
engagement id, task id, wall-clock time, and storage placement so that
seeded re-runs reproduce identical ids and appending the same content twice
is a no-op.

On disk the store is a directory:

    store/index.ndjson            one metadata record per line, append-only
    store/objects/<first2>/<hash> payload files for large or binary content

Small text and all structured payloads are inlined in the index so the
ledger stays greppable with standard tools.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DanglingParentError, UnknownIdError, ValidationError
from .util import canonical_bytes, sha256_hex, utc_now_iso

# Text payloads larger than this move to an object file and are recorded as
# binary_ref; identity is unaffected because only payload bytes are hashed.
TEXT_INLINE_LIMIT = 8192

PAYLOAD_KINDS = ("text", "structured", "binary_ref")

INDEX_FIELDS = (
    "id",
    "category",
    "engagement_id",
    "producer_skill",
    "producer_task",
    "parent_ids",
    "created_at",
    "payload",
    "payload_kind",
)


@dataclass(frozen=True)
class Artifact:
    """One immutable evidence record.

    After a get() the payload is materialized: inline text/structured stays
    as written, binary_ref payloads are loaded as bytes.
    """

    id: str
    category: str
    engagement_id: str
    producer_skill: str
    producer_task: str
    parent_ids: tuple[str, ...]
    created_at: str
    payload: object
    payload_kind: str

    def text(self) -> str:
        if isinstance(self.payload, bytes):
            return self.payload.decode("utf-8")
        if isinstance(self.payload, str):
            return self.payload
        return canonical_bytes(self.payload).decode("utf-8")

    def data(self):
        """Parse the payload as a JSON value."""
        if isinstance(self.payload, (dict, list)):
            return self.payload
        return json.loads(self.text())

    def ticker(self) -> str | None:
        """Best-effort ticker attribution, used by query filters."""
        if isinstance(self.payload, dict):
            value = self.payload.get("ticker")
            return value if isinstance(value, str) else None
        try:
            text = self.text()
        except Exception:
            return None
        for line in text.splitlines()[:12]:
            stripped = line.strip()
            if stripped.lower().startswith("ticker:"):
                return stripped.split(":", 1)[1].strip() or None
        return None


def payload_bytes_for(payload, payload_kind: str) -> bytes:
    if payload_kind == "text":
        return payload.encode("utf-8")
    if payload_kind == "structured":
        return canonical_bytes(payload)
    return payload


def compute_artifact_id(category: str, producer_skill: str, parent_ids, payload: bytes) -> str:
    header = canonical_bytes(
        {
            "category": category,
            "parent_ids": list(parent_ids),
            "producer_skill": producer_skill,
        }
    )
    return sha256_hex(header + b"\n" + payload)


@dataclass
class IntegrityReport:
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class EvidenceStore:
    """Append-only artifact ledger rooted at a directory."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self.index_path = self.root / "index.ndjson"
        self.objects_dir = self.root / "objects"
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        self._order: list[str] = []
        self._load()

    def _load(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.objects_dir.mkdir(exist_ok=True)
        if not self.index_path.exists():
            self.index_path.touch()
            return
        with self.index_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._records[record["id"]] = record
                self._order.append(record["id"])

    # ------------------------------------------------------------------
    # Writing

    def append(
        self,
        category: str,
        payload,
        *,
        engagement_id: str,
        producer_skill: str,
        producer_task: str = "",
        parent_ids: Iterable[str] = (),
        payload_kind: str | None = None,
        created_at: str | None = None,
    ) -> Artifact:
        """Append one artifact; returns the stored record.

        Idempotent: if the computed id already exists the existing artifact
        is returned and the store is unchanged. Parents must already exist.
        """
        parent_ids = tuple(parent_ids)
        if payload_kind is None:
            payload_kind = self._infer_kind(payload)
        if payload_kind not in PAYLOAD_KINDS:
            raise ValidationError(f"bad payload_kind: {payload_kind}")
        raw = payload_bytes_for(payload, payload_kind)
        artifact_id = compute_artifact_id(category, producer_skill, parent_ids, raw)

        with self._lock:
            existing = self._records.get(artifact_id)
            if existing is not None:
                return self._materialize(existing)
            for parent in parent_ids:
                if parent not in self._records:
                    raise DanglingParentError(
                        f"parent {parent} not in store (artifact category={category})"
                    )
            stored_payload, stored_kind = self._place_payload(artifact_id, payload, payload_kind, raw)
            record = {
                "id": artifact_id,
                "category": category,
                "engagement_id": engagement_id,
                "producer_skill": producer_skill,
                "producer_task": producer_task,
                "parent_ids": list(parent_ids),
                "created_at": created_at or utc_now_iso(),
                "payload": stored_payload,
                "payload_kind": stored_kind,
            }
            with self.index_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            self._records[artifact_id] = record
            self._order.append(artifact_id)
            return self._materialize(record)

    @staticmethod
    def _infer_kind(payload) -> str:
        if isinstance(payload, str):
            return "text"
        if isinstance(payload, (dict, list)):
            return "structured"
        if isinstance(payload, bytes):
            return "binary_ref"
        raise ValidationError(f"unsupported payload type: {type(payload).__name__}")

    def _place_payload(self, artifact_id: str, payload, payload_kind: str, raw: bytes):
        """Decide inline vs object-file storage; returns (payload, kind) for the index."""
        if payload_kind == "structured":
            return payload, "structured"
        if payload_kind == "text" and len(raw) <= TEXT_INLINE_LIMIT:
            return payload, "text"
        rel = f"objects/{artifact_id[:2]}/{artifact_id}"
        target = self.root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if not target.exists():
            target.write_bytes(raw)
        return rel, "binary_ref"

    # ------------------------------------------------------------------
    # Reading

    def _materialize(self, record: dict) -> Artifact:
        payload = record["payload"]
        if record["payload_kind"] == "binary_ref":
            payload = (self.root / record["payload"]).read_bytes()
        return Artifact(
            id=record["id"],
            category=record["category"],
            engagement_id=record["engagement_id"],
            producer_skill=record["producer_skill"],
            producer_task=record["producer_task"],
            parent_ids=tuple(record["parent_ids"]),
            created_at=record["created_at"],
            payload=payload,
            payload_kind=record["payload_kind"],
        )

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._records

    def __len__(self) -> int:
        return len(self._order)

    def get(self, artifact_id: str) -> Artifact:
        record = self._records.get(artifact_id)
        if record is None:
            raise UnknownIdError(f"no artifact {artifact_id}")
        return self._materialize(record)

    def iter_artifacts(self) -> Iterator[Artifact]:
        """All artifacts in append order."""
        for artifact_id in list(self._order):
            yield self._materialize(self._records[artifact_id])

    def query(
        self,
        category: str | None = None,
        ticker: str | None = None,
        engagement_id: str | None = None,
        producer_skill: str | None = None,
    ) -> list[Artifact]:
        """Conjunctive filter; newest first, id ascending on ties."""
        out = []
        for artifact_id in self._order:
            record = self._records[artifact_id]
            if category is not None and record["category"] != category:
                continue
            if engagement_id is not None and record["engagement_id"] != engagement_id:
                continue
            if producer_skill is not None and record["producer_skill"] != producer_skill:
                continue
            artifact = self._materialize(record)
            if ticker is not None and artifact.ticker() != ticker:
                continue
            out.append(artifact)
        out.sort(key=lambda a: a.id)
        out.sort(key=lambda a: a.created_at, reverse=True)
        return out

    def lineage(self, artifact_id: str) -> list[Artifact]:
        """Transitive parent closure, nearest ancestors first.

        Breadth-first over parent_ids in recorded order; each ancestor
        appears once, at its first (shallowest) encounter.
        """
        start = self.get(artifact_id)
        seen: set[str] = set()
        frontier = list(start.parent_ids)
        out: list[Artifact] = []
        while frontier:
            next_frontier: list[str] = []
            for pid in frontier:
                if pid in seen:
                    continue
                seen.add(pid)
                parent = self.get(pid)
                out.append(parent)
                next_frontier.extend(parent.parent_ids)
            frontier = next_frontier
        return out

    # ------------------------------------------------------------------
    # Verification

    def verify_integrity(self) -> IntegrityReport:
        """Re-hash every artifact and re-check parent resolution."""
        report = IntegrityReport()
        seen: set[str] = set()
        if not self.index_path.exists():
            return report
        with self.index_path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                report.checked += 1
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    report.failures.append((f"line {line_no}", "corrupt-index"))
                    continue
                missing = [f for f in INDEX_FIELDS if f not in record]
                if missing:
                    report.failures.append((record.get("id", f"line {line_no}"), "missing-fields"))
                    continue
                try:
                    raw = self._payload_bytes(record)
                except FileNotFoundError:
                    report.failures.append((record["id"], "missing-object"))
                    continue
                computed = compute_artifact_id(
                    record["category"], record["producer_skill"], record["parent_ids"], raw
                )
                if computed != record["id"]:
                    report.failures.append((record["id"], "hash-mismatch"))
                for parent in record["parent_ids"]:
                    if parent not in seen:
                        report.failures.append((record["id"], f"dangling-parent:{parent}"))
                seen.add(record["id"])
        return report

    def _payload_bytes(self, record: dict) -> bytes:
        if record["payload_kind"] == "binary_ref":
            return (self.root / record["payload"]).read_bytes()
        return payload_bytes_for(record["payload"], record["payload_kind"])
