"""Workflow data model, ingestion, and corpus/query persistence.

Workflows come from three sources: a public workflow API, a training-material
repository checkout (topic folders with ``.ga`` files and ``data-library.yml``
descriptions), and plain local ``.ga`` files. A corpus is an immutable,
id-indexed collection serialized to a single JSON file; benchmark queries are
serialized as JSON Lines.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator

import requests
import yaml

from .errors import (
    DuplicateIdError,
    IngestIoError,
    MalformedGaError,
    NetworkError,
    SchemaError,
)

logger = logging.getLogger(__name__)

SOURCES = ("published_api", "training_repo", "local_file")


@dataclass(frozen=True)
class Workflow:
    """One workflow's metadata; ``tools`` is deduplicated and order-preserving."""

    id: str
    title: str = ""
    description: str = ""
    tools: tuple[str, ...] = ()
    topic: str | None = None
    source: str = "local_file"
    ga_path: str | None = None

    def __post_init__(self):
        if not self.id:
            raise SchemaError("workflow id must be non-empty")
        if self.source not in SOURCES:
            raise SchemaError(f"unknown source {self.source!r}")
        deduped = _dedup_tools(self.tools)
        if deduped != tuple(self.tools):
            object.__setattr__(self, "tools", deduped)


def _dedup_tools(tools: Iterable[str]) -> tuple[str, ...]:
    seen: set[str] = set()
    out: list[str] = []
    for tool in tools:
        if tool and tool not in seen:
            seen.add(tool)
            out.append(tool)
    return tuple(out)


class Corpus:
    """Ordered, id-indexed collection of workflows. Immutable once built."""

    def __init__(self, workflows: Iterable[Workflow]):
        self.workflows: list[Workflow] = list(workflows)
        self.index: dict[str, int] = {}
        for pos, wf in enumerate(self.workflows):
            if wf.id in self.index:
                raise DuplicateIdError(f"duplicate workflow id {wf.id!r}")
            self.index[wf.id] = pos

    def __len__(self) -> int:
        return len(self.workflows)

    def __iter__(self) -> Iterator[Workflow]:
        return iter(self.workflows)

    def __contains__(self, workflow_id: str) -> bool:
        return workflow_id in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Corpus) and self.workflows == other.workflows

    def get(self, workflow_id: str) -> Workflow:
        return self.workflows[self.index[workflow_id]]

    def ids(self) -> list[str]:
        return [wf.id for wf in self.workflows]


@dataclass
class QueryRecord:
    """A benchmark query with its seed and gold workflow-id sets."""

    query_id: str
    text: str
    topic: str | None = None
    seed_ids: set[str] = field(default_factory=set)
    gold_workflow_ids: set[str] = field(default_factory=set)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.query_id:
            raise SchemaError("query_id must be non-empty")
        if not self.text:
            raise SchemaError(f"query {self.query_id!r} has empty text")
        if not self.seed_ids <= self.gold_workflow_ids:
            raise SchemaError(
                f"query {self.query_id!r}: seed_ids must be a subset of gold_workflow_ids"
            )


@dataclass(frozen=True)
class WorkflowDraft:
    """Fields extracted from a single ``.ga`` file."""

    title: str
    description: str
    tools: tuple[str, ...]


def parse_ga(raw: bytes) -> WorkflowDraft:
    """Extract (title, description, tools) from raw ``.ga`` file content.

    Total over arbitrary bytes: returns a draft or raises MalformedGaError.
    Tool ids are taken from the "steps" map in ascending numeric-key order,
    skipping missing/null entries and deduplicating.
    """
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedGaError(f"not UTF-8 JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedGaError("top level is not a JSON object")
    steps = doc.get("steps")
    if not isinstance(steps, dict):
        raise MalformedGaError('"steps" is not a map')

    title = doc.get("name")
    description = doc.get("annotation")
    tools: list[str] = []
    for key in sorted(steps, key=_step_order):
        step = steps[key]
        tool_id = step.get("tool_id") if isinstance(step, dict) else None
        if isinstance(tool_id, str) and tool_id:
            tools.append(tool_id)
    return WorkflowDraft(
        title=title if isinstance(title, str) else "",
        description=description if isinstance(description, str) else "",
        tools=_dedup_tools(tools),
    )


def _step_order(key: str) -> tuple[int, int, str]:
    # numeric keys first in numeric order, anything else after, lexically
    text = str(key)
    try:
        return (0, int(text), "")
    except ValueError:
        return (1, 0, text)


def fetch_published(
    api_base: str,
    page_limit: int = 10,
    page_size: int = 100,
    timeout_s: float = 30.0,
) -> list[Workflow]:
    """Fetch published workflows from a Galaxy-style API, page by page.

    Stops after ``page_limit`` pages or once a page comes back short/empty.
    """
    base = api_base.rstrip("/")
    out: list[Workflow] = []
    for page in range(page_limit):
        url = f"{base}/api/workflows"
        params = {
            "show_published": "True",
            "limit": str(page_size),
            "offset": str(page * page_size),
        }
        try:
            resp = requests.get(url, params=params, timeout=timeout_s)
        except requests.RequestException as exc:
            raise NetworkError(f"GET {url} failed: {exc}") from exc
        if resp.status_code >= 400:
            raise NetworkError(f"GET {url} returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise SchemaError(f"response is not JSON: {exc}") from exc
        if not isinstance(payload, list):
            raise SchemaError("response is not a JSON array")
        for entry in payload:
            if not isinstance(entry, dict) or "id" not in entry:
                raise SchemaError("array entry without an id")
            wf_id = str(entry["id"])
            out.append(
                Workflow(
                    id=wf_id,
                    title=str(entry.get("name") or ""),
                    description=str(entry.get("annotation") or ""),
                    source="published_api",
                    ga_path=f"{base}/api/workflows/{wf_id}/download",
                )
            )
        if len(payload) < page_size:
            break
    return out


def ingest_training_dir(root: str | Path) -> list[Workflow]:
    """Build workflows from a training-repo checkout.

    One workflow per ``.ga`` file; the top-level folder name becomes the
    topic, the relative path becomes the id, and the description comes from
    the nearest ``data-library.yml``. Corrupt ``.ga`` files are skipped and
    counted, not fatal.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestIoError(f"not a readable directory: {root}")
    workflows: list[Workflow] = []
    skipped = 0
    for ga_file in sorted(root.rglob("*.ga")):
        rel = ga_file.relative_to(root)
        try:
            draft = parse_ga(ga_file.read_bytes())
        except MalformedGaError as exc:
            skipped += 1
            logger.warning("skipping %s: %s", rel, exc)
            continue
        except OSError as exc:
            skipped += 1
            logger.warning("skipping %s: unreadable (%s)", rel, exc)
            continue
        topic = rel.parts[0] if len(rel.parts) > 1 else None
        description = draft.description or _tutorial_description(ga_file.parent, root)
        workflows.append(
            Workflow(
                id=rel.as_posix(),
                title=draft.title,
                description=description,
                tools=draft.tools,
                topic=topic,
                source="training_repo",
                ga_path=str(ga_file),
            )
        )
    if skipped:
        logger.info("ingest skipped %d malformed .ga file(s)", skipped)
    return workflows


def _tutorial_description(start: Path, root: Path) -> str:
    """Find the tutorial description in the nearest data-library.yml."""
    current = start
    while True:
        lib = current / "data-library.yml"
        if lib.is_file():
            try:
                doc = yaml.safe_load(lib.read_text(encoding="utf-8"))
            except (yaml.YAMLError, OSError, UnicodeDecodeError):
                doc = None
            found = _first_description(doc)
            if found:
                return found
        if current == root or current.parent == current:
            return ""
        current = current.parent


def _first_description(node: Any) -> str:
    """Depth-first search for a "description" string, skipping the library header."""
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "destination":
                continue
            if key == "description" and isinstance(value, str) and value.strip():
                return value.strip()
        for key, value in node.items():
            if key == "destination":
                continue
            found = _first_description(value)
            if found:
                return found
    elif isinstance(node, list):
        for item in node:
            found = _first_description(item)
            if found:
                return found
    return ""


def corpus_to_json(corpus: Corpus) -> dict[str, Any]:
    return {
        "workflows": [
            {
                "id": wf.id,
                "title": wf.title,
                "description": wf.description,
                "tools": list(wf.tools),
                "topic": wf.topic,
                "source": wf.source,
                "ga_path": wf.ga_path,
            }
            for wf in corpus
        ]
    }


def corpus_from_json(doc: Any) -> Corpus:
    if not isinstance(doc, dict) or not isinstance(doc.get("workflows"), list):
        raise SchemaError('corpus file must be an object with a "workflows" array')
    workflows = []
    for entry in doc["workflows"]:
        if not isinstance(entry, dict):
            raise SchemaError("workflow entry is not an object")
        if "id" not in entry or not isinstance(entry["id"], str) or not entry["id"]:
            raise SchemaError('workflow entry missing required "id"')
        tools = entry.get("tools", [])
        if not isinstance(tools, list) or any(not isinstance(t, str) for t in tools):
            raise SchemaError(f'workflow {entry["id"]!r}: "tools" must be a list of strings')
        try:
            workflows.append(
                Workflow(
                    id=entry["id"],
                    title=str(entry.get("title") or ""),
                    description=str(entry.get("description") or ""),
                    tools=tuple(tools),
                    topic=entry.get("topic"),
                    source=str(entry.get("source") or "local_file"),
                    ga_path=entry.get("ga_path"),
                )
            )
        except SchemaError:
            raise
    return Corpus(workflows)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(
            json.dumps(corpus_to_json(corpus), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IngestIoError(f"cannot write {path}: {exc}") from exc


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestIoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return corpus_from_json(doc)


def query_to_json(record: QueryRecord) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "query_id": record.query_id,
        "text": record.text,
        "topic": record.topic,
        "seed_ids": sorted(record.seed_ids),
        "gold_workflow_ids": sorted(record.gold_workflow_ids),
    }
    if record.provenance:
        doc["provenance"] = record.provenance
    return doc


def query_from_json(doc: Any) -> QueryRecord:
    if not isinstance(doc, dict):
        raise SchemaError("query record is not an object")
    for key in ("query_id", "text"):
        if not isinstance(doc.get(key), str) or not doc[key]:
            raise SchemaError(f'query record missing required "{key}"')
    seeds = doc.get("seed_ids", [])
    gold = doc.get("gold_workflow_ids", [])
    if not isinstance(seeds, list) or not isinstance(gold, list):
        raise SchemaError("seed_ids and gold_workflow_ids must be arrays")
    provenance = doc.get("provenance")
    return QueryRecord(
        query_id=doc["query_id"],
        text=doc["text"],
        topic=doc.get("topic"),
        seed_ids={str(s) for s in seeds},
        gold_workflow_ids={str(g) for g in gold},
        provenance=provenance if isinstance(provenance, dict) else {},
    )


def save_queries(
    records: Iterable[QueryRecord],
    path: str | Path,
    meta: dict[str, Any] | None = None,
) -> None:
    """Write queries as JSON Lines; an optional leading ``_meta`` record
    carries pipeline provenance (thresholds, mode, seed)."""
    lines = []
    if meta is not None:
        lines.append(json.dumps({"_meta": meta}, sort_keys=True))
    lines.extend(json.dumps(query_to_json(r), sort_keys=True) for r in records)
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IngestIoError(f"cannot write {path}: {exc}") from exc


def load_queries(path: str | Path) -> list[QueryRecord]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestIoError(f"cannot read {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if isinstance(doc, dict) and "_meta" in doc:
            continue
        records.append(query_from_json(doc))
    return records
