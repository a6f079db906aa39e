"""JSONL readers and writers for documents and gold annotations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import ParseError, SpanError
from .matcher import Document


@dataclass(frozen=True)
class GoldAnnotation:
    doc_id: str
    start: int
    end: int
    cui: str

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.end)

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "start": self.start, "end": self.end, "cui": self.cui}


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", path, lineno)
            yield lineno, obj


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")


def read_documents(path: str | Path) -> list[Document]:
    """Read ``{"id", "text"}`` records; ids must be unique."""
    docs = []
    seen = set()
    for lineno, obj in iter_jsonl(path):
        try:
            doc = Document(str(obj["id"]), obj["text"])
        except KeyError as exc:
            raise ParseError(f"missing field {exc}", path, lineno) from None
        if not doc.id:
            raise ParseError("empty document id", path, lineno)
        if doc.id in seen:
            raise ParseError(f"duplicate document id {doc.id!r}", path, lineno)
        seen.add(doc.id)
        docs.append(doc)
    return docs


def read_gold(path: str | Path, docs: Mapping[str, Document] | None = None) -> list[GoldAnnotation]:
    """Read ``{"doc_id", "start", "end", "cui"}`` records.

    Spans are validated against ``docs`` when given; duplicate spans are rejected.
    """
    out = []
    seen = set()
    for lineno, obj in iter_jsonl(path):
        try:
            g = GoldAnnotation(obj["doc_id"], int(obj["start"]), int(obj["end"]), obj["cui"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad gold record: {exc}", path, lineno) from None
        if g.key in seen:
            raise ParseError(f"duplicate gold span {g.key}", path, lineno)
        seen.add(g.key)
        if g.start < 0 or g.end <= g.start:
            raise SpanError(g.doc_id, g.start, g.end)
        if docs is not None:
            doc = docs.get(g.doc_id)
            if doc is None or g.end > len(doc.text):
                raise SpanError(g.doc_id, g.start, g.end, "outside document")
        out.append(g)
    return out


def sort_gold(golds: Iterable[GoldAnnotation]) -> list[GoldAnnotation]:
    return sorted(golds, key=lambda g: (g.doc_id, g.start, g.end, g.cui))
