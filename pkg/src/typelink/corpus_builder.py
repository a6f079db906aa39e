"""Silver-standard corpus construction.

Two builders: distant supervision from document-level headings (a detected
mention is linked only if it equals a heading name) and link mapping through
a page-key crosswalk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .annotations import GoldAnnotation, iter_jsonl
from .errors import EmptyOverlap, InjectivityError, ParseError
from .lexicon import Lexicon, norm_key
from .matcher import AliasMatcher, Document, detect_and_generate
from .metrics import exact_matches

log = logging.getLogger(__name__)

DISTANT = "distant"
CROSSWALK = "crosswalk"


@dataclass(frozen=True)
class Heading:
    name: str
    cui: str


@dataclass(frozen=True)
class HeadedDocument:
    id: str
    text: str
    headings: tuple[Heading, ...] = ()


@dataclass(frozen=True)
class LinkSpan:
    start: int
    end: int
    page_key: str


@dataclass(frozen=True)
class LinkedDocument:
    id: str
    text: str
    links: tuple[LinkSpan, ...] = ()


@dataclass(frozen=True)
class SilverAnnotation:
    doc_id: str
    start: int
    end: int
    cui: str
    provenance: str
    fine_types: tuple[str, ...] = ()
    untyped: bool = False

    @property
    def key(self):
        return (self.doc_id, self.start, self.end)

    def as_gold(self) -> GoldAnnotation:
        return GoldAnnotation(self.doc_id, self.start, self.end, self.cui)

    def to_json(self) -> dict:
        rec = {"doc_id": self.doc_id, "start": self.start, "end": self.end, "cui": self.cui,
               "provenance": self.provenance}
        if self.provenance == CROSSWALK:
            rec["fine_types"] = list(self.fine_types)
            if self.untyped:
                rec["untyped"] = True
        return rec


@dataclass
class SilverCorpus:
    annotations: list[SilverAnnotation]
    dropped: int = 0
    warnings: list[str] = field(default_factory=list)

    def gold(self) -> list[GoldAnnotation]:
        return [a.as_gold() for a in self.annotations]


def _finish(anns: list[SilverAnnotation]) -> list[SilverAnnotation]:
    uniq = {(a.doc_id, a.start, a.end, a.cui): a for a in anns}
    return [uniq[k] for k in sorted(uniq)]


def _warn(corpus: SilverCorpus, msg: str) -> None:
    log.warning(msg)
    corpus.warnings.append(msg)


def distant_supervise(docs: Sequence[HeadedDocument], lexicon: Lexicon, exact: str = "normalized",
                      **matcher_kw) -> SilverCorpus:
    """Link detected mentions that equal one of their document's heading names.

    Args:
        docs: documents with (name, cui) headings.
        lexicon: concept inventory used both for detection and heading checks.
        exact: ``"normalized"`` compares normalized token sequences; ``"raw"``
            requires the surface to equal the heading name character for character.
        **matcher_kw: forwarded to :func:`detect_and_generate`.
    """
    if exact not in ("normalized", "raw"):
        raise ValueError("exact must be 'normalized' or 'raw'")
    matcher = AliasMatcher(lexicon)
    corpus = SilverCorpus([])
    for doc in docs:
        names: dict[str, list[str]] = {}
        for h in doc.headings:
            if h.cui not in lexicon:
                _warn(corpus, f"{doc.id}: heading {h.name!r} -> {h.cui!r} not in lexicon; skipped")
                continue
            key = norm_key(h.name) if exact == "normalized" else h.name
            names.setdefault(key, []).append(h.cui)
        if not names:
            continue
        for cs in detect_and_generate(matcher, Document(doc.id, doc.text), **matcher_kw):
            m = cs.mention
            key = norm_key(m.surface) if exact == "normalized" else m.surface
            for cui in names.get(key, ()):
                corpus.annotations.append(SilverAnnotation(doc.id, m.start, m.end, cui, DISTANT))
    corpus.annotations = _finish(corpus.annotations)
    return corpus


def check_crosswalk(crosswalk: Mapping[str, str]) -> None:
    seen: dict[str, str] = {}
    for key, cui in crosswalk.items():
        if cui in seen:
            raise InjectivityError(f"page keys {seen[cui]!r} and {key!r} both map to {cui!r}")
        seen[cui] = key


def load_crosswalk(path: str | Path) -> dict[str, str]:
    """Read ``page_key<TAB>cui`` lines; the mapping must be one-to-one."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise ParseError("expected 'page_key<TAB>cui'", path, lineno)
            key, cui = parts[0].strip(), parts[1].strip()
            if key in out:
                raise InjectivityError(f"{path}:{lineno}: page key {key!r} listed twice")
            out[key] = cui
    check_crosswalk(out)
    return out


def map_links(docs: Sequence[LinkedDocument], crosswalk: Mapping[str, str], lexicon: Lexicon) -> SilverCorpus:
    """Turn hyperlink spans into concept annotations via the crosswalk.

    Unmapped page keys are dropped and counted in ``SilverCorpus.dropped``;
    cuis missing from the lexicon are kept but flagged untyped.
    """
    check_crosswalk(crosswalk)
    corpus = SilverCorpus([])
    for doc in docs:
        for link in doc.links:
            if not 0 <= link.start < link.end <= len(doc.text):
                _warn(corpus, f"{doc.id}: link span [{link.start}, {link.end}) out of bounds; dropped")
                corpus.dropped += 1
                continue
            cui = crosswalk.get(link.page_key)
            if cui is None:
                corpus.dropped += 1
                continue
            concept = lexicon.get(cui)
            if concept is None:
                _warn(corpus, f"{doc.id}: crosswalked cui {cui!r} not in lexicon; kept as untyped")
                corpus.annotations.append(SilverAnnotation(doc.id, link.start, link.end, cui, CROSSWALK, (), True))
            else:
                corpus.annotations.append(SilverAnnotation(doc.id, link.start, link.end, cui, CROSSWALK,
                                                           tuple(sorted(concept.fine_types))))
    corpus.annotations = _finish(corpus.annotations)
    return corpus


def quality_report(silver: Sequence[GoldAnnotation] | SilverCorpus, gold: Sequence[GoldAnnotation],
                   doc_ids: Sequence[str] | None = None) -> tuple[float, float]:
    """Exact span+cui precision (over silver) and recall (over gold) on shared documents.

    Shared documents are ``doc_ids`` when given, otherwise those carrying at
    least one annotation on both sides.
    """
    if isinstance(silver, SilverCorpus):
        silver = silver.gold()
    else:
        silver = [s.as_gold() if isinstance(s, SilverAnnotation) else s for s in silver]
    shared = set(doc_ids) if doc_ids is not None else {s.doc_id for s in silver} & {g.doc_id for g in gold}
    if not shared:
        raise EmptyOverlap("silver and gold share no documents")
    s = [a for a in silver if a.doc_id in shared]
    g = [a for a in gold if a.doc_id in shared]
    tp = len(exact_matches([(a.doc_id, a.start, a.end, a.cui) for a in s], g))
    precision = tp / len(s) if s else 1.0
    recall = tp / len(g) if g else 1.0
    return precision, recall


def read_headed_documents(path: str | Path) -> list[HeadedDocument]:
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            heads = tuple(Heading(h["name"], h["cui"]) for h in obj.get("headings", []))
            out.append(HeadedDocument(str(obj["id"]), obj["text"], heads))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad headed document: {exc}", path, lineno) from None
    return out


def read_linked_documents(path: str | Path) -> list[LinkedDocument]:
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            links = tuple(LinkSpan(int(l["start"]), int(l["end"]), l["page_key"]) for l in obj.get("links", []))
            out.append(LinkedDocument(str(obj["id"]), obj["text"], links))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad linked document: {exc}", path, lineno) from None
    return out
