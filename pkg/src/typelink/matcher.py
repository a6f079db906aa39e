"""Dictionary-based mention detection and candidate generation.

Approximate matching in the QuickUMLS style: every token n-gram is compared
against alias token sets by Jaccard similarity, overlapping hits are resolved
longest-match-first, and each surviving mention keeps a ranked candidate list.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateCandidate, ParseError, SpanError, UnknownDocument
from .lexicon import Lexicon, Token, norm_key, tokenize

log = logging.getLogger(__name__)

DEFAULT_MAX_NGRAM = 6
DEFAULT_MAX_CANDIDATES = 5
DEFAULT_MIN_SCORE = 0.7


@dataclass(frozen=True)
class Document:
    id: str
    text: str


@dataclass(frozen=True)
class Mention:
    doc_id: str
    start: int
    end: int
    surface: str

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.end)


@dataclass(frozen=True)
class Candidate:
    cui: str
    score: float
    rank: int


@dataclass(frozen=True)
class CandidateSet:
    mention: Mention
    candidates: tuple[Candidate, ...]

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def cuis(self) -> list[str]:
        return [c.cui for c in self.candidates]

    def to_json(self) -> dict:
        m = self.mention
        return {
            "doc_id": m.doc_id,
            "start": m.start,
            "end": m.end,
            "surface": m.surface,
            "candidates": [{"cui": c.cui, "score": c.score, "rank": c.rank} for c in self.candidates],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CandidateSet":
        mention = Mention(obj["doc_id"], int(obj["start"]), int(obj["end"]), obj.get("surface", ""))
        cands = tuple(
            Candidate(c["cui"], float(c["score"]), int(c.get("rank", i)))
            for i, c in enumerate(obj["candidates"], start=1)
        )
        return cls(mention, cands)


def ranked(mention: Mention, scored: Iterable[tuple[str, float]]) -> CandidateSet:
    """Build a CandidateSet assigning ranks 1..n in the given order."""
    seen = set()
    cands = []
    for i, (cui, score) in enumerate(scored, start=1):
        if cui in seen:
            raise DuplicateCandidate(f"cui {cui!r} listed twice for mention {mention.key}")
        seen.add(cui)
        cands.append(Candidate(cui, score, i))
    return CandidateSet(mention, tuple(cands))


class AliasMatcher:
    """Jaccard lookup over the alias token sets of a lexicon.

    Built once per lexicon and shared read-only between worker threads.
    """

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        self._alias_sets: list[frozenset[str]] = []
        self._alias_cuis: list[tuple[str, ...]] = []
        self._inverted: dict[str, list[int]] = {}
        for key, cuis in lexicon.alias_index.items():
            idx = len(self._alias_sets)
            toks = frozenset(key.split(" "))
            self._alias_sets.append(toks)
            self._alias_cuis.append(cuis)
            for t in toks:
                self._inverted.setdefault(t, []).append(idx)

    def candidates(self, tokens: Sequence[str], min_score: float) -> dict[str, float]:
        """Best score per cui for one n-gram (exact key match scores 1.0)."""
        query = frozenset(tokens)
        if min_score <= 0.0:
            pool: Iterable[int] = range(len(self._alias_sets))
        else:
            pool = {i for t in query for i in self._inverted.get(t, ())}
        best: dict[str, float] = {}
        for i in pool:
            alias = self._alias_sets[i]
            score = len(query & alias) / len(query | alias)
            if score < min_score:
                continue
            for cui in self._alias_cuis[i]:
                if score > best.get(cui, -1.0):
                    best[cui] = score
        exact = self.lexicon.alias_index.get(" ".join(tokens))
        if exact:
            for cui in exact:
                best[cui] = 1.0
        return best


def _detect(matcher: AliasMatcher, doc: Document, max_ngram: int, max_candidates: int,
            min_score: float) -> list[CandidateSet]:
    tokens: list[Token] = tokenize(doc.text)
    hits = []
    for i in range(len(tokens)):
        for n in range(1, min(max_ngram, len(tokens) - i) + 1):
            gram = [t.text for t in tokens[i:i + n]]
            best = matcher.candidates(gram, min_score)
            if best:
                hits.append((n, max(best.values()), tokens[i].start, tokens[i + n - 1].end, best))
    # Longest first, then higher top score, then leftmost.
    hits.sort(key=lambda h: (-h[0], -h[1], h[2], h[3]))
    taken: list[tuple[int, int]] = []
    out = []
    for n, top, start, end, best in hits:
        if any(start < e and s < end for s, e in taken):
            continue
        taken.append((start, end))
        order = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:max_candidates]
        out.append(ranked(Mention(doc.id, start, end, doc.text[start:end]), order))
    out.sort(key=lambda cs: cs.mention.start)
    return out


def detect_and_generate(lexicon: Lexicon | AliasMatcher, doc: Document,
                        max_ngram: int = DEFAULT_MAX_NGRAM,
                        max_candidates: int = DEFAULT_MAX_CANDIDATES,
                        min_score: float = DEFAULT_MIN_SCORE) -> list[CandidateSet]:
    """Detect mentions in one document and return their candidate sets.

    Args:
        lexicon: a Lexicon, or a prebuilt AliasMatcher to skip index rebuilding.
        doc: the document to annotate.
        max_ngram: longest token n-gram considered.
        max_candidates: candidates kept per mention after sorting.
        min_score: Jaccard cutoff in [0, 1].

    Returns:
        Non-overlapping candidate sets ordered by start offset.
    """
    if max_ngram < 1 or max_candidates < 1:
        raise ValueError("max_ngram and max_candidates must be >= 1")
    if not 0.0 <= min_score <= 1.0:
        raise ValueError("min_score must lie in [0, 1]")
    matcher = lexicon if isinstance(lexicon, AliasMatcher) else AliasMatcher(lexicon)
    return _detect(matcher, doc, max_ngram, max_candidates, min_score)


def annotate_corpus(lexicon: Lexicon, docs: Sequence[Document], threads: int = 1,
                    **matcher_kw) -> list[CandidateSet]:
    """Run detection over a corpus; output is ordered by (doc_id, start) whatever ``threads`` is."""
    matcher = AliasMatcher(lexicon)

    def work(doc):
        return detect_and_generate(matcher, doc, **matcher_kw)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, docs))
    else:
        parts = [work(d) for d in docs]
    return sort_sets([cs for part in parts for cs in part])


def sort_sets(sets: Iterable[CandidateSet]) -> list[CandidateSet]:
    # Stable: same-span imports keep their file order.
    return sorted(sets, key=lambda cs: (cs.mention.doc_id, cs.mention.start, cs.mention.end))


def import_external_candidates(path: str | Path, corpus: Mapping[str, Document] | Sequence[Document]
                               ) -> list[CandidateSet]:
    """Read candidates produced by an external linker.

    Each JSONL record is ``{"doc_id", "start", "end", "candidates": [{"cui", "score"}, ...]}``.
    The listed order is taken as the ranking; scores are kept as given.
    """
    docs = corpus if isinstance(corpus, Mapping) else {d.id: d for d in corpus}
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc_id, start, end = rec["doc_id"], rec["start"], rec["end"]
                raw = rec["candidates"]
                scored = [(c["cui"], float(c["score"])) for c in raw]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad candidate record: {exc}", path, lineno) from None
            if doc_id not in docs:
                raise UnknownDocument(f"{path}:{lineno}: unknown document {doc_id!r}")
            text = docs[doc_id].text
            if not (isinstance(start, int) and isinstance(end, int) and 0 <= start < end <= len(text)):
                raise SpanError(doc_id, start, end, f"document length {len(text)}")
            out.append(ranked(Mention(doc_id, start, end, text[start:end]), scored))
    return out
