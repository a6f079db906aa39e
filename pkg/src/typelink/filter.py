"""Type-based candidate pruning and end-to-end linking.

A mention's candidates are kept only when their semantic groups (or fine
types, for the fine oracle) intersect the allowed set; the top-ranked
survivor becomes the link.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .annotations import GoldAnnotation
from .errors import ConfigError
from .lexicon import Lexicon
from .matcher import Candidate, CandidateSet, Document, sort_sets
from .type_system import TypeMap, groups_of
from .typer import DocumentContext, Thresholds, TyperModel, groups_above, predict_matrix

log = logging.getLogger(__name__)

MODES = ("none", "predicted", "oracle_coarse", "oracle_fine")
POLICIES = ("drop", "passthrough")


def parse_mode(mode: str) -> str:
    m = mode.replace("-", "_")
    if m not in MODES:
        raise ConfigError(f"unknown filter mode {mode!r}; expected one of {', '.join(MODES)}")
    return m


def parse_policy(policy: str) -> str:
    if policy not in POLICIES:
        raise ConfigError(f"unknown empty policy {policy!r}; expected drop or passthrough")
    return policy


@dataclass(frozen=True)
class LinkedMention:
    surviving: CandidateSet
    chosen_cui: str | None
    predicted_groups: frozenset[str]
    pre_filter_size: int

    @property
    def mention(self):
        return self.surviving.mention

    @property
    def key(self) -> tuple[str, int, int]:
        return self.surviving.mention.key

    def to_json(self) -> dict:
        m = self.mention
        return {
            "doc_id": m.doc_id,
            "start": m.start,
            "end": m.end,
            "surface": m.surface,
            "chosen_cui": self.chosen_cui,
            "predicted_groups": sorted(self.predicted_groups),
            "pre_filter_size": self.pre_filter_size,
            "post_filter_size": len(self.surviving),
            "candidates": [{"cui": c.cui, "score": c.score, "rank": c.rank} for c in self.surviving.candidates],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "LinkedMention":
        cs = CandidateSet.from_json(obj)
        return cls(cs, obj.get("chosen_cui"), frozenset(obj.get("predicted_groups", ())),
                   int(obj.get("pre_filter_size", len(cs))))


def _labels(cui: str, lexicon: Lexicon, type_map: TypeMap, fine: bool) -> set[str]:
    concept = lexicon.get(cui)
    if concept is None:
        log.warning("candidate cui %r not in lexicon; treated as having no types", cui)
        return set()
    return set(concept.fine_types) if fine else groups_of(type_map, concept.fine_types)


def filter_candidates(cs: CandidateSet, allowed: Iterable[str], lexicon: Lexicon, type_map: TypeMap,
                      policy: str = "drop", fine: bool = False) -> CandidateSet:
    """Keep candidates whose groups meet ``allowed``, preserving order and re-ranking.

    With ``fine=True`` the comparison is on fine semantic types instead of
    groups. If nothing survives (or ``allowed`` is empty), ``drop`` returns an
    empty set and ``passthrough`` returns ``cs`` unchanged.
    """
    allowed = set(allowed)
    kept = [c for c in cs.candidates if allowed and _labels(c.cui, lexicon, type_map, fine) & allowed]
    if not kept:
        return cs if policy == "passthrough" else CandidateSet(cs.mention, ())
    return CandidateSet(cs.mention, tuple(Candidate(c.cui, c.score, i) for i, c in enumerate(kept, start=1)))


def oracle_allowed(gold_cui: str, mode: str, lexicon: Lexicon, type_map: TypeMap) -> set[str]:
    """Allowed labels derived from the gold concept: fine types or their groups."""
    concept = lexicon[gold_cui]
    if mode == "oracle_fine":
        return set(concept.fine_types)
    if mode == "oracle_coarse":
        return groups_of(type_map, concept.fine_types)
    raise ConfigError(f"{mode!r} is not an oracle mode")


@dataclass
class LinkResult:
    mentions: list[LinkedMention]
    # mentions left unfiltered because no gold span / score record matched exactly
    unaligned: int = 0
    abstained: int = 0
    warnings: list[str] = field(default_factory=list)


def _top(cs: CandidateSet) -> str | None:
    return cs.candidates[0].cui if cs.candidates else None


def link_corpus(candidate_sets: Sequence[CandidateSet], mode: str, lexicon: Lexicon, type_map: TypeMap,
                policy: str = "drop", *, docs: Sequence[Document] | Mapping[str, Document] | None = None,
                model: TyperModel | None = None, thresholds: Thresholds | None = None,
                scores: Mapping[tuple[str, int, int], Mapping[str, float]] | None = None,
                gold: Sequence[GoldAnnotation] | None = None) -> LinkResult:
    """Filter every candidate set under ``mode`` and pick the rank-1 survivor.

    ``predicted`` needs either ``scores`` (keyed by ``(doc_id, start, end)``)
    or ``model`` plus ``docs``; oracle modes need ``gold``. Output is sorted by
    ``(doc_id, start, end)``.
    """
    mode = parse_mode(mode)
    policy = parse_policy(policy)
    sets = sort_sets(candidate_sets)
    result = LinkResult([])

    allowed_per: list[frozenset[str] | None] = [None] * len(sets)
    if mode == "predicted":
        if scores is None:
            if model is None or docs is None:
                raise ConfigError("predicted mode needs imported scores or a model with documents")
            scores = _score_with_model(sets, model, docs)
        if thresholds is None:
            thresholds = Thresholds.uniform(type_map.groups)
        for i, cs in enumerate(sets):
            s = scores.get(cs.mention.key)
            if s is None:
                result.unaligned += 1
                continue
            allowed_per[i] = frozenset(groups_above(s, thresholds))
    elif mode in ("oracle_coarse", "oracle_fine"):
        if gold is None:
            raise ConfigError(f"{mode} needs gold annotations")
        by_span = {g.key: g.cui for g in gold}
        for i, cs in enumerate(sets):
            cui = by_span.get(cs.mention.key)
            if cui is None:
                result.unaligned += 1
                continue
            allowed_per[i] = frozenset(oracle_allowed(cui, mode, lexicon, type_map))

    fine = mode == "oracle_fine"
    for cs, allowed in zip(sets, allowed_per):
        if allowed is None:
            surviving, predicted = cs, frozenset()
        else:
            if not allowed:
                result.abstained += 1
            surviving = filter_candidates(cs, allowed, lexicon, type_map, policy, fine=fine)
            predicted = allowed
        result.mentions.append(LinkedMention(surviving, _top(surviving), predicted, len(cs)))
    if result.unaligned:
        msg = f"{result.unaligned} mention(s) had no aligned {'scores' if mode == 'predicted' else 'gold span'}; left unfiltered"
        result.warnings.append(msg)
        log.warning(msg)
    return result


def _score_with_model(sets: Sequence[CandidateSet], model: TyperModel,
                      docs: Sequence[Document] | Mapping[str, Document]) -> dict:
    by_id = docs if isinstance(docs, Mapping) else {d.id: d for d in docs}
    contexts: dict[str, DocumentContext] = {}
    keys, examples = [], []
    for cs in sets:
        m = cs.mention
        ctx = contexts.get(m.doc_id)
        if ctx is None:
            ctx = contexts[m.doc_id] = DocumentContext(by_id[m.doc_id].text)
        ex = ctx.example(m.start, m.end, model.window_k)
        if ex is not None:
            keys.append(m.key)
            examples.append(ex)
    mat = predict_matrix(model, examples)
    return {k: dict(zip(model.groups, map(float, row))) for k, row in zip(keys, mat)}


def model_scores(sets: Sequence[CandidateSet], model: TyperModel,
                 docs: Sequence[Document] | Mapping[str, Document]) -> dict:
    """Per-mention group scores from a typer model, keyed by ``(doc_id, start, end)``."""
    return _score_with_model(sort_sets(sets), model, docs)
