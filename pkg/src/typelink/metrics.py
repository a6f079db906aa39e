"""Evaluation: mention-level exact/partial F1, error analysis, significance."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .annotations import GoldAnnotation
from .errors import AlignmentError
from .lexicon import Lexicon
from .matcher import CandidateSet
from .type_system import TypeMap, groups_of

log = logging.getLogger(__name__)

UNRESOLVED = "UNRESOLVED"

Link = tuple[str, int, int, str]  # doc_id, start, end, cui


def as_links(preds: Iterable) -> list[Link]:
    """Normalize predictions to ``(doc_id, start, end, cui)``.

    Accepts LinkedMention-like objects (``key`` + ``chosen_cui``; those with no
    chosen cui are skipped), GoldAnnotation-like objects, or plain tuples.
    """
    out = []
    for p in preds:
        if isinstance(p, tuple):
            out.append(p)
        elif hasattr(p, "chosen_cui"):
            if p.chosen_cui is not None:
                out.append((*p.key, p.chosen_cui))
        else:
            out.append((p.doc_id, p.start, p.end, p.cui))
    return out


def _prf(tp: float, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    precision = tp / n_pred if n_pred else 1.0
    recall = tp / n_gold if n_gold else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def exact_matches(preds: Sequence[Link], golds: Sequence[GoldAnnotation]) -> list[Link]:
    """Predictions that hit a gold span and cui; each gold counted at most once."""
    gold = {g.key: g.cui for g in golds}
    used = set()
    hits = []
    for p in preds:
        key = p[:3]
        if key not in used and gold.get(key) == p[3]:
            used.add(key)
            hits.append(p)
    return hits


def exact_f1(preds, golds: Sequence[GoldAnnotation]) -> tuple[float, float, float]:
    """(precision, recall, f1) where a hit needs identical span bounds and cui.

    Precision is 1.0 when there are no predictions; recall is 1.0 when there
    is no gold.
    """
    links = as_links(preds)
    return _prf(len(exact_matches(links, golds)), len(links), len(golds))


def partial_credit(p_start: int, p_end: int, g_start: int, g_end: int) -> float:
    """Character Dice overlap of two spans."""
    ov = min(p_end, g_end) - max(p_start, g_start)
    if ov <= 0:
        return 0.0
    return 2.0 * ov / ((p_end - p_start) + (g_end - g_start))


def partial_tp(links: Sequence[Link], golds: Sequence[GoldAnnotation]) -> float:
    links = sorted(links)
    golds = sorted(golds, key=lambda g: (g.doc_id, g.start, g.end, g.cui))
    by_doc: dict[tuple[str, str], list[int]] = {}
    for gi, g in enumerate(golds):
        by_doc.setdefault((g.doc_id, g.cui), []).append(gi)
    pairs = []
    for pi, (doc, ps, pe, cui) in enumerate(links):
        for gi in by_doc.get((doc, cui), ()):
            g = golds[gi]
            c = partial_credit(ps, pe, g.start, g.end)
            if c > 0:
                pairs.append((-c, g.start, ps, gi, pi, c))
    pairs.sort()
    used_p, used_g = set(), set()
    total = 0.0
    for *_, gi, pi, c in pairs:
        if gi in used_g or pi in used_p:
            continue
        used_g.add(gi)
        used_p.add(pi)
        total += c
    return total


def partial_f1(preds, golds: Sequence[GoldAnnotation]) -> tuple[float, float, float]:
    """Overlap-weighted F1: same-cui pairs earn character-Dice credit, assigned greedily one-to-one."""
    links = as_links(preds)
    return _prf(partial_tp(links, golds), len(links), len(golds))


def error_breakdown(sets: Sequence[CandidateSet], golds: Sequence[GoldAnnotation]) -> dict[str, int]:
    """Classify each predicted mention as a false-positive span, a missing candidate, or matched.

    When several golds overlap a mention it counts as matched if any of their
    cuis is among the candidates.
    """
    by_doc: dict[str, list[GoldAnnotation]] = {}
    for g in golds:
        by_doc.setdefault(g.doc_id, []).append(g)
    counts = {"false_positive_mention": 0, "missing_candidate": 0, "matched": 0}
    for cs in sets:
        m = cs.mention
        overlapping = [g for g in by_doc.get(m.doc_id, ()) if g.start < m.end and m.start < g.end]
        if not overlapping:
            counts["false_positive_mention"] += 1
        elif any(g.cui in cs.cuis for g in overlapping):
            counts["matched"] += 1
        else:
            counts["missing_candidate"] += 1
    return counts


@dataclass
class SizeStats:
    before_histogram: dict[int, int]
    after_histogram: dict[int, int]
    reduced_fraction: float
    disambiguated_fraction: float
    n_mentions: int
    n_ambiguous: int


def candidate_size_stats(before: Sequence[CandidateSet], after: Sequence[CandidateSet]) -> SizeStats:
    """Histograms of candidate-set sizes before/after filtering.

    ``disambiguated_fraction`` is over mentions that started ambiguous
    (|C| > 1) and ended with exactly one candidate.
    """
    if len(before) != len(after):
        raise AlignmentError(f"{len(before)} sets before filtering vs {len(after)} after")
    reduced = ambiguous = resolved = 0
    for b, a in zip(before, after):
        if b.mention.key != a.mention.key:
            raise AlignmentError(f"misaligned mentions {b.mention.key} vs {a.mention.key}")
        if len(a) < len(b):
            reduced += 1
        if len(b) > 1:
            ambiguous += 1
            if len(a) == 1:
                resolved += 1
    n = len(before)
    return SizeStats(
        dict(sorted(Counter(len(b) for b in before).items())),
        dict(sorted(Counter(len(a) for a in after).items())),
        reduced / n if n else 0.0,
        resolved / ambiguous if ambiguous else 0.0,
        n,
        ambiguous,
    )


# ---------------------------------------------------------------- significance


def per_doc_counts(preds, golds: Sequence[GoldAnnotation], doc_ids: Sequence[str]) -> list[tuple[int, int, int]]:
    """``(tp, n_pred, n_gold)`` per document under exact matching, in ``doc_ids`` order."""
    links = as_links(preds)
    tp = Counter(p[0] for p in exact_matches(links, golds))
    npred = Counter(p[0] for p in links)
    ngold = Counter(g.doc_id for g in golds)
    return [(tp[d], npred[d], ngold[d]) for d in doc_ids]


@dataclass
class BootstrapResult:
    p_value: float
    winner: str | None  # "A", "B", or None on an exact tie
    observed_a: float
    observed_b: float
    replicates: int


def _statistic(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Per-replicate statistic: mean for scalar scores, micro-F1 for (tp, pred, gold) rows."""
    if arr.ndim == 1:
        return arr[idx].mean(axis=-1)
    sums = arr[idx].sum(axis=-2)
    tp, npred, ngold = sums[..., 0], sums[..., 1], sums[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(npred > 0, tp / np.where(npred > 0, npred, 1), 1.0)
        r = np.where(ngold > 0, tp / np.where(ngold > 0, ngold, 1), 1.0)
        f = np.where(p + r > 0, 2 * p * r / np.where(p + r > 0, p + r, 1), 0.0)
    return f


def paired_bootstrap(scores_a: Sequence, scores_b: Sequence, n_resamples: int = 1000,
                     seed: int = 0) -> BootstrapResult:
    """One-sided paired bootstrap over documents.

    Each element is either a scalar per-document score or a ``(tp, n_pred,
    n_gold)`` triple; triples are summed per replicate and turned into micro
    F1. The p-value is the fraction of replicates in which the observed loser
    scores at least as high as the observed winner. Exact ties report no
    winner and p = 1.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise AlignmentError(f"score arrays differ in shape: {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two documents")
    if n_resamples < 100:
        raise ValueError("need at least 100 resamples")
    full = np.arange(n)
    obs_a, obs_b = float(_statistic(a, full)), float(_statistic(b, full))
    if obs_a == obs_b:
        return BootstrapResult(1.0, None, obs_a, obs_b, n_resamples)
    winner, hi, lo = ("A", a, b) if obs_a > obs_b else ("B", b, a)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_resamples, n))
    not_worse = _statistic(lo, idx) >= _statistic(hi, idx)
    return BootstrapResult(float(np.mean(not_worse)), winner, obs_a, obs_b, n_resamples)


# ---------------------------------------------------------------- per group


def per_group_f1(preds, golds: Sequence[GoldAnnotation], lexicon: Lexicon, type_map: TypeMap,
                 warnings: list[str] | None = None) -> dict[str, float]:
    """Exact F1 restricted to each semantic group.

    Golds belong to every group of their cui. A prediction belongs to the
    groups of the gold at its span, or to the groups of its own cui when no
    gold shares its span.
    """
    links = as_links(preds)

    def groups_for(cui: str) -> set[str]:
        c = lexicon.get(cui)
        if c is None:
            msg = f"cui {cui!r} not in lexicon; counted under {UNRESOLVED}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            return {UNRESOLVED}
        return groups_of(type_map, c.fine_types)

    gold_groups = {g.key: groups_for(g.cui) for g in golds}
    golds_by: dict[str, list[GoldAnnotation]] = {}
    for g in golds:
        for grp in gold_groups[g.key]:
            golds_by.setdefault(grp, []).append(g)
    preds_by: dict[str, list[Link]] = {}
    for p in links:
        grps = gold_groups.get(p[:3])
        if grps is None:
            c = lexicon.get(p[3])
            grps = groups_of(type_map, c.fine_types) if c is not None else set()
        for grp in grps:
            preds_by.setdefault(grp, []).append(p)
    return {grp: exact_f1(preds_by.get(grp, []), gs)[2] for grp, gs in sorted(golds_by.items())}


# ---------------------------------------------------------------- report


@dataclass
class EvalReport:
    exact_precision: float
    exact_recall: float
    exact_f1: float
    partial_precision: float
    partial_recall: float
    partial_f1: float
    per_group_f1: dict[str, float] = field(default_factory=dict)
    error_counts: dict[str, int] = field(default_factory=dict)
    candidate_size_histogram: dict[int, int] = field(default_factory=dict)
    bootstrap_p: float | None = None
    bootstrap_winner: str | None = None
    compare_exact_f1: float | None = None
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["candidate_size_histogram"] = {str(k): v for k, v in self.candidate_size_histogram.items()}
        return d

    def to_text(self) -> str:
        lines = [
            f"exact    P={self.exact_precision:.4f} R={self.exact_recall:.4f} F1={self.exact_f1:.4f}",
            f"partial  P={self.partial_precision:.4f} R={self.partial_recall:.4f} F1={self.partial_f1:.4f}",
        ]
        if self.error_counts:
            lines.append("errors   " + " ".join(f"{k}={v}" for k, v in self.error_counts.items()))
        if self.candidate_size_histogram:
            lines.append("|C|      " + " ".join(f"{k}:{v}" for k, v in self.candidate_size_histogram.items()))
        for grp, f1 in self.per_group_f1.items():
            lines.append(f"  {grp:<36s} F1={f1:.4f}")
        if self.bootstrap_p is not None:
            lines.append(f"bootstrap winner={self.bootstrap_winner} p={self.bootstrap_p:.4f} "
                         f"(other system F1={self.compare_exact_f1:.4f})")
        return "\n".join(lines)


def evaluate(preds, golds: Sequence[GoldAnnotation], lexicon: Lexicon | None = None,
             type_map: TypeMap | None = None, candidate_sets: Sequence[CandidateSet] | None = None) -> EvalReport:
    ep, er, ef = exact_f1(preds, golds)
    pp, pr, pf = partial_f1(preds, golds)
    report = EvalReport(ep, er, ef, pp, pr, pf)
    if lexicon is not None and type_map is not None:
        report.per_group_f1 = per_group_f1(preds, golds, lexicon, type_map, report.warnings)
    if candidate_sets is not None:
        report.error_counts = error_breakdown(candidate_sets, golds)
        report.candidate_size_histogram = dict(sorted(Counter(len(cs) for cs in candidate_sets).items()))
    return report
