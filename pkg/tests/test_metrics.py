import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bootstrap_reference, brute_exact, brute_partial, random_instance, recount_sizes
from typelink.annotations import GoldAnnotation
from typelink.errors import AlignmentError
from typelink.filter import link_corpus
from typelink.matcher import CandidateSet, Mention, ranked
from typelink.metrics import (
    UNRESOLVED,
    candidate_size_stats,
    error_breakdown,
    evaluate,
    exact_f1,
    paired_bootstrap,
    partial_f1,
    per_doc_counts,
    per_group_f1,
)


def G(d, s, e, c):
    return GoldAnnotation(d, s, e, c)


def golds_of(tuples):
    return [G(*t) for t in tuples]


def test_exact_identity():
    golds = golds_of([("a", 0, 4, "C1"), ("a", 5, 9, "C2")])
    assert exact_f1(golds, golds) == (1.0, 1.0, 1.0)


def test_exact_wrong_cui():
    assert exact_f1([("a", 0, 4, "C2")], golds_of([("a", 0, 4, "C1")])) == (0.0, 0.0, 0.0)


def test_exact_hand_computed():
    golds = golds_of([("a", 0, 4, "C1"), ("a", 5, 9, "C2"), ("b", 0, 3, "C1")])
    preds = [("a", 0, 4, "C1"), ("b", 0, 2, "C1")]
    p, r, f = exact_f1(preds, golds)
    assert (p, r) == (0.5, 1 / 3)
    assert f == pytest.approx(0.4, abs=1e-15)


def test_conventions():
    assert exact_f1([], []) == (1.0, 1.0, 1.0)
    assert exact_f1([], golds_of([("a", 0, 1, "C")])) == (1.0, 0.0, 0.0)


def test_gold_matched_once():
    golds = golds_of([("a", 0, 4, "C1")])
    p, r, _ = exact_f1([("a", 0, 4, "C1"), ("a", 0, 4, "C1")], golds)
    assert (p, r) == (0.5, 1.0)


def test_partial_exact_spans_equal_exact():
    golds = golds_of([("a", 0, 4, "C1"), ("a", 5, 9, "C2")])
    assert partial_f1(golds, golds) == exact_f1(golds, golds) == (1.0, 1.0, 1.0)


def test_partial_dice_credit():
    p, r, f = partial_f1([("a", 5, 10, "C1")], golds_of([("a", 0, 10, "C1")]))
    assert p == r == pytest.approx(2 / 3, abs=1e-15)
    assert f == pytest.approx(2 / 3, abs=1e-15)


def test_partial_requires_same_cui():
    assert partial_f1([("a", 5, 10, "C2")], golds_of([("a", 0, 10, "C1")]))[2] == 0.0


def test_linked_mentions_without_choice_are_not_predictions(lexicon, type_map):
    cs = ranked(Mention("a", 0, 4, "cold"), [("C-coldtemp", 1.0)])
    lm = link_corpus([cs], "predicted", lexicon, type_map, scores={cs.mention.key: {"Finding": 0.9}}).mentions
    assert lm[0].chosen_cui is None
    assert exact_f1(lm, golds_of([("a", 0, 4, "C-commoncold")])) == (1.0, 0.0, 0.0)


@pytest.mark.parametrize("seed", range(25))
def test_metrics_match_brute_force(seed):
    preds, golds = random_instance(random.Random(seed))
    g = golds_of(golds)
    for got, want in [(exact_f1(preds, g), brute_exact(preds, golds)),
                      (partial_f1(preds, g), brute_partial(preds, golds))]:
        assert np.allclose(got, want, rtol=0, atol=1e-12)


@settings(max_examples=100)
@given(st.integers(0, 10 ** 6))
def test_partial_at_least_exact_and_permutation_invariant(seed):
    rng = random.Random(seed)
    preds, golds = random_instance(rng)
    g = golds_of(golds)
    assert partial_f1(preds, g)[2] >= exact_f1(preds, g)[2] - 1e-15
    shuffled_p, shuffled_g = preds[:], g[:]
    rng.shuffle(shuffled_p)
    rng.shuffle(shuffled_g)
    assert exact_f1(shuffled_p, shuffled_g) == exact_f1(preds, g)
    assert partial_f1(shuffled_p, shuffled_g) == pytest.approx(partial_f1(preds, g), abs=1e-12)


# ---------------------------------------------------------------- error breakdown


def cset(doc, s, e, cuis):
    return ranked(Mention(doc, s, e, "x" * (e - s)), [(c, 1.0) for c in cuis])


def test_error_breakdown_cases():
    golds = golds_of([("a", 0, 4, "C4"), ("a", 10, 14, "C9")])
    sets = [
        cset("a", 20, 24, ["C1"]),                      # no gold overlaps
        cset("a", 0, 4, ["C1", "C2", "C3", "C4", "C5"]),  # gold at rank 4
        cset("a", 11, 14, ["C1", "C2"]),                # gold cui absent
    ]
    assert error_breakdown(sets, golds) == {"false_positive_mention": 1, "missing_candidate": 1, "matched": 1}


def test_error_counts_partition_predictions(fixture_sets, fixture_gold):
    counts = error_breakdown(fixture_sets, fixture_gold)
    assert sum(counts.values()) == len(fixture_sets)


# ---------------------------------------------------------------- sizes


def test_size_stats_identity():
    sets = [cset("a", 0, 1, ["C1", "C2"]), cset("a", 2, 3, ["C1"])]
    st_ = candidate_size_stats(sets, sets)
    assert st_.reduced_fraction == 0.0
    assert st_.before_histogram == st_.after_histogram == {1: 1, 2: 1}


def test_size_stats_fully_disambiguated():
    before = [cset("a", i, i + 1, ["C1", "C2", "C3", "C4", "C5"]) for i in range(4)]
    after = [cset("a", i, i + 1, ["C1"]) for i in range(4)]
    assert candidate_size_stats(before, after).disambiguated_fraction == 1.0


def test_size_stats_misaligned():
    with pytest.raises(AlignmentError):
        candidate_size_stats([cset("a", 0, 1, ["C1"])], [])
    with pytest.raises(AlignmentError):
        candidate_size_stats([cset("a", 0, 1, ["C1"])], [cset("a", 0, 2, ["C1"])])


def test_size_stats_match_recount_on_20_mentions():
    rng = random.Random(3)
    before, after = [], []
    for i in range(20):
        cuis = [f"C{j}" for j in range(rng.randint(1, 5))]
        before.append(cset("d", 2 * i, 2 * i + 1, cuis))
        after.append(cset("d", 2 * i, 2 * i + 1, cuis[:rng.randint(0, len(cuis))]))
    got = candidate_size_stats(before, after)
    hb, ha, red, dis = recount_sizes(before, after)
    assert (got.before_histogram, got.after_histogram) == (hb, ha)
    assert got.reduced_fraction == red and got.disambiguated_fraction == dis


# ---------------------------------------------------------------- bootstrap


def test_bootstrap_identical_systems():
    a = [0.3, 0.5, 0.9, 0.1]
    res = paired_bootstrap(a, a, 500, seed=1)
    assert res.p_value == 1.0 and res.winner is None


def test_bootstrap_uniform_gap():
    rng = np.random.default_rng(0)
    b = rng.random(50)
    res = paired_bootstrap(b + 10, b, 1000, seed=1)
    assert res.p_value == 0.0 and res.winner == "A"


def test_bootstrap_symmetry_and_seed():
    rng = np.random.default_rng(2)
    b = rng.random(30)
    a = b + rng.normal(0.05, 0.2, 30)
    ab = paired_bootstrap(a, b, 2000, seed=9)
    ba = paired_bootstrap(b, a, 2000, seed=9)
    assert {ab.winner, ba.winner} == {"A", "B"}
    assert ab.p_value == ba.p_value
    assert paired_bootstrap(a, b, 2000, seed=9) == ab


def test_bootstrap_matches_reference_implementation():
    rng = random.Random(4)
    b = [rng.random() for _ in range(40)]
    a = [x + rng.gauss(0.04, 0.25) for x in b]
    n = 10000
    ours = paired_bootstrap(a, b, n, seed=5).p_value
    ref = bootstrap_reference(a, b, n, seed=5)
    se = np.sqrt(max(ref * (1 - ref), 1e-4) / n)
    assert abs(ours - ref) <= 5 * np.sqrt(2) * se


def test_bootstrap_errors():
    with pytest.raises(AlignmentError):
        paired_bootstrap([1, 2, 3], [1, 2], 100)
    with pytest.raises(ValueError):
        paired_bootstrap([1, 2], [1, 2], 10)


def test_bootstrap_on_count_triples():
    golds = golds_of([("a", 0, 1, "C"), ("b", 0, 1, "C"), ("c", 0, 1, "C")])
    good = [("a", 0, 1, "C"), ("b", 0, 1, "C"), ("c", 0, 1, "C")]
    bad = [("a", 0, 1, "X"), ("b", 0, 1, "C"), ("c", 0, 1, "X")]
    docs = ["a", "b", "c"]
    a = per_doc_counts(good, golds, docs)
    assert a == [(1, 1, 1)] * 3
    res = paired_bootstrap(a, per_doc_counts(bad, golds, docs), 1000, seed=0)
    assert res.winner == "A" and res.observed_a == 1.0 and res.observed_b == pytest.approx(1 / 3)


# ---------------------------------------------------------------- per group


def test_per_group_single_group_equals_overall(lexicon, type_map):
    golds = golds_of([("a", 0, 4, "C-commoncold"), ("a", 5, 9, "C-diabetes"), ("a", 10, 14, "C-asthma")])
    preds = [("a", 0, 4, "C-commoncold"), ("a", 5, 9, "C-asthma")]
    got = per_group_f1(preds, golds, lexicon, type_map)
    assert got == {"Disease or Syndrome": exact_f1(preds, golds)[2]}


def test_per_group_two_groups_hand_count(lexicon, type_map):
    golds, preds = [], []
    for i in range(10):
        golds.append(G("d", 10 * i, 10 * i + 4, "C-cough"))
        golds.append(G("e", 10 * i, 10 * i + 4, "C-lung"))
        if i < 7:
            preds.append(("d", 10 * i, 10 * i + 4, "C-cough"))      # 7 correct symptoms
        if i < 4:
            preds.append(("e", 10 * i, 10 * i + 4, "C-lung"))       # 4 correct anatomy
        elif i < 6:
            preds.append(("e", 10 * i, 10 * i + 4, "C-heart"))      # 2 wrong anatomy
    got = per_group_f1(preds, golds, lexicon, type_map)
    # Sign or Symptom: P=7/7 R=7/10; Anatomy: P=4/6 R=4/10
    assert got["Sign or Symptom"] == pytest.approx(2 * 1 * 0.7 / 1.7, abs=1e-12)
    assert got["Anatomy"] == pytest.approx(2 * (4 / 6) * 0.4 / (4 / 6 + 0.4), abs=1e-12)
    assert set(got) == {"Sign or Symptom", "Anatomy"}


def test_per_group_multi_group_gold_and_unresolved(lexicon, type_map):
    golds = golds_of([("a", 0, 4, "C-ox7sap"), ("a", 5, 9, "C-ghost")])
    warnings = []
    got = per_group_f1([("a", 0, 4, "C-ox7sap")], golds, lexicon, type_map, warnings)
    assert got["Pharmacologic Substance"] == got["Chemicals & Drugs"] == 1.0
    assert got[UNRESOLVED] == 0.0
    assert warnings


def test_evaluate_report_fields(fixture_sets, fixture_gold, lexicon, type_map):
    linked = link_corpus(fixture_sets, "none", lexicon, type_map).mentions
    report = evaluate(linked, fixture_gold, lexicon, type_map, fixture_sets)
    assert 0 <= report.exact_f1 <= report.partial_f1 <= 1
    assert sum(report.error_counts.values()) == len(fixture_sets)
    js = report.to_json()
    for key in ["exact_f1", "exact_precision", "exact_recall", "partial_f1", "partial_precision",
                "partial_recall", "per_group_f1", "error_counts", "candidate_size_histogram", "bootstrap_p"]:
        assert key in js
    assert "exact" in report.to_text()
