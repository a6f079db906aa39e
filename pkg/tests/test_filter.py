import pytest
from hypothesis import given, strategies as st

from typelink.annotations import GoldAnnotation
from typelink.errors import ConfigError, UnknownCui
from typelink.filter import filter_candidates, link_corpus, model_scores, oracle_allowed
from typelink.lexicon import Concept, Lexicon
from typelink.matcher import CandidateSet, Document, Mention, detect_and_generate, ranked
from typelink.type_system import default_type_map, groups_of

TM = default_type_map()


def cold_set(lexicon):
    [cs] = detect_and_generate(lexicon, Document("d", "cold"))
    return cs


def test_cold_pruned_to_disease(lexicon, type_map):
    out = filter_candidates(cold_set(lexicon), {"Disease or Syndrome"}, lexicon, type_map)
    assert [(c.cui, c.rank) for c in out.candidates] == [("C-commoncold", 1)]


def test_all_groups_is_identity(lexicon, type_map):
    cs = cold_set(lexicon)
    assert filter_candidates(cs, type_map.groups, lexicon, type_map) == cs


def test_empty_allowed_policies(lexicon, type_map):
    cs = cold_set(lexicon)
    assert filter_candidates(cs, set(), lexicon, type_map, "passthrough") == cs
    assert len(filter_candidates(cs, set(), lexicon, type_map, "drop")) == 0


def test_nothing_survives_policies(lexicon, type_map):
    cs = cold_set(lexicon)
    assert filter_candidates(cs, {"Devices"}, lexicon, type_map, "passthrough") == cs
    assert len(filter_candidates(cs, {"Devices"}, lexicon, type_map, "drop")) == 0


def test_unresolvable_cui_treated_as_untyped(lexicon, type_map, caplog):
    cs = ranked(Mention("d", 0, 4, "cold"), [("C-ghost", 1.0), ("C-commoncold", 0.9)])
    out = filter_candidates(cs, {"Disease or Syndrome"}, lexicon, type_map)
    assert out.cuis == ["C-commoncold"]
    assert "C-ghost" in caplog.text


def test_oracle_allowed(lexicon, type_map):
    assert oracle_allowed("C-breastcancer", "oracle_coarse", lexicon, type_map) == {"Neoplastic Process"}
    assert oracle_allowed("C-ox7sap", "oracle_coarse", lexicon, type_map) == {
        "Pharmacologic Substance", "Chemicals & Drugs"}
    assert oracle_allowed("C-ox7sap", "oracle_fine", lexicon, type_map) == {
        "Pharmacologic Substance", "Immunologic Factor"}
    with pytest.raises(UnknownCui):
        oracle_allowed("C-ghost", "oracle_fine", lexicon, type_map)
    with pytest.raises(ConfigError):
        oracle_allowed("C-ox7sap", "predicted", lexicon, type_map)


def test_fine_filter_separates_same_group_senses(lexicon, type_map):
    [cs] = detect_and_generate(lexicon, Document("d", "culture"))
    coarse = filter_candidates(cs, oracle_allowed("C-culturetest", "oracle_coarse", lexicon, type_map),
                               lexicon, type_map)
    fine = filter_candidates(cs, oracle_allowed("C-culturetest", "oracle_fine", lexicon, type_map),
                             lexicon, type_map, fine=True)
    assert coarse.cuis == ["C-cellculture", "C-culturetest"]
    assert fine.cuis == ["C-culturetest"]


def test_mode_none_keeps_rank_one(lexicon, type_map, fixture_sets):
    result = link_corpus(fixture_sets, "none", lexicon, type_map)
    for lm, cs in zip(result.mentions, fixture_sets):
        assert lm.chosen_cui == cs.candidates[0].cui
        assert lm.surviving == cs


def test_oracle_needs_gold(lexicon, type_map, fixture_sets):
    with pytest.raises(ConfigError):
        link_corpus(fixture_sets, "oracle_coarse", lexicon, type_map)
    with pytest.raises(ConfigError):
        link_corpus(fixture_sets, "predicted", lexicon, type_map)
    with pytest.raises(ConfigError):
        link_corpus(fixture_sets, "sideways", lexicon, type_map)


def test_oracle_unaligned_mentions_counted(lexicon, type_map):
    cs = cold_set(lexicon)
    gold = [GoldAnnotation("d", 0, 3, "C-commoncold")]
    result = link_corpus([cs], "oracle_coarse", lexicon, type_map, gold=gold)
    assert result.unaligned == 1
    assert result.mentions[0].surviving == cs


def test_runny_nose_end_to_end(lexicon, type_map, fixture_docs, fixture_sets, fixture_typer):
    sample = [cs for cs in fixture_sets if cs.mention.doc_id == "runny_nose"]
    result = link_corpus(sample, "predicted", lexicon, type_map, docs=fixture_docs, model=fixture_typer)
    cold = next(lm for lm in result.mentions if lm.mention.surface == "cold")
    assert cold.pre_filter_size == 3
    assert cold.chosen_cui == "C-commoncold"
    assert "Disease or Syndrome" in cold.predicted_groups


def test_scores_and_model_paths_agree(lexicon, type_map, fixture_docs, fixture_sets, fixture_typer):
    scores = model_scores(fixture_sets, fixture_typer, fixture_docs)
    a = link_corpus(fixture_sets, "predicted", lexicon, type_map, docs=fixture_docs, model=fixture_typer)
    b = link_corpus(fixture_sets, "predicted", lexicon, type_map, scores=scores)
    assert a.mentions == b.mentions


def test_abstain_drop_and_passthrough(lexicon, type_map):
    cs = cold_set(lexicon)
    scores = {cs.mention.key: {g: 0.0 for g in type_map.groups}}
    dropped = link_corpus([cs], "predicted", lexicon, type_map, "drop", scores=scores)
    kept = link_corpus([cs], "predicted", lexicon, type_map, "passthrough", scores=scores)
    assert dropped.abstained == 1 and dropped.mentions[0].chosen_cui is None
    assert kept.mentions[0].chosen_cui == cs.candidates[0].cui
    assert dropped.mentions[0].predicted_groups == frozenset()


def test_linked_json_fields(lexicon, type_map):
    cs = cold_set(lexicon)
    rec = link_corpus([cs], "none", lexicon, type_map).mentions[0].to_json()
    assert list(rec) == ["doc_id", "start", "end", "surface", "chosen_cui", "predicted_groups",
                         "pre_filter_size", "post_filter_size", "candidates"]


# ---------------------------------------------------------------- lemmas, randomized

FINE = sorted(TM.fine_types)


@st.composite
def scenario(draw):
    n = draw(st.integers(1, 8))
    concepts = [Concept(f"C{i}", f"c{i}", (), frozenset(draw(st.sets(st.sampled_from(FINE), min_size=1, max_size=3))))
                for i in range(n)]
    order = draw(st.permutations(range(n)))
    cs = ranked(Mention("d", 0, 1, "x"), [(f"C{i}", 1.0) for i in order])
    gold = draw(st.sampled_from([f"C{i}" for i in range(n)]))
    return Lexicon(concepts), cs, gold


@given(scenario(), st.sampled_from(["oracle_coarse", "oracle_fine"]))
def test_survival_and_rank_lemmas(sc, mode):
    lex, cs, gold = sc
    allowed = oracle_allowed(gold, mode, lex, TM)
    out = filter_candidates(cs, allowed, lex, TM, "drop", fine=mode == "oracle_fine")
    assert gold in out.cuis
    assert out.cuis.index(gold) <= cs.cuis.index(gold)
    assert len(out) <= len(cs)
    it = iter(cs.cuis)
    assert all(c in it for c in out.cuis)  # subsequence


@given(scenario())
def test_dominance_chain(sc):
    lex, cs, gold = sc
    none_ok = cs.cuis[0] == gold
    coarse = filter_candidates(cs, oracle_allowed(gold, "oracle_coarse", lex, TM), lex, TM)
    fine = filter_candidates(cs, oracle_allowed(gold, "oracle_fine", lex, TM), lex, TM, fine=True)
    coarse_ok = coarse.cuis[0] == gold
    fine_ok = fine.cuis[0] == gold
    assert (not none_ok or coarse_ok) and (not coarse_ok or fine_ok)


@given(scenario())
def test_superset_allowed_is_identity(sc):
    lex, cs, _ = sc
    allowed = set()
    for c in lex.concepts.values():
        allowed |= groups_of(TM, c.fine_types)
    assert filter_candidates(cs, allowed, lex, TM) == cs
