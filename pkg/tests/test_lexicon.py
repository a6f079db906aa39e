import pytest
from hypothesis import given, strategies as st

from typelink.errors import DuplicateCui, MissingTypes, ParseError
from typelink.lexicon import load_lexicon, lookup, norm_key, normalize, tokenize


def lex_file(tmp_path, text):
    p = tmp_path / "lex.tsv"
    p.write_text(text, encoding="utf-8")
    return p


@pytest.mark.parametrize("text, expected", [
    ("Common Cold,", ["common", "cold"]),
    ("  ", []),
    ("COLD", ["cold"]),
    ("(non-small) cell", ["non-small", "cell"]),
    ("... --", []),
])
def test_normalize(text, expected):
    assert normalize(text) == expected


@given(st.text())
def test_normalize_idempotent(text):
    once = normalize(text)
    assert normalize(" ".join(once)) == once


@given(st.text())
def test_tokenize_agrees_with_normalize(text):
    toks = tokenize(text)
    assert [t.text for t in toks] == normalize(text)
    for t in toks:
        assert text[t.start:t.end].lower() == t.text


def test_load_entries(tmp_path):
    lex = load_lexicon(lex_file(tmp_path, (
        "C1\tCommon Cold\tcold|head cold\tDisease or Syndrome\n"
        "C2\tAspirin\t\tOrganic Chemical;Pharmacologic Substance\n")))
    assert {k for k, v in lex.alias_index.items() if "C1" in v} == {"common cold", "cold", "head cold"}
    assert [k for k, v in lex.alias_index.items() if "C2" in v] == ["aspirin"]
    assert lex["C2"].fine_types == {"Organic Chemical", "Pharmacologic Substance"}


def test_duplicate_cui(tmp_path):
    with pytest.raises(DuplicateCui):
        load_lexicon(lex_file(tmp_path, "C1\tA\t\tFinding\nC1\tB\t\tFinding\n"))


def test_missing_types(tmp_path):
    with pytest.raises(MissingTypes):
        load_lexicon(lex_file(tmp_path, "C1\tA\t\t\n"))


def test_malformed_line(tmp_path):
    with pytest.raises(ParseError) as exc:
        load_lexicon(lex_file(tmp_path, "C1\tA\t\tFinding\nC2\tB\n"))
    assert exc.value.line == 2


def test_unknown_type_checked_against_map(tmp_path, type_map):
    with pytest.raises(ParseError):
        load_lexicon(lex_file(tmp_path, "C1\tA\t\tMade Up Type\n"), type_map)


def test_cold_ambiguity(lexicon):
    got = [c.cui for c in lookup(lexicon, "Cold")]
    assert got == ["C-coldbrand", "C-coldtemp", "C-commoncold"]
    assert lookup(lexicon, "Cold") == lookup(lexicon, "Cold")


def test_unknown_surface(lexicon):
    assert lookup(lexicon, "zzz-unknown") == []


def test_bundled_lexicon_spans_all_groups(lexicon, type_map):
    groups = set()
    for c in lexicon.concepts.values():
        groups |= c.groups(type_map)
    assert groups == set(type_map.groups)


def test_every_concept_reachable_by_preferred_name(lexicon):
    for c in lexicon.concepts.values():
        assert c in lookup(lexicon, c.preferred_name)


def test_index_references_known_cuis(lexicon):
    for cuis in lexicon.alias_index.values():
        assert all(c in lexicon for c in cuis)


@given(st.sampled_from(["cold", "Head  Cold!", "ASA", "low-dose aspirin", "(MS)", "nothing here"]))
def test_lookup_normalization_invariant(lexicon, surface):
    assert lookup(lexicon, surface) == lookup(lexicon, norm_key(surface))
