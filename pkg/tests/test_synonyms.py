"""Synonym dictionary loading, lookup and invariants."""

import pytest

from labharmony.errors import OverlapError, ParseError
from labharmony.synonyms import load_seed_dictionary, parse_synonym_lines


def test_group_lookup_includes_all_members(tiny_dict):
    assert tiny_dict.group_of("plas", "sample") == {"plasma", "blood plasma", "plas"}


def test_unknown_term_singleton(tiny_dict):
    assert tiny_dict.group_of("xyzzy", "unit") == {"xyzzy"}


def test_lookup_normalizes(tiny_dict):
    assert "10^3/l" in tiny_dict.group_of("THOU/L", "unit")
    assert "10^3/l" in tiny_dict.group_of("10³/L", "unit")


def test_membership_reflexive(tiny_dict):
    """Every term belongs to its own group, known or not."""
    from labharmony.textnorm import normalize_text

    for category in ("test", "sample", "unit"):
        for term in ("anything", "plasma", "10^3/l", "THOU/L", "  Mixed Case "):
            assert normalize_text(term) in tiny_dict.group_of(term, category)


def test_equivalence_lookup(tiny_dict):
    group = tiny_dict.group_of("hgb", "test")
    for member in group:
        assert tiny_dict.group_of(member, "test") == group


def test_parse_basic():
    d = parse_synonym_lines([
        "# comment",
        "unit: mg/dl, mg/100ml",
        "unit: g/l",
        "",
        "sample: serum, ser",
    ])
    assert len(d.unit_groups) == 2
    assert len(d.sample_groups) == 1
    assert len(d.test_groups) == 0


def test_parse_empty_file():
    d = parse_synonym_lines([])
    assert d.size() == {"test": 0, "sample": 0, "unit": 0}


def test_parse_missing_prefix():
    with pytest.raises(ParseError):
        parse_synonym_lines(["mg/dl, mg/100ml"])


def test_parse_unknown_category():
    with pytest.raises(ParseError):
        parse_synonym_lines(["units: mg/dl, g/l"])


def test_overlap_is_load_error():
    with pytest.raises(OverlapError):
        parse_synonym_lines([
            "sample: plasma, plas",
            "sample: plas, blood plasma",
        ])


def test_in_group_duplicates_collapse():
    d = parse_synonym_lines(["unit: MG/DL, mg/dl, mg/100ml"])
    assert d.unit_groups[0] == frozenset({"mg/dl", "mg/100ml"})


def test_same_group(tiny_dict):
    assert tiny_dict.same_group("hgb", "Hemoglobin", "test")
    assert not tiny_dict.same_group("hgb", "glucose", "test")
    assert tiny_dict.same_group("unknown", "unknown", "unit")


def test_seed_dictionary_loads_and_covers_quoted_groups():
    d = load_seed_dictionary()
    sizes = d.size()
    assert sizes["unit"] >= 40
    assert sizes["sample"] >= 10
    assert {"plasma", "blood plasma", "plas"} <= d.group_of("plasma", "sample")
    assert "thou/l" in d.group_of("10*3/l", "unit")
