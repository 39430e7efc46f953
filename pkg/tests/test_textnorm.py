"""Normalization and tokenization contracts."""

from hypothesis import given, strategies as st

from labharmony.textnorm import normalize_text, tokenize


def test_whitespace_and_case():
    assert normalize_text("  Hemoglobin ") == "hemoglobin"


def test_superscript_to_caret():
    assert normalize_text("10³/L") == "10^3/l"
    assert normalize_text("m²") == "m^2"
    assert normalize_text("10¹⁰/L") == "10^10/l"


def test_empty_is_fixed_point():
    assert normalize_text("") == ""


def test_inner_whitespace_collapses():
    assert normalize_text("blood \t  plasma\n") == "blood plasma"


def test_nfkc_applies():
    # fullwidth letters and the micro sign both have NFKC mappings
    assert normalize_text("ＭＧ/ＤＬ") == "mg/dl"
    assert normalize_text("µmol/L") == normalize_text("μmol/l")


@given(st.text(max_size=60))
def test_idempotent(raw):
    once = normalize_text(raw)
    assert normalize_text(once) == once


@given(st.text(max_size=60))
def test_no_boundary_whitespace(raw):
    out = normalize_text(raw)
    assert out == out.strip()
    assert "  " not in out


def test_tokenize_slash_keeps_whole_and_parts():
    assert tokenize("mg/dl") == ["mg/dl", "mg", "dl"]
    assert tokenize("glucose serum") == ["glucose", "serum"]
    assert tokenize("serum/plasma sample") == ["serum/plasma", "serum", "plasma", "sample"]


def test_tokenize_bare_slash():
    assert tokenize("/") == ["/"]
    assert tokenize("") == []
