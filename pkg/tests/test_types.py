"""Domain type invariants."""

import pytest

from labharmony.errors import ValidationError
from labharmony.types import (
    QueryRecord,
    QueryStats,
    ReferenceRecord,
    TagStatus,
    Triad,
    WeightVector,
)


class TestTriad:
    def test_normalized_on_construction(self):
        t = Triad("  Hemoglobin ", "BLOOD", "g/dL")
        assert (t.test, t.sample, t.unit) == ("hemoglobin", "blood", "g/dl")

    def test_equality_on_normalized_fields(self):
        assert Triad("Glucose", "Serum", "MG/DL") == Triad("glucose", "serum", "mg/dl")

    def test_empty_test_rejected(self):
        with pytest.raises(ValidationError):
            Triad("   ")

    def test_empty_sample_and_unit_allowed(self):
        t = Triad("glucose")
        assert t.sample == "" and t.unit == ""

    def test_hashable(self):
        assert len({Triad("a b"), Triad("A  B")}) == 1


class TestReferenceRecord:
    def test_conversion_factor_positive(self):
        with pytest.raises(ValidationError):
            ReferenceRecord(id="x", triad=Triad("t"), conversion_factor=0.0)

    def test_synonyms_normalized(self):
        r = ReferenceRecord(id="x", triad=Triad("t"), synonyms=(" HGB ", ""))
        assert r.synonyms == ("hgb",)


class TestQueryRecord:
    def test_stats_ordering_enforced(self):
        with pytest.raises(ValidationError):
            QueryStats(min=5, max=1, mean=3, std=0)
        with pytest.raises(ValidationError):
            QueryStats(min=0, max=10, mean=5, std=-1)

    def test_valid_stats(self):
        QueryRecord(triad=Triad("t"), stats=QueryStats(0, 10, 5, 2))

    def test_code_hint_shape(self):
        QueryRecord(triad=Triad("t"), code_hint="2345-7")
        with pytest.raises(ValidationError):
            QueryRecord(triad=Triad("t"), code_hint="23457")

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValidationError):
            QueryRecord(triad=Triad("t"), frequency=-1)


class TestWeightVector:
    def test_bounds(self):
        WeightVector(0, 10, 5, 0, 5)
        with pytest.raises(ValidationError):
            WeightVector(alpha=10.5)
        with pytest.raises(ValidationError):
            WeightVector(w_test=5.5)
        with pytest.raises(ValidationError):
            WeightVector(beta=-0.1)

    def test_roundtrip(self):
        w = WeightVector(1, 2, 3, 4, 5)
        assert WeightVector.from_sequence(w.as_tuple()) == w


class TestTagStatus:
    def test_parse_known(self):
        for value in ("Missing", "Verified", "Pending", "Human", "Copy", "Reranked"):
            assert TagStatus.parse(value).value == value

    def test_parse_unknown_rejected(self):
        with pytest.raises(ValidationError):
            TagStatus.parse("Done")
