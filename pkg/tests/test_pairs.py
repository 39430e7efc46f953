"""Pair factory: label soundness, class mix, hard mining, determinism."""

import pytest

from labharmony.errors import InsufficientPool, ValidationError
from labharmony.pairs import (
    CORRUPTED,
    GenerationSchedule,
    LabeledPair,
    PairFactory,
    generate_dataset,
    is_sound,
    read_pairs,
    synonym_equivalent,
    write_pairs,
)
from labharmony.types import Triad


@pytest.fixture()
def pool():
    return [
        Triad("hemoglobin", "blood", "g/dl"),
        Triad("glucose", "serum", "mg/dl"),
        Triad("glucose", "urine", "mg/dl"),
        Triad("creatinine", "serum", "mg/dl"),
        Triad("platelet count", "blood", "10^3/l"),
        Triad("sodium", "plasma", "mg/dl"),
    ]


@pytest.fixture()
def factory(pool, tiny_dict):
    return PairFactory(pool, tiny_dict, seed=11)


class TestPositive:
    def test_synonym_substitution_keeps_label(self, factory):
        pair = factory.make_positive(Triad("hemoglobin", "blood", "g/dl"))
        assert pair.label == 1 and pair.corruption_class == "POS"
        assert synonym_equivalent(pair.left, pair.right, factory.synonyms)

    def test_hgb_style_positive_possible(self, factory):
        source = Triad("hemoglobin", "blood", "g/dl")
        rights = {factory.make_positive(source).right.test for _ in range(40)}
        assert rights & {"hgb", "hb"}

    def test_no_synonyms_gives_identical_pair(self, tiny_dict):
        factory = PairFactory(
            [Triad("aaa", "bbb", "ccc"), Triad("ddd", "eee", "fff")],
            tiny_dict, seed=0)
        pair = factory.make_positive(Triad("aaa", "bbb", "ccc"))
        assert pair.left == pair.right
        assert pair.label == 1


class TestNegative:
    @pytest.mark.parametrize("cls", ["N1", "N2", "N3"])
    def test_class_contract(self, factory, cls):
        source = Triad("glucose", "serum", "mg/dl")
        for _ in range(20):
            pair = factory.make_negative(source, cls)
            assert pair.label == 0 and pair.corruption_class == cls
            assert is_sound(pair, factory.synonyms)
            for f in CORRUPTED[cls]:
                assert not factory.synonyms.same_group(
                    source.component(f), pair.right.component(f), f)

    def test_insufficient_pool(self, tiny_dict):
        with pytest.raises(InsufficientPool):
            PairFactory([Triad("only one")], tiny_dict, seed=0)
        # all samples identical -> cannot corrupt the sample component
        factory = PairFactory(
            [Triad("a", "serum", "u1"), Triad("b", "serum", "u2")],
            tiny_dict, seed=0)
        with pytest.raises(InsufficientPool):
            factory.make_negative(Triad("a", "serum", "u1"), "N2")

    def test_bad_class_rejected(self, factory):
        with pytest.raises(ValidationError):
            factory.make_negative(Triad("glucose"), "N4")


class TestHardNegatives:
    def test_mined_share_tokens_but_not_equivalent(self, factory):
        from labharmony.textnorm import tokenize

        source = Triad("glucose", "serum", "mg/dl")
        mined = factory.mine_hard_negatives(source, k=5)
        assert mined
        for triad in mined:
            assert not synonym_equivalent(source, triad, factory.synonyms)
            source_tokens = set(tokenize(source.test) + tokenize(source.sample)
                                + tokenize(source.unit))
            cand_tokens = set(tokenize(triad.test) + tokenize(triad.sample)
                              + tokenize(triad.unit))
            assert source_tokens & cand_tokens

    def test_urine_variant_is_mined_for_serum_source(self, factory):
        mined = factory.mine_hard_negatives(Triad("glucose", "serum", "mg/dl"), k=5)
        assert Triad("glucose", "urine", "mg/dl") in mined

    def test_k_zero_empty(self, factory):
        assert factory.mine_hard_negatives(Triad("glucose", "serum", "mg/dl"), 0) == []

    def test_pool_of_synonyms_only_yields_nothing(self, tiny_dict):
        factory = PairFactory(
            [Triad("hemoglobin", "blood", "g/dl"), Triad("hgb", "blood", "gm/dl")],
            tiny_dict, seed=0)
        assert factory.mine_hard_negatives(Triad("hemoglobin", "blood", "g/dl")) == []


class TestSchedule:
    def test_fraction_validation(self):
        with pytest.raises(ValidationError):
            GenerationSchedule(total=10, negative_fractions=(0.5, 0.5, 0.5))
        with pytest.raises(ValidationError):
            GenerationSchedule(total=10, hard_stages=((0.5, 0.8), (1.0, 0.2)))
        with pytest.raises(ValidationError):
            GenerationSchedule(total=0)

    def test_hard_fraction_lookup(self):
        s = GenerationSchedule(total=100)
        assert s.hard_fraction(0.1) == pytest.approx(0.2)
        assert s.hard_fraction(0.9) == pytest.approx(0.5)


class TestGenerate:
    def test_class_mix_exact_at_any_prefix(self, pool, tiny_dict):
        schedule = GenerationSchedule(total=4000)
        pairs = list(generate_dataset(pool, tiny_dict, schedule, seed=3))
        assert len(pairs) == 4000
        for prefix in (400, 1000, 4000):
            counts = {}
            for p in pairs[:prefix]:
                counts[p.corruption_class] = counts.get(p.corruption_class, 0) + 1
            assert counts["POS"] == pytest.approx(prefix * 0.5, abs=2)
            for c in ("N1", "N2", "N3"):
                assert counts[c] == pytest.approx(prefix / 6, abs=2)

    def test_all_generated_pairs_sound(self, pool, tiny_dict):
        schedule = GenerationSchedule(total=600)
        for pair in generate_dataset(pool, tiny_dict, schedule, seed=5):
            assert is_sound(pair, tiny_dict)

    def test_difficulty_ramp(self, pool, tiny_dict):
        schedule = GenerationSchedule(total=3000)
        pairs = list(generate_dataset(pool, tiny_dict, schedule, seed=1))
        negatives = [p for p in pairs if p.label == 0]
        first = [p for p in negatives[: len(negatives) // 3]]
        last = [p for p in negatives[len(negatives) // 3:]]
        frac_first = sum(p.difficulty == "hard" for p in first) / len(first)
        frac_last = sum(p.difficulty == "hard" for p in last) / len(last)
        assert frac_first < frac_last

    def test_byte_identical_given_seed(self, pool, tiny_dict, tmp_path):
        schedule = GenerationSchedule(total=500)
        p1 = tmp_path / "a.jsonl"
        p2 = tmp_path / "b.jsonl"
        write_pairs(p1, generate_dataset(pool, tiny_dict, schedule, seed=9))
        write_pairs(p2, generate_dataset(pool, tiny_dict, schedule, seed=9))
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_differs(self, pool, tiny_dict, tmp_path):
        schedule = GenerationSchedule(total=200)
        a = list(generate_dataset(pool, tiny_dict, schedule, seed=1))
        b = list(generate_dataset(pool, tiny_dict, schedule, seed=2))
        assert a != b


class TestPairFile:
    def test_round_trip(self, pool, tiny_dict, tmp_path):
        pairs = list(generate_dataset(pool, tiny_dict,
                                      GenerationSchedule(total=50), seed=2))
        path = tmp_path / "pairs.jsonl"
        assert write_pairs(path, pairs) == 50
        assert read_pairs(path) == pairs

    def test_gzip_round_trip(self, pool, tiny_dict, tmp_path):
        pairs = list(generate_dataset(pool, tiny_dict,
                                      GenerationSchedule(total=20), seed=2))
        path = tmp_path / "pairs.jsonl.gz"
        write_pairs(path, pairs)
        assert read_pairs(path) == pairs


def test_labeled_pair_invariants():
    with pytest.raises(ValidationError):
        LabeledPair(Triad("a"), Triad("b"), label=1, corruption_class="N1")
    with pytest.raises(ValidationError):
        LabeledPair(Triad("a"), Triad("b"), label=0, corruption_class="POS")
    with pytest.raises(ValidationError):
        LabeledPair(Triad("a"), Triad("b"), label=0, corruption_class="N1",
                    difficulty="medium")
