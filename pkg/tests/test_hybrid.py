"""Hybrid retrieval: fusion arithmetic, ordering, modes, normalization."""

import numpy as np
import pytest

from labharmony.errors import EmptyCandidateList, IndexMismatch
from labharmony.hybrid import HybridRetriever, normalize_candidate_scores
from labharmony.lexical import Bm25Index
from labharmony.semantic import HashingEmbedder, SemanticIndex, cosine_similarity, record_text
from labharmony.types import QueryRecord, ReferenceRecord, Triad, WeightVector


def brute_force_rank(retriever, query, weights, top_k):
    """Exhaustive fused scoring, independent of the retrieve() path."""
    triad = query.triad if isinstance(query, QueryRecord) else query
    qvec = retriever.semantic_.provider_.embed(record_text(triad))
    rows = []
    for rid, record in retriever.records_.items():
        lex = retriever.lexical_.fielded_bm25(triad, weights, rid)
        sem = max(0.0, cosine_similarity(qvec, retriever.semantic_.vector(rid)))
        fused = weights.alpha * lex + weights.beta * sem
        if fused > 0.0:
            rows.append((rid, fused))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:top_k]


class TestRetrieve:
    def test_candidate_invariants(self, small_retriever):
        out = small_retriever.retrieve(Triad("glucose", "serum", "mg/dl"))
        assert [c.rank for c in out] == list(range(1, len(out) + 1))
        for c in out:
            assert c.fused_score == pytest.approx(
                c.lexical_score + c.semantic_score, abs=1e-9)
            assert 0.0 <= c.semantic_score <= 1.0
            assert c.lexical_score >= 0.0

    def test_ordering_descending_with_id_ties(self, small_retriever):
        out = small_retriever.retrieve(Triad("glucose", "serum", "mg/dl"))
        for a, b in zip(out, out[1:]):
            assert (a.fused_score, b.record_id) >= (b.fused_score, a.record_id)

    def test_matches_brute_force_on_random_corpora(self, tiny_dict):
        rng = np.random.default_rng(5)
        words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
        samples = ["serum", "plasma", "urine", ""]
        units = ["mg/dl", "g/l", ""]
        for trial in range(8):
            n = int(rng.integers(2, 15))
            records = []
            for i in range(n):
                test = " ".join(rng.choice(words, size=rng.integers(1, 3)))
                records.append(ReferenceRecord(
                    id=f"x{i}", triad=Triad(test,
                                            str(rng.choice(samples)),
                                            str(rng.choice(units)))))
            retriever = HybridRetriever(
                synonyms=tiny_dict, provider=HashingEmbedder(dimension=32)
            ).fit(records)
            w = WeightVector(float(rng.uniform(0, 3)), float(rng.uniform(0, 3)),
                             float(rng.uniform(0, 2)), float(rng.uniform(0, 2)),
                             float(rng.uniform(0, 2)))
            query = Triad(str(rng.choice(words)), str(rng.choice(samples)), "mg/dl")
            got = [(c.record_id, c.fused_score)
                   for c in retriever.retrieve(query, weights=w, top_k=5)]
            want = brute_force_rank(retriever, query, w, 5)
            assert [g[0] for g in got] == [w_[0] for w_ in want]
            np.testing.assert_allclose([g[1] for g in got],
                                       [w_[1] for w_ in want], atol=1e-9)

    def test_rank1_maximizes_fused_over_whole_set(self, small_retriever):
        query = Triad("glucose", "serum", "mg/dl")
        top = small_retriever.retrieve(query, top_k=1)[0]
        everything = brute_force_rank(small_retriever, query,
                                      small_retriever.weights or WeightVector(),
                                      len(small_retriever.records_))
        assert top.record_id == everything[0][0]

    def test_accepts_query_record(self, small_retriever):
        q = QueryRecord(triad=Triad("glucose", "serum", "mg/dl"))
        assert small_retriever.retrieve(q)[0].record_id == "r1"

    def test_empty_index_returns_empty(self, tiny_dict):
        retriever = HybridRetriever(synonyms=tiny_dict,
                                    provider=HashingEmbedder(dimension=16)).fit([])
        assert retriever.retrieve(Triad("anything")) == []

    def test_no_positive_evidence_returns_empty(self, small_records, tiny_dict):
        retriever = HybridRetriever(
            synonyms=tiny_dict, provider=HashingEmbedder(dimension=64),
            weights=WeightVector(1.0, 0.0, 1.0, 1.0, 1.0),
        ).fit(small_records)
        assert retriever.retrieve(Triad("qqqq", "wwww", "zzzz")) == []

    def test_determinism_across_threads(self, small_retriever):
        queries = [Triad("glucose", "serum", "mg/dl"), Triad("hgb", "blood", "g/dl")] * 5
        single = small_retriever.retrieve_batch(queries, n_threads=1)
        multi = small_retriever.retrieve_batch(queries, n_threads=4)
        assert single == multi

    def test_equal_fused_scores_rank_by_id(self, tiny_dict):
        """Identical content means identical scores; ids break the tie."""
        records = [ReferenceRecord(id=rid, triad=Triad("glucose", "serum", "mg/dl"))
                   for rid in ("zz", "aa", "mm")]
        retriever = HybridRetriever(
            synonyms=tiny_dict, provider=HashingEmbedder(dimension=32)
        ).fit(records)
        out = retriever.retrieve(Triad("glucose", "serum", "mg/dl"))
        assert [c.record_id for c in out] == ["aa", "mm", "zz"]
        assert len({c.fused_score for c in out}) == 1


class TestModes:
    def test_lexical_mode_zeroes_beta(self, small_retriever):
        q = Triad("glucose", "serum", "mg/dl")
        lex = small_retriever.retrieve_mode(q, "lexical")
        assert all(c.semantic_score * 0 == 0 and c.fused_score == pytest.approx(
            c.lexical_score, abs=1e-9) for c in lex)

    def test_semantic_mode_zeroes_alpha(self, small_retriever):
        q = Triad("glucose", "serum", "mg/dl")
        sem = small_retriever.retrieve_mode(q, "semantic")
        assert all(c.fused_score == pytest.approx(c.semantic_score, abs=1e-9)
                   for c in sem)

    def test_hybrid_mode_identity(self, small_retriever):
        q = Triad("glucose", "serum", "mg/dl")
        assert small_retriever.retrieve_mode(q, "hybrid") == small_retriever.retrieve(q)

    def test_unknown_mode(self, small_retriever):
        with pytest.raises(ValueError):
            small_retriever.retrieve_mode(Triad("x"), "both")


class TestNormalization:
    def _candidates(self, retriever):
        return retriever.retrieve(Triad("glucose", "serum", "mg/dl"), top_k=5)

    def test_affine_map(self, small_retriever):
        out = normalize_candidate_scores(self._candidates(small_retriever))
        norms = [c.retrieval_norm for c in out]
        assert norms[0] == pytest.approx(1.0)
        assert min(norms) == pytest.approx(0.0)
        assert all(0.0 <= v <= 1.0 for v in norms)

    def test_affine_map_exact_values(self):
        from labharmony.hybrid import RankedCandidate

        cands = [RankedCandidate(f"r{i}", s, 0.0, s, i + 1)
                 for i, s in enumerate((4.0, 2.0, 0.0))]
        out = normalize_candidate_scores(cands)
        assert [c.retrieval_norm for c in out] == [1.0, 0.5, 0.0]

    def test_single_candidate_maps_to_one(self, small_retriever):
        out = normalize_candidate_scores(self._candidates(small_retriever)[:1])
        assert out[0].retrieval_norm == 1.0

    def test_degenerate_equal_scores(self, small_retriever):
        cands = self._candidates(small_retriever)[:3]
        from dataclasses import replace
        equal = [replace(c, fused_score=3.0) for c in cands]
        out = normalize_candidate_scores(equal)
        assert all(c.retrieval_norm == 1.0 for c in out)

    def test_empty_rejected(self):
        with pytest.raises(EmptyCandidateList):
            normalize_candidate_scores([])


def test_index_mismatch_detected(small_records, tiny_dict):
    lexical = Bm25Index(synonyms=tiny_dict).fit(small_records)
    semantic = SemanticIndex(provider=HashingEmbedder(dimension=16)).fit(small_records[:3])
    with pytest.raises(IndexMismatch):
        HybridRetriever(synonyms=tiny_dict).from_parts(lexical, semantic, small_records)


def test_from_parts_aligns_differing_row_orders(small_records, tiny_dict):
    """Separately loaded artifacts may order ids differently; scores must
    still line up per record."""
    provider = HashingEmbedder(dimension=32)
    lexical = Bm25Index(synonyms=tiny_dict).fit(small_records)
    shuffled = SemanticIndex(provider=provider).fit(list(reversed(small_records)))
    retriever = HybridRetriever(synonyms=tiny_dict, provider=provider).from_parts(
        lexical, shuffled, small_records)
    straight = HybridRetriever(synonyms=tiny_dict, provider=provider).fit(small_records)
    query = Triad("glucose", "serum", "mg/dl")
    assert ([(c.record_id, round(c.fused_score, 12)) for c in retriever.retrieve(query)]
            == [(c.record_id, round(c.fused_score, 12)) for c in straight.retrieve(query)])


def test_estimator_get_params(small_retriever):
    params = small_retriever.get_params()
    assert params["top_k"] == 10
    assert "synonyms" in params
