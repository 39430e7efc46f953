"""Compiled MRR objective and the ablation harness."""

import numpy as np
import pytest

from labharmony.ablation import MrrObjective, run_ablation, tune_mode
from labharmony.benchmark import make_benchmark
from labharmony.hybrid import HybridRetriever
from labharmony.metrics import compute_report
from labharmony.semantic import HashingEmbedder
from labharmony.synonyms import load_seed_dictionary
from labharmony.types import WeightVector


@pytest.fixture(scope="module")
def setup():
    synonyms = load_seed_dictionary()
    bench = make_benchmark(n_records=300, n_eval=40, n_tune=20, seed=11,
                           synonyms=synonyms)
    retriever = HybridRetriever(
        synonyms=synonyms, provider=HashingEmbedder(dimension=64)
    ).fit(bench.records)
    qids = sorted(bench.eval_gold)
    return bench, retriever, qids


class TestMrrObjective:
    def test_matches_retrieval_path(self, setup):
        """The dense evaluator must agree with MRR over real retrieve() runs."""
        bench, retriever, qids = setup
        objective = MrrObjective(retriever, bench.eval_queries, bench.eval_gold,
                                 qids, cutoff=10)
        rng = np.random.default_rng(0)
        for _ in range(4):
            theta = WeightVector(
                float(rng.uniform(0, 5)), float(rng.uniform(0, 5)),
                float(rng.uniform(0.1, 3)), float(rng.uniform(0.1, 3)),
                float(rng.uniform(0.1, 3)))
            runs = {
                qid: [c.record_id for c in retriever.retrieve(q, weights=theta,
                                                              top_k=10)]
                for qid, q in zip(qids, bench.eval_queries)
            }
            direct = compute_report(runs, bench.eval_gold).mrr
            assert objective(theta) == pytest.approx(direct, abs=1e-9)

    def test_zero_weights_zero_mrr(self, setup):
        bench, retriever, qids = setup
        objective = MrrObjective(retriever, bench.eval_queries, bench.eval_gold,
                                 qids, cutoff=10)
        assert objective(WeightVector(0.0, 0.0, 1.0, 1.0, 1.0)) == 0.0

    def test_ranks_use_cutoff(self, setup):
        bench, retriever, qids = setup
        wide = MrrObjective(retriever, bench.eval_queries, bench.eval_gold,
                            qids, cutoff=10)
        narrow = MrrObjective(retriever, bench.eval_queries, bench.eval_gold,
                              qids, cutoff=1)
        theta = WeightVector()
        assert narrow(theta) <= wide(theta)


class TestTuneMode:
    def test_semantic_requires_no_search(self, setup):
        bench, retriever, qids = setup
        objective = MrrObjective(retriever, bench.eval_queries, bench.eval_gold, qids)
        theta, value = tune_mode(objective, "semantic")
        assert theta.alpha == 0.0
        assert 0.0 <= value <= 1.0

    def test_lexical_tunes_field_weights(self, setup):
        bench, retriever, qids = setup
        objective = MrrObjective(retriever, bench.eval_queries, bench.eval_gold, qids)
        theta, value = tune_mode(objective, "lexical", budget=15, seed=0)
        assert theta.beta == 0.0
        assert value >= objective(WeightVector(1.0, 0.0, 1.0, 1.0, 1.0)) - 1e-9


class TestRunAblation:
    def test_single_mode_row(self, setup):
        bench, retriever, qids = setup
        result = run_ablation(retriever, bench.eval_queries, bench.eval_gold,
                              qids, modes=("lexical",), budget=12, seed=0)
        assert list(result.reports) == ["lexical"]
        assert "lexical" in result.table
        assert result.as_dict()["modes"]["lexical"]["mrr"] >= 0.0

    def test_hybrid_at_least_projections_on_tune_set(self, setup):
        bench, retriever, qids = setup
        result = run_ablation(retriever, bench.eval_queries, bench.eval_gold,
                              qids, modes=("lexical", "semantic", "hybrid"),
                              budget=30, seed=0)
        hybrid = result.reports["hybrid"].mrr
        assert hybrid >= result.reports["lexical"].mrr - 1e-9
        assert hybrid >= result.reports["semantic"].mrr - 1e-9
