"""Metric suite vs a brute-force reference implementation."""

from math import log2

import numpy as np
import pytest

from labharmony.errors import MissingGold
from labharmony.metrics import (
    DEFAULT_KS,
    compute_report,
    format_report_table,
    rank_of,
    reciprocal_rank,
)


def brute_force(runs, gold, ks):
    """Independent loop-and-count implementation of every metric."""
    n = len(runs)
    out = {"precision": {}, "recall": {}, "success": {}, "ndcg": {}, "mrr_at": {}}
    rr = []
    for qid, ranked in runs.items():
        g = gold[qid]
        rr.append(1.0 / (ranked.index(g) + 1) if g in ranked else 0.0)
    mrr = sum(rr) / n
    for k in ks:
        hits = ndcg = rrk = 0.0
        for qid, ranked in runs.items():
            g = gold[qid]
            topk = ranked[:k]
            if g in topk:
                r = topk.index(g) + 1
                hits += 1
                ndcg += 1.0 / log2(r + 1)
                rrk += 1.0 / r
        out["precision"][k] = hits / (k * n)
        out["recall"][k] = hits / n
        out["success"][k] = hits / n
        out["ndcg"][k] = ndcg / n
        out["mrr_at"][k] = rrk / n
    out["mrr"] = mrr
    out["map"] = mrr
    return out


def test_reciprocal_rank_cases():
    assert reciprocal_rank(["a", "b", "c"], "a") == 1.0
    assert reciprocal_rank(["a", "b", "c", "d"], "d") == 0.25
    assert reciprocal_rank(["a", "b"], "z") == 0.0
    assert rank_of([], "x") == 0


def test_hand_computed_mrr():
    runs = {"q1": ["g1", "x"], "q2": ["x", "g2"], "q3": ["x", "y", "z", "g3"]}
    gold = {"q1": "g1", "q2": "g2", "q3": "g3"}
    report = compute_report(runs, gold)
    assert report.mrr == pytest.approx((1 + 0.5 + 0.25) / 3)


def test_single_relevant_ndcg():
    """Gold at rank 3 gives NDCG@10 = 1/log2(4) = 0.5."""
    runs = {"q": ["a", "b", "g", "c"]}
    report = compute_report(runs, {"q": "g"})
    assert report.ndcg[10] == pytest.approx(0.5)


def test_perfect_run():
    runs = {f"q{i}": [f"g{i}", "x", "y"] for i in range(4)}
    gold = {f"q{i}": f"g{i}" for i in range(4)}
    report = compute_report(runs, gold)
    assert report.mrr == 1.0 and report.map == 1.0
    for k in DEFAULT_KS:
        assert report.recall[k] == 1.0
        assert report.success[k] == 1.0
        assert report.precision[k] == pytest.approx(min(1.0, 1 / k) if k > 1 else 1.0)


def test_missing_gold_raises():
    with pytest.raises(MissingGold):
        compute_report({"q": ["a"]}, {})


def test_empty_runs():
    report = compute_report({}, {})
    assert report.mrr == 0.0 and report.n_queries == 0


def test_oracle_equivalence_random_instances():
    """Every metric bit-equal to the brute-force reference on 1000 draws."""
    rng = np.random.default_rng(2024)
    ids = [f"r{i}" for i in range(30)]
    for _ in range(1000):
        n_queries = int(rng.integers(1, 6))
        runs, gold = {}, {}
        for qi in range(n_queries):
            depth = int(rng.integers(0, 12))
            ranked = list(rng.choice(ids, size=depth, replace=False))
            gold_id = (str(rng.choice(ranked)) if ranked and rng.random() < 0.8
                       else str(rng.choice(ids)))
            runs[f"q{qi}"] = ranked
            gold[f"q{qi}"] = gold_id
        report = compute_report(runs, gold)
        want = brute_force(runs, gold, DEFAULT_KS)
        assert report.mrr == want["mrr"]
        assert report.map == want["map"]
        for k in DEFAULT_KS:
            assert report.precision[k] == want["precision"][k]
            assert report.recall[k] == want["recall"][k]
            assert report.success[k] == want["success"][k]
            assert report.ndcg[k] == want["ndcg"][k]
            assert report.mrr_at[k] == want["mrr_at"][k]
        # single-relevant identities, bit-exact
        assert report.map == report.mrr
        for k in DEFAULT_KS:
            assert report.recall[k] == report.success[k]


def test_monotonicity_in_k():
    rng = np.random.default_rng(5)
    ids = [f"r{i}" for i in range(20)]
    for _ in range(50):
        ranked = list(rng.choice(ids, size=10, replace=False))
        runs = {"q": ranked}
        gold = {"q": str(rng.choice(ids))}
        report = compute_report(runs, gold, ks=(1, 2, 3, 5, 8, 10))
        ks = sorted(report.recall)
        for a, b in zip(ks, ks[1:]):
            assert report.recall[a] <= report.recall[b]
            assert report.success[a] <= report.success[b]
            assert report.mrr_at[a] <= report.mrr_at[b]


def test_table_formatting():
    runs = {"q": ["g", "x"]}
    table = format_report_table({"run": compute_report(runs, {"q": "g"})})
    assert "MRR" in table and "Success@10" in table and "run" in table
