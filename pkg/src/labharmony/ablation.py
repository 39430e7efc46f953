"""Ablation harness: lexical / semantic / hybrid / hybrid+rerank.

Tuning evaluates thousands of weight configurations, so the MRR
objective is compiled once per (index, query set): per-field BM25 scores
and clipped cosines go into dense matrices and each theta evaluation is
a couple of numpy contractions. Reciprocal ranks are truncated at the
retrieval cutoff, which makes the objective equal the MRR of the
reported top-k runs.

Each retrieval paradigm is tuned independently (the lexical arm over the
field weights, the hybrid arm over all five parameters); the hybrid
tuner's initial design additionally contains the tuned-lexical and
semantic-only configurations, which are feasible hybrid points, so tuned
hybrid can never fall below either projection on the tuning set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayesopt import TunerConfig, tune
from .hybrid import HybridRetriever, normalize_candidate_scores
from .lexical import expand_query
from .metrics import DEFAULT_KS, MetricReport, compute_report, format_report_table
from .pairs import GenerationSchedule, PairFactory
from .reranker import CompatibilityClassifier, TrainConfig, override_top1, rerank
from .semantic import record_text
from .types import FIELD_WEIGHT_BOUNDS, QueryRecord, WeightVector

MODES = ("lexical", "semantic", "hybrid", "hybrid+rerank")


class MrrObjective:
    """Dense-matrix MRR evaluator for weight tuning on a fixed query set."""

    def __init__(self, retriever: HybridRetriever, queries: list[QueryRecord],
                 gold: dict[str, str], query_ids: list[str], cutoff: int = 10):
        lex_index = retriever.lexical_
        sem_index = retriever.semantic_
        ids = list(sem_index.ids_)
        row_of = {rid: i for i, rid in enumerate(ids)}
        n = len(ids)
        q = len(queries)
        self.cutoff = cutoff

        self._B = np.zeros((q, n, 3))
        self._S = np.zeros((q, n))
        self._gold_row = np.full(q, -1, dtype=np.intp)
        self._id_rank = np.argsort(np.argsort(np.array(ids, dtype=object)))

        # Lexical vectors come out in the lexical index's row order, which
        # matches the store order when both were fit from one record list
        # but may differ for separately loaded artifacts.
        if tuple(lex_index.ids_) == tuple(ids):
            align = None
        else:
            lex_row = {rid: i for i, rid in enumerate(lex_index.ids_)}
            align = np.array([lex_row[rid] for rid in ids], dtype=np.intp)

        for qi, (query, qid) in enumerate(zip(queries, query_ids)):
            triad = query.triad
            expanded = expand_query(triad, lex_index.synonyms_)
            for fi, field_name in enumerate(("test", "sample", "unit")):
                vec = lex_index.field_score_vector(field_name, expanded[field_name])
                self._B[qi, :, fi] = vec if align is None else vec[align]
            qvec = sem_index.provider_.embed(record_text(triad))
            self._S[qi] = sem_index.scores(qvec)
            gold_id = gold.get(qid)
            if gold_id in row_of:
                self._gold_row[qi] = row_of[gold_id]

        self._gold_id_rank = np.where(
            self._gold_row >= 0, self._id_rank[self._gold_row], 0
        )

    def ranks(self, weights: WeightVector) -> np.ndarray:
        """Gold rank per query under theta (0 = not retrieved)."""
        a, b, wt, ws, wu = weights.as_tuple()
        fused = a * (self._B @ np.array([wt, ws, wu])) + b * self._S
        rows = np.arange(fused.shape[0])
        gf = np.where(self._gold_row >= 0, fused[rows, self._gold_row], -1.0)
        better = np.sum(fused > gf[:, None], axis=1)
        ties = np.sum(
            (fused == gf[:, None])
            & (self._id_rank[None, :] < self._gold_id_rank[:, None]),
            axis=1,
        )
        rank = 1 + better + ties
        hit = (gf > 0.0) & (rank <= self.cutoff)
        return np.where(hit, rank, 0)

    def mrr(self, weights: WeightVector) -> float:
        ranks = self.ranks(weights)
        rr = np.where(ranks > 0, 1.0 / np.maximum(ranks, 1), 0.0)
        return float(rr.mean())

    def __call__(self, weights: WeightVector) -> float:
        return self.mrr(weights)


def tune_mode(objective: MrrObjective, mode: str, budget: int = 120,
              seed: int = 0) -> tuple[WeightVector, float]:
    """Best weights for one retrieval paradigm."""
    if mode == "semantic":
        theta = WeightVector(0.0, 1.0, 1.0, 1.0, 1.0)
        return theta, objective(theta)
    if mode == "lexical":
        cfg = TunerConfig(bounds=(FIELD_WEIGHT_BOUNDS,) * 3, budget=budget,
                          n_initial=min(20, budget - 1), seed=seed)
        result = tune(lambda w: objective(WeightVector(1.0, 0.0, *w)), cfg)
        return WeightVector(1.0, 0.0, *result.best_theta), result.best_value
    raise ValueError(f"tune_mode handles lexical/semantic, got {mode!r}")


def tune_hybrid(objective: MrrObjective, anchors: list[WeightVector],
                budget: int = 120, seed: int = 0) -> tuple[WeightVector, float]:
    """Five-parameter tuning, seeded with the single-signal optima."""
    cfg = TunerConfig(budget=budget, n_initial=min(20, budget - 1), seed=seed)
    anchor_arrays = [np.asarray(a.as_tuple()) for a in anchors]
    result = tune(
        lambda x: objective(WeightVector.from_sequence(x)),
        cfg,
        extra_designs=anchor_arrays,
    )
    return WeightVector.from_sequence(result.best_theta), result.best_value


@dataclass
class AblationResult:
    reports: dict[str, MetricReport]
    weights: dict[str, WeightVector]
    table: str = ""
    lam: float = 0.3

    def as_dict(self) -> dict:
        return {
            "modes": {m: r.as_dict() for m, r in self.reports.items()},
            "weights": {m: list(w.as_tuple()) for m, w in self.weights.items()},
            "lambda": self.lam,
        }


def _default_scorer(retriever: HybridRetriever, seed: int) -> CompatibilityClassifier:
    factory = PairFactory(
        list(retriever.records_.values()),
        retriever.lexical_.synonyms_,
        seed=seed,
        retriever=retriever,
    )
    pairs = list(factory.generate(GenerationSchedule(total=20000)))
    clf = CompatibilityClassifier(synonyms=retriever.lexical_.synonyms_)
    clf.fit(pairs, config=TrainConfig(epochs=10, batch_size=64, seed=seed))
    return clf


def run_ablation(retriever: HybridRetriever, queries: list[QueryRecord],
                 gold: dict[str, str], query_ids: list[str],
                 modes=MODES, lam: float = 0.3, budget: int = 120,
                 seed: int = 0, scorer: CompatibilityClassifier | None = None,
                 tune_queries: list[QueryRecord] | None = None,
                 tune_gold: dict[str, str] | None = None,
                 tune_query_ids: list[str] | None = None,
                 ks=DEFAULT_KS, top_k: int = 10) -> AblationResult:
    """One report per mode, each at its tuned weights.

    Tuning runs on the evaluation queries unless a separate tuning split
    is supplied; the comparison is between paradigms at their respective
    optima on the same validation set.
    """
    if tune_queries is None:
        tune_queries, tune_gold, tune_query_ids = queries, gold, query_ids
    objective = MrrObjective(retriever, tune_queries, tune_gold, tune_query_ids,
                             cutoff=top_k)

    theta_lex, _ = tune_mode(objective, "lexical", budget=budget, seed=seed)
    theta_sem, _ = tune_mode(objective, "semantic", budget=budget, seed=seed)
    theta_hybrid, _ = tune_hybrid(objective, [theta_lex, theta_sem],
                                  budget=budget, seed=seed)
    tuned = {"lexical": theta_lex, "semantic": theta_sem,
             "hybrid": theta_hybrid, "hybrid+rerank": theta_hybrid}

    needs_scorer = "hybrid+rerank" in modes
    if needs_scorer and scorer is None:
        scorer = _default_scorer(retriever, seed)

    triads = {rid: rec.triad for rid, rec in retriever.records_.items()}
    reports: dict[str, MetricReport] = {}
    for mode in modes:
        theta = tuned[mode]
        runs: dict[str, list[str]] = {}
        for query, qid in zip(queries, query_ids):
            base_mode = "hybrid" if mode == "hybrid+rerank" else mode
            candidates = retriever.retrieve_mode(query, base_mode, weights=theta,
                                                 top_k=top_k)
            if mode == "hybrid+rerank" and candidates:
                normalized = normalize_candidate_scores(candidates)
                fused = rerank(query.triad, normalized, scorer, triads, lam=lam)
                final, _ = override_top1(candidates, fused)
                runs[qid] = [c.record_id for c in final]
            else:
                runs[qid] = [c.record_id for c in candidates]
        reports[mode] = compute_report(runs, gold, ks=ks)

    table = format_report_table(reports, ks=ks)
    return AblationResult(reports=reports, weights=tuned, table=table, lam=lam)
