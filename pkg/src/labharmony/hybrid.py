"""Hybrid retrieval: fused lexical + semantic ranking over one record set.

The fused score is alpha * lexical + beta * clipped-cosine, with the raw
(unnormalized) field-weighted BM25 feeding the lexical term; alpha and
beta absorb scale. Min-max normalization happens only at the reranker
boundary, where the fused score is mixed with a probability.

Every record is scored exactly (the semantic side is an exhaustive scan
already, and the lexical side is a sparse postings walk), so the top
candidate maximizes the fused score over the whole record set at any
scale. Only records with positive fused score become candidates; ties
break on record id ascending for reproducible output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import EmptyCandidateList, IndexMismatch
from .lexical import Bm25Index
from .semantic import HashingEmbedder, SemanticIndex, record_text
from .synonyms import SynonymDictionary
from .types import QueryRecord, ReferenceRecord, Triad, WeightVector

MODES = ("lexical", "semantic", "hybrid")


@dataclass(frozen=True)
class RankedCandidate:
    """One retrieved record with score provenance.

    fused_score == alpha * lexical_score + beta * semantic_score; the
    rerank fields stay None until the reranker annotates them.
    """

    record_id: str
    lexical_score: float
    semantic_score: float
    fused_score: float
    rank: int
    retrieval_norm: float | None = None
    rerank_p: float | None = None
    final_score: float | None = None

    def as_dict(self) -> dict:
        return {
            "id": self.record_id,
            "lexical_score": self.lexical_score,
            "semantic_score": self.semantic_score,
            "fused_score": self.fused_score,
            "rank": self.rank,
            "retrieval_norm": self.retrieval_norm,
            "rerank_p": self.rerank_p,
            "final_score": self.final_score,
        }


@dataclass(frozen=True)
class RetrievalConfig:
    """Knobs of a retrieval run."""

    weights: WeightVector = WeightVector()
    top_k: int = 10
    max_edits: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


def normalize_candidate_scores(candidates: list[RankedCandidate]) -> list[RankedCandidate]:
    """Min-max scale fused scores into retrieval_norm in [0, 1].

    The top candidate maps to 1.0 and the bottom to 0.0; a single
    candidate or an all-equal list maps to all 1.0.
    """
    if not candidates:
        raise EmptyCandidateList("no candidates to normalize")
    values = [c.fused_score for c in candidates]
    lo, hi = min(values), max(values)
    if hi == lo:
        return [replace(c, retrieval_norm=1.0) for c in candidates]
    span = hi - lo
    return [replace(c, retrieval_norm=(c.fused_score - lo) / span) for c in candidates]


class HybridRetriever(BaseEstimator):
    """Retriever fusing a BM25 index and a vector store over one record set.

    Fit on the reference records once; instances are immutable afterwards
    and queries may run concurrently. The embedded query text is the
    normalized, unexpanded triad serialization; synonym expansion stays on
    the lexical side.
    """

    def __init__(self, synonyms=None, weights: WeightVector | None = None,
                 top_k: int = 10, max_edits: int = 1, k1: float = 1.2,
                 b: float = 0.75, provider=None):
        self.synonyms = synonyms
        self.weights = weights
        self.top_k = top_k
        self.max_edits = max_edits
        self.k1 = k1
        self.b = b
        self.provider = provider

    def fit(self, records: list[ReferenceRecord], y=None) -> "HybridRetriever":
        synonyms = self.synonyms if self.synonyms is not None else SynonymDictionary.empty()
        provider = self.provider if self.provider is not None else HashingEmbedder()
        self.lexical_ = Bm25Index(
            synonyms=synonyms, k1=self.k1, b=self.b, max_edits=self.max_edits
        ).fit(records)
        self.semantic_ = SemanticIndex(provider=provider).fit(records)
        self._attach(records)
        return self

    def from_parts(self, lexical: Bm25Index, semantic: SemanticIndex,
                   records: list[ReferenceRecord]) -> "HybridRetriever":
        """Wire prebuilt indexes (e.g. loaded snapshots) into a retriever."""
        if set(lexical.ids_) != set(semantic.ids_):
            raise IndexMismatch("lexical index and vector store cover different records")
        self.lexical_ = lexical
        self.semantic_ = semantic
        self._attach(records)
        return self

    def _attach(self, records: list[ReferenceRecord]) -> None:
        if set(self.lexical_.ids_) != set(self.semantic_.ids_):
            raise IndexMismatch("lexical index and vector store cover different records")
        self.records_ = {r.id: r for r in records}
        # Dense views in the vector store's id order for fast fusion. The
        # lexical index may have been loaded separately with another row
        # order; keep a permutation to line its score vectors up.
        self._sem_ids = list(self.semantic_.ids_)
        self._id_order = np.argsort(np.array(self._sem_ids, dtype=object)).argsort()
        self._row = {rid: i for i, rid in enumerate(self._sem_ids)}
        if tuple(self.lexical_.ids_) == tuple(self._sem_ids):
            self._lex_align = None
        else:
            lex_row = {rid: i for i, rid in enumerate(self.lexical_.ids_)}
            self._lex_align = np.array([lex_row[rid] for rid in self._sem_ids],
                                       dtype=np.intp)

    # -- retrieval --------------------------------------------------------

    def _config(self, weights: WeightVector | None, top_k: int | None) -> RetrievalConfig:
        return RetrievalConfig(
            weights=weights or self.weights or WeightVector(),
            top_k=top_k or self.top_k,
            max_edits=self.max_edits,
        )

    def retrieve(self, query: QueryRecord | Triad,
                 weights: WeightVector | None = None,
                 top_k: int | None = None) -> list[RankedCandidate]:
        """Top-k candidates by fused score, ties broken by record id."""
        check_is_fitted(self)
        cfg = self._config(weights, top_k)
        triad = query.triad if isinstance(query, QueryRecord) else query
        n = len(self._sem_ids)
        if n == 0:
            return []

        w = cfg.weights
        if w.alpha != 0.0:
            lex = self.lexical_.search_scores_vector(triad, w)
            if self._lex_align is not None:
                lex = lex[self._lex_align]
        else:
            lex = np.zeros(n)
        if w.beta != 0.0:
            qvec = self.semantic_.provider_.embed(record_text(triad))
            sem = self.semantic_.scores(qvec)
        else:
            sem = np.zeros(n)

        fused = w.alpha * lex + w.beta * sem
        # Preselect the top-k region cheaply, then order it exactly: fused
        # descending with ties broken by record id ascending. The tie pool
        # around the cutoff value is widened so id ordering stays exact.
        positive = np.flatnonzero(fused > 0.0)
        if positive.size == 0:
            return []
        if positive.size > cfg.top_k * 4:
            part = positive[np.argpartition(-fused[positive], cfg.top_k - 1)]
            cutoff = fused[part[cfg.top_k - 1]]
            pool = positive[fused[positive] >= cutoff]
        else:
            pool = positive
        order = pool[np.lexsort((self._id_order[pool], -fused[pool]))]
        top = order[: cfg.top_k]
        return [
            RankedCandidate(
                record_id=self._sem_ids[i],
                lexical_score=float(lex[i]),
                semantic_score=float(sem[i]),
                fused_score=float(fused[i]),
                rank=rank,
            )
            for rank, i in enumerate(top, start=1)
        ]

    def retrieve_mode(self, query: QueryRecord | Triad, mode: str,
                      weights: WeightVector | None = None,
                      top_k: int | None = None) -> list[RankedCandidate]:
        """Retrieve with one signal projected out, for ablation runs."""
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        w = weights or self.weights or WeightVector()
        if mode == "lexical":
            w = WeightVector(w.alpha, 0.0, w.w_test, w.w_sample, w.w_unit)
        elif mode == "semantic":
            w = WeightVector(0.0, w.beta, w.w_test, w.w_sample, w.w_unit)
        return self.retrieve(query, weights=w, top_k=top_k)

    def retrieve_batch(self, queries, weights: WeightVector | None = None,
                       top_k: int | None = None,
                       n_threads: int = 1) -> list[list[RankedCandidate]]:
        """Per-query candidate lists in input order; thread-safe fan-out."""
        if n_threads <= 1:
            return [self.retrieve(q, weights=weights, top_k=top_k) for q in queries]
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            return list(pool.map(lambda q: self.retrieve(q, weights=weights, top_k=top_k), queries))

    def predict(self, queries) -> list[str | None]:
        """Top-1 record id per query (None when nothing matches)."""
        out = []
        for q in queries:
            candidates = self.retrieve(q, top_k=1)
            out.append(candidates[0].record_id if candidates else None)
        return out
