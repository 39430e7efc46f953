"""Ranked-retrieval metrics under the single-relevant-gold convention.

Each query has exactly one relevant record, which collapses several
definitions: Recall@k equals Success@k, and MAP equals MRR. Both are
still reported separately so downstream consumers see the names they
expect. Precision@k is the standard hit(k)/k; NDCG uses binary gain with
a log2 discount.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import log2

from .errors import MissingGold

DEFAULT_KS = (1, 3, 5, 10)


def rank_of(ranked_ids, gold_id) -> int:
    """1-based rank of the gold id, or 0 when absent."""
    for i, rid in enumerate(ranked_ids, start=1):
        if rid == gold_id:
            return i
    return 0


def reciprocal_rank(ranked_ids, gold_id) -> float:
    """1/rank of the gold id; 0 when it was not retrieved."""
    r = rank_of(ranked_ids, gold_id)
    return 1.0 / r if r else 0.0


@dataclass
class MetricReport:
    """Metric values for one run; per-k values keyed by cutoff."""

    mrr: float
    map: float
    precision: dict[int, float] = field(default_factory=dict)
    recall: dict[int, float] = field(default_factory=dict)
    success: dict[int, float] = field(default_factory=dict)
    ndcg: dict[int, float] = field(default_factory=dict)
    mrr_at: dict[int, float] = field(default_factory=dict)
    n_queries: int = 0
    n_with_results: int = 0

    def as_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "map": self.map,
            "precision_at": {str(k): v for k, v in self.precision.items()},
            "recall_at": {str(k): v for k, v in self.recall.items()},
            "success_at": {str(k): v for k, v in self.success.items()},
            "ndcg_at": {str(k): v for k, v in self.ndcg.items()},
            "mrr_at": {str(k): v for k, v in self.mrr_at.items()},
            "queries": self.n_queries,
            "queries_with_results": self.n_with_results,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def compute_report(runs: dict[str, list[str]], gold: dict[str, str],
                   ks=DEFAULT_KS) -> MetricReport:
    """Aggregate metrics over per-query ranked id lists.

    ``runs`` maps query id -> ranked record ids; ``gold`` maps query id ->
    the single relevant record id. Every query in ``runs`` must have a
    gold label.
    """
    ks = tuple(sorted(ks))
    n = len(runs)
    if n == 0:
        return MetricReport(mrr=0.0, map=0.0, n_queries=0, n_with_results=0,
                            precision={k: 0.0 for k in ks},
                            recall={k: 0.0 for k in ks},
                            success={k: 0.0 for k in ks},
                            ndcg={k: 0.0 for k in ks},
                            mrr_at={k: 0.0 for k in ks})

    rr_total = 0.0
    hits = {k: 0 for k in ks}
    ndcg = {k: 0.0 for k in ks}
    rr_at = {k: 0.0 for k in ks}
    with_results = 0
    for qid, ranked in runs.items():
        if qid not in gold:
            raise MissingGold(f"query {qid!r} has no gold label")
        if ranked:
            with_results += 1
        r = rank_of(ranked, gold[qid])
        rr_total += 1.0 / r if r else 0.0
        for k in ks:
            if r and r <= k:
                hits[k] += 1
                ndcg[k] += 1.0 / log2(r + 1)
                rr_at[k] += 1.0 / r

    mrr = rr_total / n
    return MetricReport(
        mrr=mrr,
        map=mrr,  # equal under single-relevant gold
        precision={k: hits[k] / (k * n) for k in ks},
        recall={k: hits[k] / n for k in ks},
        success={k: hits[k] / n for k in ks},
        ndcg={k: ndcg[k] / n for k in ks},
        mrr_at={k: rr_at[k] / n for k in ks},
        n_queries=n,
        n_with_results=with_results,
    )


def format_report_table(reports: dict[str, MetricReport], ks=DEFAULT_KS) -> str:
    """Aligned plain-text table, one column per named run."""
    ks = tuple(sorted(ks))
    names = list(reports)
    rows: list[tuple[str, list[float]]] = [
        ("MRR", [reports[n].mrr for n in names]),
        ("MAP", [reports[n].map for n in names]),
    ]
    for metric in ("precision", "recall", "success", "ndcg", "mrr_at"):
        label = {"precision": "Precision", "recall": "Recall",
                 "success": "Success", "ndcg": "NDCG", "mrr_at": "MRR"}[metric]
        for k in ks:
            rows.append((f"{label}@{k}",
                         [getattr(reports[n], metric)[k] for n in names]))

    width = max(len(r[0]) for r in rows) + 2
    col = max(12, max(len(n) for n in names) + 2)
    lines = ["".ljust(width) + "".join(n.rjust(col) for n in names)]
    for label, values in rows:
        lines.append(label.ljust(width) + "".join(f"{v:.4f}".rjust(col) for v in values))
    lines.append("")
    counts = [f"{reports[n].n_with_results}/{reports[n].n_queries}" for n in names]
    lines.append("with results".ljust(width) + "".join(c.rjust(col) for c in counts))
    lines.append("")
    lines.append("note: Precision@k = hits/k; Success@k = hit rate. Under the")
    lines.append("single-relevant convention they coincide only at k = 1, and")
    lines.append("Recall@k equals Success@k while MAP equals MRR.")
    return "\n".join(lines)
