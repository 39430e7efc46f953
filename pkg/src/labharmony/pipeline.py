"""Batch harmonization pipeline and the human-review state store.

A batch run retrieves, normalizes, reranks and tags each query:
``Missing`` when nothing scores, ``Copy`` when the winning record equals
the query triad exactly, ``Reranked`` when the compatibility override
replaced the retrieval winner, ``Pending`` otherwise. ``Verified`` and
``Human`` exist only as review outcomes and are reachable solely through
the review store.

Results files are deterministic: identical inputs and configuration give
byte-identical JSON-lines regardless of thread count; wall-clock
metadata lives in a sidecar. Review decisions append to a separate
feedback log, and restarting the store replays that log over the base
results, so no system artifact is ever rewritten.
"""

from __future__ import annotations

import configparser
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import FileError, ValidationError
from .hybrid import HybridRetriever, RankedCandidate, normalize_candidate_scores
from .pairs import LabeledPair, write_pairs
from .reranker import override_top1, rerank
from .types import QueryRecord, QueryStats, TagStatus, Triad

_CODE_HINT_REASON = "malformed code hint"


@dataclass(frozen=True)
class HarmonizationResult:
    """Outcome of one query: ranked candidates, chosen record, tag."""

    query_id: str
    query: Triad
    candidates: tuple[RankedCandidate, ...]
    chosen: str | None
    tag: TagStatus
    decided_by: str = "system"
    timestamp: float | None = None
    error: str | None = None

    def __post_init__(self):
        if (self.tag is TagStatus.MISSING) != (self.chosen is None and not self.candidates):
            raise ValidationError(
                f"{self.query_id}: Missing tag must coincide with empty candidates"
            )
        if self.tag in (TagStatus.VERIFIED, TagStatus.HUMAN) and self.decided_by != "human":
            raise ValidationError(f"{self.query_id}: {self.tag.value} requires a human decision")

    def as_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "query": self.query.as_dict(),
            "candidates": [c.as_dict() for c in self.candidates],
            "chosen": self.chosen,
            "tag": self.tag.value,
            "decided_by": self.decided_by,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HarmonizationResult":
        return cls(
            query_id=data["query_id"],
            query=Triad.from_dict(data["query"]),
            candidates=tuple(
                RankedCandidate(
                    record_id=c["id"],
                    lexical_score=c["lexical_score"],
                    semantic_score=c["semantic_score"],
                    fused_score=c["fused_score"],
                    rank=c["rank"],
                    retrieval_norm=c.get("retrieval_norm"),
                    rerank_p=c.get("rerank_p"),
                    final_score=c.get("final_score"),
                )
                for c in data.get("candidates", ())
            ),
            chosen=data.get("chosen"),
            tag=TagStatus.parse(data["tag"]),
            decided_by=data.get("decided_by", "system"),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class FeedbackEvent:
    """One reviewer verdict; the log of these is append-only."""

    query_id: str
    query: Triad
    candidate_id: str | None
    candidate: Triad | None
    verdict: str
    reviewer: str
    timestamp: float

    def __post_init__(self):
        if self.verdict not in ("accept", "reject"):
            raise ValidationError(f"verdict must be accept/reject, got {self.verdict!r}")
        if not self.reviewer:
            raise ValidationError("reviewer id is empty")

    def as_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "query": self.query.as_dict(),
            "candidate_id": self.candidate_id,
            "candidate": self.candidate.as_dict() if self.candidate else None,
            "verdict": self.verdict,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeedbackEvent":
        return cls(
            query_id=data["query_id"],
            query=Triad.from_dict(data["query"]),
            candidate_id=data.get("candidate_id"),
            candidate=Triad.from_dict(data["candidate"]) if data.get("candidate") else None,
            verdict=data["verdict"],
            reviewer=data["reviewer"],
            timestamp=float(data["timestamp"]),
        )


# -- preprocessing ------------------------------------------------------------


@dataclass
class PreprocessResult:
    queries: list[tuple[str, QueryRecord]] = field(default_factory=list)
    rejects: list[dict] = field(default_factory=list)
    merged: dict[str, str] = field(default_factory=dict)


def _parse_stats(row: dict) -> QueryStats | None:
    keys = ("min", "max", "mean", "std")
    present = [k for k in keys if row.get(k) not in (None, "")]
    if not present:
        return None
    if len(present) != 4:
        raise ValidationError(f"partial stats columns {present}")
    return QueryStats(**{k: float(row[k]) for k in keys})


def preprocess(rows: list[dict]) -> PreprocessResult:
    """Validate raw query rows; collapse duplicate triads, route failures.

    Rejection reasons: empty test name, malformed code hint (the expected
    shape is one-to-five digits, a dash, one digit), negative frequency,
    inconsistent statistics. Duplicate triads merge into the first
    occurrence with frequencies summed.
    """
    out = PreprocessResult()
    by_triad: dict[Triad, int] = {}
    for row in rows:
        qid = row["query_id"]
        try:
            triad = Triad(row.get("test", ""), row.get("sample", ""), row.get("unit", ""))
        except ValidationError:
            out.rejects.append({"query_id": qid, "reason": "empty test", "row": row})
            continue
        code_hint = (row.get("code_hint") or "").strip() or None
        frequency_raw = (str(row.get("frequency") or "0")).strip() or "0"
        try:
            frequency = int(frequency_raw)
            if frequency < 0:
                raise ValueError
        except ValueError:
            out.rejects.append({"query_id": qid, "reason": "bad frequency", "row": row})
            continue
        try:
            stats = _parse_stats(row)
        except (ValidationError, ValueError):
            out.rejects.append({"query_id": qid, "reason": "invalid stats", "row": row})
            continue
        try:
            query = QueryRecord(triad=triad, code_hint=code_hint,
                                frequency=frequency, stats=stats)
        except ValidationError:
            out.rejects.append({"query_id": qid, "reason": _CODE_HINT_REASON, "row": row})
            continue

        if triad in by_triad:
            keep_idx = by_triad[triad]
            kept_qid, kept = out.queries[keep_idx]
            out.queries[keep_idx] = (
                kept_qid, replace(kept, frequency=kept.frequency + query.frequency)
            )
            out.merged[qid] = kept_qid
        else:
            by_triad[triad] = len(out.queries)
            out.queries.append((qid, query))
    return out


# -- batch harmonization -------------------------------------------------------


def harmonize_one(query_id: str, query: QueryRecord, retriever: HybridRetriever,
                  scorer=None, lam: float = 0.3, top_k: int = 10,
                  use_rerank: bool = True, use_override: bool = True,
                  triads: dict[str, Triad] | None = None) -> HarmonizationResult:
    if triads is None:
        triads = {rid: rec.triad for rid, rec in retriever.records_.items()}
    candidates = retriever.retrieve(query, top_k=top_k)
    if not candidates:
        return HarmonizationResult(query_id=query_id, query=query.triad,
                                   candidates=(), chosen=None,
                                   tag=TagStatus.MISSING)

    normalized = normalize_candidate_scores(candidates)
    tag = TagStatus.PENDING
    final = normalized
    if scorer is not None and (use_rerank or use_override):
        # With reranking off but the override on, lam=1 keeps the fused
        # ordering equal to retrieval while still annotating probabilities.
        fused = rerank(query.triad, normalized, scorer, triads,
                       lam=lam if use_rerank else 1.0)
        if use_override:
            final, tag = override_top1(normalized, fused)
        else:
            final = fused

    top = final[0]
    if triads[top.record_id] == query.triad:
        tag = TagStatus.COPY
    return HarmonizationResult(query_id=query_id, query=query.triad,
                               candidates=tuple(final), chosen=top.record_id,
                               tag=tag)


def harmonize_batch(queries: list[tuple[str, QueryRecord]],
                    retriever: HybridRetriever, scorer=None, lam: float = 0.3,
                    top_k: int = 10, use_rerank: bool = True,
                    use_override: bool = True,
                    n_threads: int = 1) -> list[HarmonizationResult]:
    """Harmonize queries in input order; per-query errors never abort the
    batch, they surface on the result line instead."""
    triads = {rid: rec.triad for rid, rec in retriever.records_.items()}

    def run(item: tuple[str, QueryRecord]) -> HarmonizationResult:
        qid, query = item
        try:
            return harmonize_one(qid, query, retriever, scorer=scorer, lam=lam,
                                 top_k=top_k, use_rerank=use_rerank,
                                 use_override=use_override, triads=triads)
        except Exception as exc:  # noqa: BLE001 - contained per query
            return HarmonizationResult(query_id=qid, query=query.triad,
                                       candidates=(), chosen=None,
                                       tag=TagStatus.MISSING,
                                       error=f"{type(exc).__name__}: {exc}")

    if n_threads <= 1:
        return [run(item) for item in queries]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(run, queries))


def write_results(path, results: list[HarmonizationResult],
                  meta: dict | None = None) -> None:
    """Deterministic results JSONL plus a timestamped sidecar."""
    with open(path, "w", encoding="utf-8") as handle:
        for result in results:
            handle.write(json.dumps(result.as_dict(), ensure_ascii=False,
                                    sort_keys=True) + "\n")
    sidecar = dict(meta or {})
    sidecar["written_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    sidecar["results"] = len(results)
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, indent=2, sort_keys=True)


def read_results(path) -> list[HarmonizationResult]:
    path = Path(path)
    if not path.exists():
        raise FileError(f"results file {path} does not exist")
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                out.append(HarmonizationResult.from_dict(json.loads(line)))
    return out


# -- review store ---------------------------------------------------------------


class ReviewConflict(ValidationError):
    """Verdict on an already-decided item without force."""


class UnknownQuery(ValidationError):
    """No result exists for the query id."""


class ReviewStore:
    """In-memory review state: base results plus replayed feedback events.

    The base results file is never mutated; every decision appends one
    event line (single-writer discipline) and updates the in-memory view.
    """

    def __init__(self, results: list[HarmonizationResult], feedback_path,
                 triads: dict[str, Triad] | None = None):
        self._results: dict[str, HarmonizationResult] = {}
        self._order: list[str] = []
        for r in results:
            if r.query_id in self._results:
                raise ValidationError(f"duplicate result for {r.query_id}")
            self._results[r.query_id] = r
            self._order.append(r.query_id)
        self._triads = triads or {}
        self._feedback_path = Path(feedback_path)
        self._last_ts: dict[str, float] = {}
        self.events: list[FeedbackEvent] = []
        if self._feedback_path.exists():
            with open(self._feedback_path, encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        self._replay(FeedbackEvent.from_dict(json.loads(line)))

    # -- reads ----------------------------------------------------------

    def get(self, query_id: str) -> HarmonizationResult:
        if query_id not in self._results:
            raise UnknownQuery(f"unknown query id {query_id!r}")
        return self._results[query_id]

    def triad_of(self, record_id: str) -> Triad | None:
        return self._triads.get(record_id)

    def queue(self, statuses=(TagStatus.PENDING, TagStatus.RERANKED),
              limit: int = 50, offset: int = 0) -> list[HarmonizationResult]:
        wanted = {TagStatus.parse(s) if isinstance(s, str) else s for s in statuses}
        rows = [self._results[qid] for qid in self._order
                if self._results[qid].tag in wanted]
        return rows[offset:offset + limit]

    def stats(self) -> dict:
        counts = {tag.value: 0 for tag in TagStatus}
        for result in self._results.values():
            counts[result.tag.value] += 1
        return {"tags": counts, "feedback_events": len(self.events),
                "results": len(self._results)}

    # -- decisions -------------------------------------------------------

    def _candidate_triad(self, result: HarmonizationResult,
                         candidate_id: str | None) -> Triad | None:
        if candidate_id is None:
            return None
        if candidate_id not in {c.record_id for c in result.candidates}:
            raise ValidationError(
                f"candidate {candidate_id!r} is not among {result.query_id}'s candidates"
            )
        return self._triads.get(candidate_id)

    def decide(self, query_id: str, candidate_id: str | None, verdict: str,
               reviewer: str, force: bool = False) -> HarmonizationResult:
        result = self.get(query_id)
        if result.tag in (TagStatus.VERIFIED, TagStatus.HUMAN) and not force:
            raise ReviewConflict(f"{query_id} already decided ({result.tag.value})")
        if verdict == "accept" and candidate_id is None:
            candidate_id = result.chosen
        if verdict == "reject" and candidate_id is None:
            candidate_id = result.chosen
        candidate_triad = self._candidate_triad(result, candidate_id)
        now = time.time()
        last = self._last_ts.get(reviewer, 0.0)
        event = FeedbackEvent(
            query_id=query_id, query=result.query, candidate_id=candidate_id,
            candidate=candidate_triad, verdict=verdict, reviewer=reviewer,
            timestamp=max(now, last + 1e-6),
        )
        self._append(event)
        return self._replay(event)

    def _append(self, event: FeedbackEvent) -> None:
        line = json.dumps(event.as_dict(), ensure_ascii=False, sort_keys=True) + "\n"
        with open(self._feedback_path, "a", encoding="utf-8") as handle:
            handle.write(line)
            handle.flush()

    def _replay(self, event: FeedbackEvent) -> HarmonizationResult:
        result = self.get(event.query_id)
        if event.timestamp < self._last_ts.get(event.reviewer, 0.0):
            raise ValidationError(
                f"feedback log out of order for reviewer {event.reviewer!r}"
            )
        self._last_ts[event.reviewer] = event.timestamp
        self.events.append(event)
        if event.verdict == "accept":
            tag = (TagStatus.VERIFIED if event.candidate_id == result.chosen
                   else TagStatus.HUMAN)
            chosen = event.candidate_id
        else:
            tag = TagStatus.HUMAN
            chosen = None
        updated = replace(result, tag=tag, chosen=chosen, decided_by="human",
                          timestamp=event.timestamp)
        self._results[event.query_id] = updated
        return updated


def export_feedback_pairs(feedback_path, out_path) -> int:
    """Turn the verdict log into scorer training pairs.

    Accepts become label-1 pairs; rejects become label-0 pairs (class N1
    by convention). Duplicate (query, candidate, verdict) events collapse.
    Returns the number of pairs written; an empty log writes an empty file.
    """
    feedback_path = Path(feedback_path)
    events: list[FeedbackEvent] = []
    if feedback_path.exists():
        with open(feedback_path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    events.append(FeedbackEvent.from_dict(json.loads(line)))

    seen = set()
    pairs: list[LabeledPair] = []
    for event in events:
        if event.candidate is None:
            continue
        key = (event.query, event.candidate, event.verdict)
        if key in seen:
            continue
        seen.add(key)
        if event.verdict == "accept":
            pairs.append(LabeledPair(left=event.query, right=event.candidate,
                                     label=1, corruption_class="POS"))
        else:
            pairs.append(LabeledPair(left=event.query, right=event.candidate,
                                     label=0, corruption_class="N1"))
    return write_pairs(out_path, pairs)


# -- configuration ---------------------------------------------------------------


@dataclass
class PipelineConfig:
    """Paths and knobs of a pipeline deployment (INI-style config file)."""

    reference: str = "reference.csv"
    synonyms: str | None = None
    vectors: str | None = None
    model: str | None = None
    results: str = "results.jsonl"
    feedback: str = "feedback.jsonl"
    weights: tuple[float, float, float, float, float] = (1.0, 1.0, 1.0, 1.0, 1.0)
    lam: float = 0.3
    top_k: int = 10
    max_edits: int = 1
    embed_dim: int = 256
    port: int = 8901
    seed: int = 0
    use_rerank: bool = True
    use_override: bool = True

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ValidationError(f"lambda must be in [0, 1], got {self.lam}")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise FileError(f"config file {path} does not exist")
        parser = configparser.ConfigParser()
        parser.read(path, encoding="utf-8")
        kwargs: dict = {}
        paths = parser["paths"] if parser.has_section("paths") else {}
        for key in ("reference", "synonyms", "vectors", "model", "results", "feedback"):
            if key in paths:
                kwargs[key] = paths[key]
        retrieval = parser["retrieval"] if parser.has_section("retrieval") else {}
        if "weights" in retrieval:
            kwargs["weights"] = tuple(
                float(v) for v in retrieval["weights"].split(",")
            )
        for key, cast in (("top_k", int), ("max_edits", int), ("embed_dim", int)):
            if key in retrieval:
                kwargs[key] = cast(retrieval[key])
        rr = parser["reranker"] if parser.has_section("reranker") else {}
        if "lambda" in rr:
            kwargs["lam"] = float(rr["lambda"])
        for key in ("use_rerank", "use_override"):
            if key in rr:
                kwargs[key] = rr.getboolean(key)
        service = parser["service"] if parser.has_section("service") else {}
        if "port" in service:
            kwargs["port"] = int(service["port"])
        if parser.has_section("run") and "seed" in parser["run"]:
            kwargs["seed"] = int(parser["run"]["seed"])
        return cls(**kwargs)

    def require_files(self) -> None:
        for label, value in (("reference", self.reference),
                             ("synonyms", self.synonyms),
                             ("vectors", self.vectors),
                             ("model", self.model)):
            if value and not Path(value).exists():
                raise FileError(f"{label} file {value} does not exist")
