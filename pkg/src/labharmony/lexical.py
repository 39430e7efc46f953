"""Fielded BM25 over an inverted index with synonym expansion and fuzzy terms.

Scoring follows the classic formula

    score(d, q) = sum_t IDF(t) * TF(t,d) * (k1 + 1)
                  / (TF(t,d) + k1 * (1 - b + b * |d| / avgdl))

with IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is nonnegative
for all 0 <= df <= N, so fused scores never go negative.

Synonym expansion is applied on both sides: documents are indexed under
the full token set of each term's group (record-level test synonyms are
folded into the test field), and queries expand the same way. Query terms
missing from a field's vocabulary fall back to Damerau-Levenshtein
matches, each contributing with the graded multiplier 1 / (1 + distance).
Document length and term frequency are counted over the expanded token
multiset, i.e. over what is actually indexed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DuplicateIdError, ParseError, UnknownField, UnknownRecord
from .fuzzy import FuzzyVocabulary, fuzzy_multiplier
from .synonyms import SynonymDictionary
from .textnorm import normalize_text, tokenize
from .types import FIELDS, ReferenceRecord, Triad, WeightVector

SNAPSHOT_MAGIC = "LABHARMONY-INDEX v1"


@dataclass(frozen=True)
class Bm25Params:
    """Term-frequency saturation (k1) and length normalization (b)."""

    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not (0.0 <= self.b <= 1.0):
            raise ValueError(f"b must be in [0, 1], got {self.b}")


def expand_token(token: str, category: str, synonyms: SynonymDictionary) -> list[str]:
    """Ordered token expansion: the token itself, then its group's tokens."""
    group = synonyms.group_of(token, category)
    out = [token]
    seen = {token}
    for member in sorted(group):
        for tok in tokenize(member):
            if tok not in seen:
                seen.add(tok)
                out.append(tok)
    return out


def expand_field_text(text: str, category: str, synonyms: SynonymDictionary) -> list[str]:
    """Token multiset a document field is indexed under.

    Each raw token occurrence emits its full group expansion; if the whole
    normalized field is itself a synonym-group member (multi-word terms
    like "blood plasma"), that group's tokens are appended once.
    """
    norm = normalize_text(text)
    tokens: list[str] = []
    for raw in tokenize(norm):
        tokens.extend(expand_token(raw, category, synonyms))
    if " " in norm:
        group = synonyms.group_of(norm, category)
        if len(group) > 1:
            seen = set(tokens)
            for member in sorted(group):
                for tok in tokenize(member):
                    if tok not in seen:
                        seen.add(tok)
                        tokens.append(tok)
    return tokens


def expand_query(query: Triad, synonyms: SynonymDictionary) -> dict[str, list[str]]:
    """Per-field query term lists: expanded, deduplicated, original-first."""
    out: dict[str, list[str]] = {}
    for field_name in FIELDS:
        expanded = expand_field_text(query.component(field_name), field_name, synonyms)
        seen: set[str] = set()
        terms: list[str] = []
        for tok in expanded:
            if tok not in seen:
                seen.add(tok)
                terms.append(tok)
        out[field_name] = terms
    return out


@dataclass
class FieldIndex:
    """Inverted index for one triad field."""

    postings: dict[str, dict[str, int]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    avgdl: float = 0.0
    doc_count: int = 0

    def add(self, record_id: str, tokens: list[str]) -> None:
        self.doc_lengths[record_id] = self.doc_lengths.get(record_id, 0) + len(tokens)
        for tok in tokens:
            bucket = self.postings.setdefault(tok, {})
            bucket[record_id] = bucket.get(record_id, 0) + 1

    def finalize(self) -> None:
        self.doc_count = len(self.doc_lengths)
        total = sum(self.doc_lengths.values())
        self.avgdl = total / self.doc_count if self.doc_count else 0.0

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def vocabulary(self) -> set[str]:
        return set(self.postings)


class Bm25Index(BaseEstimator):
    """BM25 inverted index over reference records, one sub-index per field.

    Build-once and immutable afterwards; concurrent queries need no
    locking. Rebuilding produces a fresh instance.

    Parameters
    ----------
    synonyms : SynonymDictionary, optional
        Groups used for document- and query-side expansion.
    k1, b : float
        BM25 parameters (defaults 1.2 / 0.75).
    max_edits : int
        Damerau-Levenshtein budget for query terms absent from a field's
        vocabulary (0 disables fuzzy matching).
    """

    def __init__(self, synonyms=None, k1: float = 1.2, b: float = 0.75,
                 max_edits: int = 1):
        self.synonyms = synonyms
        self.k1 = k1
        self.b = b
        self.max_edits = max_edits

    # -- build ----------------------------------------------------------

    def fit(self, records: list[ReferenceRecord], y=None) -> "Bm25Index":
        params = Bm25Params(self.k1, self.b)
        synonyms = self.synonyms if self.synonyms is not None else SynonymDictionary.empty()
        fields: dict[str, FieldIndex] = {f: FieldIndex() for f in FIELDS}
        ids: list[str] = []
        seen: set[str] = set()
        for record in records:
            if record.id in seen:
                raise DuplicateIdError(f"duplicate record id {record.id!r}")
            seen.add(record.id)
            ids.append(record.id)
            for field_name in FIELDS:
                tokens = expand_field_text(
                    record.triad.component(field_name), field_name, synonyms
                )
                if field_name == "test":
                    for alias in record.synonyms:
                        tokens.extend(expand_field_text(alias, "test", synonyms))
                fields[field_name].add(record.id, tokens)
        for fi in fields.values():
            fi.finalize()

        self.params_ = params
        self.synonyms_ = synonyms
        self.fields_ = fields
        self.ids_ = tuple(ids)
        self.id_set_ = seen
        self._fuzzy_cache: dict[str, FuzzyVocabulary] = {}
        self._compile()
        return self

    def _compile(self) -> None:
        """Dense row mapping and per-term posting arrays for fast scoring."""
        row_of = {rid: i for i, rid in enumerate(self.ids_)}
        self._row_of = row_of
        k1, b = self.params_.k1, self.params_.b
        self._np_postings: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
        self._tf_norm: dict[str, np.ndarray] = {}
        for name, fi in self.fields_.items():
            lengths = np.zeros(len(self.ids_))
            for rid, length in fi.doc_lengths.items():
                lengths[row_of[rid]] = length
            rel = lengths / fi.avgdl if fi.avgdl > 0 else np.zeros_like(lengths)
            self._tf_norm[name] = k1 * (1.0 - b + b * rel)
            compiled = {}
            for term, posting in fi.postings.items():
                rows = np.fromiter((row_of[rid] for rid in posting), dtype=np.intp,
                                   count=len(posting))
                tfs = np.fromiter(posting.values(), dtype=np.float64,
                                  count=len(posting))
                compiled[term] = (rows, tfs)
            self._np_postings[name] = compiled

    # -- scoring --------------------------------------------------------

    def _field(self, field_name: str) -> FieldIndex:
        check_is_fitted(self)
        if field_name not in FIELDS:
            raise UnknownField(f"unknown field {field_name!r}")
        return self.fields_[field_name]

    def idf(self, field_name: str, term: str) -> float:
        fi = self._field(field_name)
        df = fi.df(term)
        return math.log(1.0 + (fi.doc_count - df + 0.5) / (df + 0.5))

    def _term_score(self, fi: FieldIndex, term: str, record_id: str) -> float:
        tf = self.posting_tf(fi, term, record_id)
        if tf == 0:
            return 0.0
        return self._tf_component(fi, tf, record_id) * self._idf_value(fi, term)

    def _idf_value(self, fi: FieldIndex, term: str) -> float:
        df = fi.df(term)
        return math.log(1.0 + (fi.doc_count - df + 0.5) / (df + 0.5))

    def _tf_component(self, fi: FieldIndex, tf: int, record_id: str) -> float:
        k1, b = self.params_.k1, self.params_.b
        length = fi.doc_lengths[record_id]
        rel = length / fi.avgdl if fi.avgdl > 0 else 0.0
        return tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * rel))

    @staticmethod
    def posting_tf(fi: FieldIndex, term: str, record_id: str) -> int:
        return fi.postings.get(term, {}).get(record_id, 0)

    def bm25_field_score(self, field_name: str, query_terms: list[str],
                         record_id: str) -> float:
        """Plain BM25 of the given terms against one record's field."""
        fi = self._field(field_name)
        if record_id not in fi.doc_lengths:
            raise UnknownRecord(f"unknown record id {record_id!r}")
        return sum(self._term_score(fi, term, record_id) for term in query_terms)

    def _weighted_terms(self, field_name: str, terms: list[str]) -> list[tuple[str, float]]:
        """Resolve query terms to (vocabulary term, multiplier) pairs.

        In-vocabulary terms score with multiplier 1; a missing term is
        replaced by its fuzzy matches at 1 / (1 + distance) each.
        """
        fi = self._field(field_name)
        out: list[tuple[str, float]] = []
        for term in terms:
            if term in fi.postings:
                out.append((term, 1.0))
            elif self.max_edits > 0:
                fuzzy = self._fuzzy_vocab(field_name).matches(term, self.max_edits)
                for match, dist in sorted(fuzzy.items()):
                    out.append((match, fuzzy_multiplier(dist)))
        return out

    def _fuzzy_vocab(self, field_name: str) -> FuzzyVocabulary:
        if field_name not in self._fuzzy_cache:
            self._fuzzy_cache[field_name] = FuzzyVocabulary(
                self.fields_[field_name].vocabulary()
            )
        return self._fuzzy_cache[field_name]

    def field_score_vector(self, field_name: str, terms: list[str]) -> np.ndarray:
        """Scores of the (fuzzy-resolved) terms over all records, by row."""
        fi = self._field(field_name)
        k1 = self.params_.k1
        norm = self._tf_norm[field_name]
        out = np.zeros(len(self.ids_))
        for term, mult in self._weighted_terms(field_name, terms):
            rows, tfs = self._np_postings[field_name][term]
            idf = self._idf_value(fi, term)
            out[rows] += mult * (tfs * (k1 + 1.0) / (tfs + norm[rows]) * idf)
        return out

    def field_score_map(self, field_name: str, terms: list[str]) -> dict[str, float]:
        """Sparse scores of the (fuzzy-resolved) terms over all records."""
        vec = self.field_score_vector(field_name, terms)
        rows = np.flatnonzero(vec)
        return {self.ids_[i]: float(vec[i]) for i in rows}

    def fielded_bm25(self, query: Triad, weights: WeightVector,
                     record_id: str) -> float:
        """Field-weighted lexical score of one record for a query triad."""
        check_is_fitted(self)
        if record_id not in self.id_set_:
            raise UnknownRecord(f"unknown record id {record_id!r}")
        expanded = expand_query(query, self.synonyms_)
        total = 0.0
        for field_name in FIELDS:
            w = weights.field_weight(field_name)
            if w == 0.0:
                continue
            fi = self.fields_[field_name]
            score = 0.0
            for term, mult in self._weighted_terms(field_name, expanded[field_name]):
                score += mult * self._term_score(fi, term, record_id)
            total += w * score
        return total

    def search_scores_vector(self, query: Triad, weights: WeightVector) -> np.ndarray:
        """Field-weighted lexical scores for all records, in ids_ row order."""
        check_is_fitted(self)
        expanded = expand_query(query, self.synonyms_)
        total = np.zeros(len(self.ids_))
        for field_name in FIELDS:
            w = weights.field_weight(field_name)
            if w == 0.0:
                continue
            total += w * self.field_score_vector(field_name, expanded[field_name])
        return total

    def search_scores(self, query: Triad, weights: WeightVector) -> dict[str, float]:
        """Field-weighted lexical scores for every record with a term hit."""
        vec = self.search_scores_vector(query, weights)
        rows = np.flatnonzero(vec)
        return {self.ids_[i]: float(vec[i]) for i in rows}

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        check_is_fitted(self)
        payload = {
            "params": {"k1": self.params_.k1, "b": self.params_.b,
                       "max_edits": self.max_edits},
            "ids": list(self.ids_),
            "synonyms": {
                c: [sorted(g) for g in self.synonyms_.groups(c)]
                for c in ("test", "sample", "unit")
            },
            "fields": {
                name: {
                    "postings": {t: dict(p) for t, p in fi.postings.items()},
                    "doc_lengths": fi.doc_lengths,
                }
                for name, fi in self.fields_.items()
            },
        }
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(SNAPSHOT_MAGIC + "\n")
            json.dump(payload, handle, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path) -> "Bm25Index":
        with open(path, encoding="utf-8") as handle:
            magic = handle.readline().rstrip("\n")
            if magic != SNAPSHOT_MAGIC:
                raise ParseError(f"bad index snapshot header {magic!r}")
            payload = json.load(handle)
        synonyms = SynonymDictionary.from_groups(
            test=payload["synonyms"]["test"],
            sample=payload["synonyms"]["sample"],
            unit=payload["synonyms"]["unit"],
        )
        index = cls(
            synonyms=synonyms,
            k1=payload["params"]["k1"],
            b=payload["params"]["b"],
            max_edits=payload["params"]["max_edits"],
        )
        index.params_ = Bm25Params(index.k1, index.b)
        index.synonyms_ = synonyms
        fields: dict[str, FieldIndex] = {}
        for name, data in payload["fields"].items():
            fi = FieldIndex(
                postings={t: dict(p) for t, p in data["postings"].items()},
                doc_lengths=dict(data["doc_lengths"]),
            )
            fi.finalize()
            fields[name] = fi
        index.fields_ = fields
        index.ids_ = tuple(payload["ids"])
        index.id_set_ = set(index.ids_)
        index._fuzzy_cache = {}
        index._compile()
        return index
