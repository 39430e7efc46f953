"""Embedding providers and cosine-similarity search over record texts.

The store is a flat matrix scanned exhaustively; at reference-database
scale (<= 1e5 records) exact search is cheap and keeps results
deterministic. Negative similarities are clipped to zero at scoring time,
so only positive semantic evidence contributes to fusion.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DimensionMismatch, ParseError
from .types import ReferenceRecord, Triad


def record_text(item: ReferenceRecord | Triad) -> str:
    """Canonical text serialization embedded for a record or query triad."""
    triad = item.triad if isinstance(item, ReferenceRecord) else item
    return f"TEST: {triad.test} SAMPLE: {triad.sample} UNIT: {triad.unit}"


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors in [-1, 1]; 0 when either vector is all-zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimensions {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class EmbeddingProvider(Protocol):
    """Contract for text embedders: deterministic within one instance."""

    dimension: int
    fingerprint: str

    def embed(self, text: str) -> np.ndarray: ...


_FNV_OFFSET = np.uint64(14695981039346656037)
_FNV_PRIME = np.uint64(1099511628211)


class HashingEmbedder:
    """Deterministic character-n-gram hashing embedder.

    Stands in for a pretrained sentence encoder in tests and offline
    runs: n-grams of the UTF-8 text are FNV-hashed into sign buckets and
    the result is L2-normalized. Identical text yields identical vectors
    on every platform and run.
    """

    def __init__(self, dimension: int = 256, ngram: int = 3):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self.dimension = dimension
        self.ngram = ngram
        self.fingerprint = f"hashing-ngram{ngram}:dim={dimension}:v1"

    def _bytes(self, text: str) -> np.ndarray:
        data = np.frombuffer(f" {text} ".encode("utf-8"), dtype=np.uint8)
        if len(data) < self.ngram:
            data = np.pad(data, (0, self.ngram - len(data)), constant_values=32)
        return data

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        if not text:
            return vec
        data = self._bytes(text)
        n = self.ngram
        windows = np.lib.stride_tricks.sliding_window_view(data, n).astype(np.uint64)
        h = np.full(windows.shape[0], _FNV_OFFSET)
        with np.errstate(over="ignore"):
            for j in range(n):
                h = (h ^ windows[:, j]) * _FNV_PRIME
        buckets = (h % np.uint64(self.dimension)).astype(np.intp)
        signs = np.where((h >> np.uint64(63)) & np.uint64(1), -1.0, 1.0)
        np.add.at(vec, buckets, signs)
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed_many(self, texts: list[str]) -> np.ndarray:
        """Batch embedding, bit-identical to per-text :meth:`embed`.

        All texts are hashed in one flat pass; n-grams never cross text
        boundaries because window starts are limited to each text's span.
        """
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        chunks = []
        owners = []
        window_counts = []
        for i, text in enumerate(texts):
            if not text:
                continue
            data = self._bytes(text)
            chunks.append(data)
            owners.append(i)
            window_counts.append(len(data) - self.ngram + 1)
        if not chunks:
            return out
        flat = np.concatenate(chunks)
        lengths = np.array([len(c) for c in chunks])
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        counts = np.array(window_counts)
        total = int(counts.sum())
        # Global start index of every window in the flat buffer.
        base = np.repeat(starts, counts) + (
            np.arange(total) - np.repeat(np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
        )
        n = self.ngram
        h = np.full(total, _FNV_OFFSET)
        with np.errstate(over="ignore"):
            for j in range(n):
                h = (h ^ flat[base + j].astype(np.uint64)) * _FNV_PRIME
        buckets = (h % np.uint64(self.dimension)).astype(np.intp)
        signs = np.where((h >> np.uint64(63)) & np.uint64(1), -1.0, 1.0)
        rows = np.repeat(np.array(owners, dtype=np.intp), counts)
        np.add.at(out, (rows, buckets), signs)
        norms = np.linalg.norm(out, axis=1)
        norms[norms == 0.0] = 1.0
        return out / norms[:, None]


class SemanticIndex(BaseEstimator):
    """Vector store over reference records with exhaustive cosine scoring."""

    def __init__(self, provider=None):
        self.provider = provider

    def fit(self, records: list[ReferenceRecord], y=None) -> "SemanticIndex":
        provider = self.provider if self.provider is not None else HashingEmbedder()
        ids = [r.id for r in records]
        texts = [record_text(r) for r in records]
        if hasattr(provider, "embed_many"):
            matrix = np.asarray(provider.embed_many(texts), dtype=np.float64)
        else:
            matrix = np.zeros((len(records), provider.dimension), dtype=np.float64)
            for i, text in enumerate(texts):
                matrix[i] = provider.embed(text)
        self._finish(ids, matrix, provider.fingerprint, provider)
        return self

    def _finish(self, ids, matrix, fingerprint, provider) -> None:
        self.ids_ = tuple(ids)
        self.matrix_ = matrix
        self.dimension_ = matrix.shape[1]
        self.fingerprint_ = fingerprint
        self.provider_ = provider
        norms = np.linalg.norm(matrix, axis=1)
        norms[norms == 0.0] = 1.0
        # The exhaustive scan runs in single precision: halves memory
        # traffic at |error| <= ~1e-6, which clipping and fusion absorb.
        self._unit = np.ascontiguousarray((matrix / norms[:, None]),
                                          dtype=np.float32)
        self._row = {rid: i for i, rid in enumerate(self.ids_)}

    def vector(self, record_id: str) -> np.ndarray:
        check_is_fitted(self)
        return self.matrix_[self._row[record_id]]

    def scores(self, query_vec: np.ndarray) -> np.ndarray:
        """Clipped cosine of the query against every record, in id order."""
        check_is_fitted(self)
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.dimension_,):
            raise DimensionMismatch(
                f"query dimension {q.shape} vs store {self.dimension_}"
            )
        qn = np.linalg.norm(q)
        if qn == 0.0:
            return np.zeros(len(self.ids_))
        sims = self._unit @ (q / qn).astype(np.float32)
        return np.maximum(0.0, sims).astype(np.float64)

    def score_map(self, query_vec: np.ndarray) -> dict[str, float]:
        values = self.scores(query_vec)
        return {rid: float(values[i]) for i, rid in enumerate(self.ids_)}

    def embed_query(self, triad: Triad) -> np.ndarray:
        check_is_fitted(self)
        if self.provider_ is None:
            raise DimensionMismatch(
                "store was loaded from precomputed vectors; pass a query provider"
            )
        return self.provider_.embed(record_text(triad))

    # -- persistence (precomputed-vectors file) --------------------------

    def save_vectors(self, path) -> None:
        check_is_fitted(self)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(f"dim={self.dimension_}\n")
            for rid in self.ids_:
                row = ",".join(repr(float(v)) for v in self.vector(rid))
                handle.write(f"{rid}\t{row}\n")

    @classmethod
    def from_vectors_file(cls, path, query_provider=None) -> "SemanticIndex":
        """Build a store from a precomputed-vectors file.

        ``query_provider`` supplies query-time embeddings (it must be the
        encoder that produced the file); omit it only when queries are
        embedded elsewhere.
        """
        ids: list[str] = []
        rows: list[np.ndarray] = []
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
            if not header.startswith("dim="):
                raise ParseError(f"vectors file must start with 'dim=<D>', got {header!r}")
            dim = int(header[4:])
            for lineno, line in enumerate(handle, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                rid, sep, values = line.partition("\t")
                if not sep:
                    raise ParseError(f"line {lineno}: expected '<id>\\t<values>'")
                vec = np.array([float(v) for v in values.split(",")], dtype=np.float64)
                if vec.shape != (dim,):
                    raise DimensionMismatch(
                        f"line {lineno}: vector has {vec.shape[0]} dims, header says {dim}"
                    )
                ids.append(rid)
                rows.append(vec)
        if query_provider is not None and query_provider.dimension != dim:
            raise DimensionMismatch(
                f"query provider dimension {query_provider.dimension} vs file {dim}"
            )
        index = cls(provider=query_provider)
        matrix = np.vstack(rows) if rows else np.zeros((0, dim))
        fingerprint = (
            query_provider.fingerprint if query_provider is not None else "precomputed"
        )
        index._finish(ids, matrix, fingerprint, query_provider)
        return index
