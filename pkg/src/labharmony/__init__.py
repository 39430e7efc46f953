"""Laboratory triad harmonization: hybrid retrieval, tuning, reranking.

The estimator surfaces follow the usual fit/predict conventions:
``Bm25Index`` and ``SemanticIndex`` fit on reference records,
``HybridRetriever`` fuses them for ranked candidate retrieval, and
``CompatibilityClassifier`` is a fit/predict_proba pair scorer used for
reranking. Batch and service workflows live in :mod:`labharmony.pipeline`
and :mod:`labharmony.service`.
"""

from .hybrid import HybridRetriever, RankedCandidate, RetrievalConfig, normalize_candidate_scores
from .lexical import Bm25Index, Bm25Params
from .pairs import GenerationSchedule, LabeledPair, PairFactory
from .reranker import CompatibilityClassifier, TrainConfig, encode_pair, override_top1, rerank
from .semantic import HashingEmbedder, SemanticIndex, cosine_similarity, record_text
from .synonyms import SynonymDictionary, load_seed_dictionary, load_synonym_dictionary
from .textnorm import normalize_text, tokenize
from .types import QueryRecord, ReferenceRecord, TagStatus, Triad, WeightVector

__version__ = "0.1.0"

__all__ = [
    "Bm25Index",
    "Bm25Params",
    "CompatibilityClassifier",
    "GenerationSchedule",
    "HashingEmbedder",
    "HybridRetriever",
    "LabeledPair",
    "PairFactory",
    "QueryRecord",
    "RankedCandidate",
    "ReferenceRecord",
    "RetrievalConfig",
    "SemanticIndex",
    "SynonymDictionary",
    "TagStatus",
    "TrainConfig",
    "Triad",
    "WeightVector",
    "cosine_similarity",
    "encode_pair",
    "load_seed_dictionary",
    "load_synonym_dictionary",
    "normalize_candidate_scores",
    "normalize_text",
    "override_top1",
    "record_text",
    "rerank",
    "tokenize",
]
