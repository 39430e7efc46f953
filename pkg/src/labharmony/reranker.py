"""Pairwise compatibility scoring, training, and candidate reranking.

The scoring contract is encode(query, candidate) -> probability; behind
it ships a feature-based linear model (per-component token Jaccard,
Levenshtein similarity, synonym-group hit, embedding cosine, plus
cross-component aggregates) trained with warmup/decay SGD, gradient
clipping and binary cross-entropy. A transformer or remote backend can
replace it without touching callers (see external.py for the wire
adapters).

Reranking mixes the min-max-normalized retrieval score with the
compatibility probability, final = lam * retrieval + (1 - lam) * p, and
a separate top-1 override promotes the scorer's favourite only when its
probability beats the retrieval winner's.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (
    DivergenceError,
    EmptyCandidateList,
    EmptyDataset,
    LengthMismatch,
    ValidationError,
)
from .fuzzy import levenshtein
from .hybrid import RankedCandidate
from .semantic import HashingEmbedder, record_text
from .synonyms import SynonymDictionary
from .textnorm import tokenize
from .types import FIELDS, TagStatus, Triad

DEFAULT_LAMBDA = 0.3
TOKEN_BUDGET = 384

MARKERS = ("TEST:", "SAMPLE:", "UNIT:")


@dataclass(frozen=True)
class PairEncoding:
    """Serialized query/candidate pair in the fixed sentence-pair template."""

    left: Triad
    right: Triad
    text: str


def _triad_tokens(triad: Triad) -> list[list[str]]:
    return [triad.test.split(), triad.sample.split(), triad.unit.split()]


def encode_pair(query: Triad, candidate: Triad,
                token_budget: int = TOKEN_BUDGET) -> PairEncoding:
    """Render "<s> T1 </s></s> T2 </s>" with T = "TEST: .. SAMPLE: .. UNIT: ..".

    When the whitespace token count exceeds the budget, content tokens are
    dropped from the right (candidate fields first, then query fields);
    the structural markers always survive.
    """
    fields = [_triad_tokens(query), _triad_tokens(candidate)]
    structural = 3 + 2 * len(MARKERS)  # <s>, </s></s>, </s> and two marker sets
    count = structural + sum(len(f) for side in fields for f in side)
    while count > token_budget:
        for side in (1, 0):
            trimmed = False
            for f in (2, 1, 0):
                if fields[side][f]:
                    fields[side][f].pop()
                    count -= 1
                    trimmed = True
                    break
            if trimmed:
                break
        else:
            break

    def render_exact(side: list[list[str]]) -> str:
        return (
            f"TEST: {' '.join(side[0])} "
            f"SAMPLE: {' '.join(side[1])} "
            f"UNIT: {' '.join(side[2])}"
        )

    text = f"<s> {render_exact(fields[0])} </s></s> {render_exact(fields[1])} </s>"
    return PairEncoding(left=query, right=candidate, text=text)


# -- loss functions ---------------------------------------------------------


def _smooth(labels: np.ndarray, eps: float) -> np.ndarray:
    return labels * (1.0 - eps) + eps / 2.0


def bce_with_logits(logits, labels, eps: float = 0.0) -> float:
    """Mean binary cross-entropy from raw scores, numerically stable."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise LengthMismatch(f"{z.shape} logits vs {y.shape} labels")
    yt = _smooth(y, eps)
    # softplus(z) - y*z, with softplus in its overflow-safe form
    loss = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - yt * z
    return float(loss.mean())


def bce_loss(predictions, labels, eps: float = 0.0) -> float:
    """Mean BCE of probabilities in (0, 1); routed through the logit form."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.shape} predictions vs {y.shape} labels")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValidationError("predictions must lie strictly inside (0, 1)")
    return bce_with_logits(np.log(p) - np.log1p(-p), y, eps)


def clip_gradient(grad: np.ndarray, max_norm: float = 1.0) -> np.ndarray:
    """Scale the gradient to at most the given L2 norm."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm > 0.0:
        return grad * (max_norm / norm)
    return grad


def lr_at(step: int, total: int, warmup: int, lr_max: float) -> float:
    """Piecewise-linear schedule: warmup to lr_max, then decay to zero."""
    if warmup > 0 and step <= warmup:
        return lr_max * step / warmup
    if total == warmup:
        return lr_max
    return lr_max * (total - step) / (total - warmup)


@dataclass(frozen=True)
class TrainConfig:
    """Linear-scorer training knobs.

    lr_max defaults to 1e-2, which suits the shipped linear model;
    transformer backends conventionally train near 1e-5. The deviation is
    echoed in the report header so downstream readers see it.
    """

    lr_max: float = 1e-2
    warmup_fraction: float = 0.1
    max_grad_norm: float = 1.0
    label_smoothing: float = 0.0
    epochs: int = 1
    batch_size: int = 256
    val_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.label_smoothing <= 0.2):
            raise ValidationError("label smoothing must be in [0, 0.2]")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise ValidationError("warmup fraction must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")


@dataclass
class TrainReport:
    """Training outcome: loss trajectory and held-out classification metrics."""

    steps: int
    lr_max: float
    warmup_steps: int
    train_size: int
    val_size: int
    loss_curve: list[float] = field(default_factory=list)
    val_accuracy: float = 0.0
    val_precision: float = 0.0
    val_recall: float = 0.0
    val_f1: float = 0.0
    header: str = ""

    def as_dict(self) -> dict:
        return {
            "header": self.header,
            "steps": self.steps,
            "lr_max": self.lr_max,
            "warmup_steps": self.warmup_steps,
            "train_size": self.train_size,
            "val_size": self.val_size,
            "val_accuracy": self.val_accuracy,
            "val_precision": self.val_precision,
            "val_recall": self.val_recall,
            "val_f1": self.val_f1,
        }


FEATURE_NAMES = tuple(
    [f"{f}_{kind}" for f in FIELDS for kind in ("jaccard", "edit_sim", "syn_hit", "cosine")]
    + ["mean_jaccard", "min_edit_sim", "all_syn", "pair_cosine"]
)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


class CompatibilityClassifier(BaseEstimator):
    """Feature-based linear compatibility scorer with a sigmoid output.

    Deterministic at inference for a fixed trained model; safe to call
    from multiple threads.
    """

    version = "linear-v1"

    def __init__(self, synonyms=None, provider=None):
        self.synonyms = synonyms
        self.provider = provider

    # -- features ---------------------------------------------------------

    def _embed(self, text: str) -> tuple[np.ndarray, float]:
        cache = self._embed_cache
        entry = cache.get(text)
        if entry is None:
            vec = self._provider.embed(text)
            entry = (vec, float(np.linalg.norm(vec)))
            cache[text] = entry
        return entry

    def _tokens(self, text: str) -> frozenset:
        cache = self._token_cache
        tokens = cache.get(text)
        if tokens is None:
            tokens = frozenset(tokenize(text))
            cache[text] = tokens
        return tokens

    def _cosine(self, a: str, b: str) -> float:
        va, na = self._embed(a)
        vb, nb = self._embed(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(va @ vb / (na * nb))

    def _component_features(self, a: str, b: str, category: str) -> list[float]:
        ta, tb = self._tokens(a), self._tokens(b)
        if not ta and not tb:
            jaccard = 1.0
        elif not ta or not tb:
            jaccard = 0.0
        else:
            jaccard = len(ta & tb) / len(ta | tb)

        if not a and not b:
            edit_sim = 1.0
        else:
            edit_sim = 1.0 - levenshtein(a, b) / max(len(a), len(b))

        syn_hit = 1.0 if self._synonyms.same_group(a, b, category) else 0.0

        if not a and not b:
            cos = 1.0
        elif not a or not b:
            cos = 0.0
        else:
            cos = self._cosine(a, b)
        return [jaccard, edit_sim, syn_hit, cos]

    def featurize(self, left: Triad, right: Triad) -> np.ndarray:
        values: list[float] = []
        for f in FIELDS:
            values.extend(self._component_features(
                left.component(f), right.component(f), f))
        jaccards = values[0::4][:3]
        edits = values[1::4][:3]
        syn = values[2::4][:3]
        values.append(sum(jaccards) / 3.0)
        values.append(min(edits))
        values.append(syn[0] * syn[1] * syn[2])
        values.append(self._cosine(record_text(left), record_text(right)))
        return np.array(values, dtype=np.float64)

    def featurize_pairs(self, pairs) -> np.ndarray:
        return np.vstack([self.featurize(l, r) for l, r in pairs])

    # -- estimator surface -------------------------------------------------

    def _setup(self) -> None:
        self._synonyms = self.synonyms if self.synonyms is not None else SynonymDictionary.empty()
        self._provider = self.provider if self.provider is not None else HashingEmbedder(dimension=128)
        if not hasattr(self, "_embed_cache"):
            self._embed_cache = {}
        if not hasattr(self, "_token_cache"):
            self._token_cache = {}

    def fit(self, pairs, y=None, config: TrainConfig | None = None) -> "CompatibilityClassifier":
        """Train on labeled pairs (labels default to ``pair.label``)."""
        self._setup()
        pairs = list(pairs)
        if not pairs:
            raise EmptyDataset("no training pairs")
        if y is None:
            labels = np.array([p.label for p in pairs], dtype=np.float64)
        else:
            labels = np.asarray(y, dtype=np.float64)
        if len(labels) != len(pairs):
            raise LengthMismatch(f"{len(pairs)} pairs vs {len(labels)} labels")
        X = self.featurize_pairs([(p.left, p.right) for p in pairs])
        self.report_ = train_linear(self, X, labels, config or TrainConfig())
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        check_is_fitted(self, "weights_")
        return X @ self.weights_ + self.bias_

    def score_pairs(self, pairs) -> np.ndarray:
        """Compatibility probability for (left, right) triad pairs."""
        check_is_fitted(self, "weights_")
        self._setup()
        X = self.featurize_pairs(pairs)
        return _sigmoid(self.decision_function(X))

    def score(self, query: Triad, candidate: Triad) -> float:
        return float(self.score_pairs([(query, candidate)])[0])

    def score_encoding(self, encoding: PairEncoding) -> float:
        return self.score(encoding.left, encoding.right)

    def predict_proba(self, pairs) -> np.ndarray:
        p = self.score_pairs(pairs)
        return np.column_stack([1.0 - p, p])

    def predict(self, pairs) -> np.ndarray:
        return (self.score_pairs(pairs) >= 0.5).astype(int)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        check_is_fitted(self, "weights_")
        payload = {
            "version": self.version,
            "feature_names": list(FEATURE_NAMES),
            "weights": [float(w) for w in self.weights_],
            "bias": float(self.bias_),
            "trained_on": getattr(self, "trained_on_", {}),
            "metrics": self.report_.as_dict() if hasattr(self, "report_") else {},
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)

    def load_weights(self, path) -> "CompatibilityClassifier":
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        if payload.get("feature_names") != list(FEATURE_NAMES):
            raise ValidationError("model file feature set does not match this build")
        self._setup()
        self.weights_ = np.array(payload["weights"], dtype=np.float64)
        self.bias_ = float(payload["bias"])
        self.trained_on_ = payload.get("trained_on", {})
        return self


def loss_and_gradient(weights: np.ndarray, bias: float, X: np.ndarray,
                      labels: np.ndarray, eps: float = 0.0):
    """Batch BCE loss and its analytic gradient for the linear model."""
    z = X @ weights + bias
    yt = _smooth(labels, eps)
    loss = bce_with_logits(z, labels, eps)
    residual = _sigmoid(z) - yt
    grad_w = X.T @ residual / len(labels)
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def train_linear(clf: CompatibilityClassifier, X: np.ndarray, labels: np.ndarray,
                 cfg: TrainConfig) -> TrainReport:
    """Mini-batch SGD with linear warmup/decay and gradient clipping."""
    n = len(labels)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_val = int(round(n * cfg.val_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise EmptyDataset("validation split leaves no training pairs")

    Xt, yt = X[train_idx], labels[train_idx]
    steps_per_epoch = math.ceil(len(train_idx) / cfg.batch_size)
    total = steps_per_epoch * cfg.epochs
    warmup = min(int(round(cfg.warmup_fraction * total)), total - 1)

    w = np.zeros(X.shape[1])
    b = 0.0
    losses: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), cfg.batch_size):
            step += 1
            batch = perm[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_gradient(w, b, Xt[batch], yt[batch],
                                             cfg.label_smoothing)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}")
            losses.append(loss)
            g = clip_gradient(np.concatenate([gw, [gb]]), cfg.max_grad_norm)
            lr = lr_at(step, total, warmup, cfg.lr_max)
            w -= lr * g[:-1]
            b -= lr * g[-1]

    clf.weights_ = w
    clf.bias_ = b
    clf.trained_on_ = {"pairs": n, "seed": cfg.seed, "epochs": cfg.epochs}

    report = TrainReport(
        steps=total, lr_max=cfg.lr_max, warmup_steps=warmup,
        train_size=len(train_idx), val_size=n_val, loss_curve=losses,
        header=(
            f"linear compatibility scorer; lr_max={cfg.lr_max} "
            "(transformer backends conventionally use 1e-5; the higher rate "
            "suits this low-dimensional model)"
        ),
    )
    if n_val:
        p = _sigmoid(X[val_idx] @ w + b)
        pred = (p >= 0.5).astype(int)
        truth = labels[val_idx].astype(int)
        tp = int(np.sum((pred == 1) & (truth == 1)))
        fp = int(np.sum((pred == 1) & (truth == 0)))
        fn = int(np.sum((pred == 0) & (truth == 1)))
        report.val_accuracy = float(np.mean(pred == truth))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        report.val_precision = precision
        report.val_recall = recall
        report.val_f1 = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
    return report


def train(clf: CompatibilityClassifier, pairs, cfg: TrainConfig | None = None) -> TrainReport:
    """Train the scorer on a pair stream and return the report."""
    clf.fit(pairs, config=cfg or TrainConfig())
    return clf.report_


# -- candidate reranking ------------------------------------------------------


def rerank(query: Triad, candidates: list[RankedCandidate], scorer,
           triads: dict[str, Triad], lam: float = DEFAULT_LAMBDA) -> list[RankedCandidate]:
    """Mix normalized retrieval scores with compatibility probabilities.

    final = lam * retrieval_norm + (1 - lam) * p. Candidates must already
    carry retrieval_norm (see normalize_candidate_scores); ties break on
    record id. ``triads`` maps candidate record ids to their triads.
    """
    if not candidates:
        raise EmptyCandidateList("nothing to rerank")
    if any(c.retrieval_norm is None for c in candidates):
        raise ValidationError("candidates lack retrieval_norm; normalize first")
    if hasattr(scorer, "score_pairs"):
        probs = scorer.score_pairs([(query, triads[c.record_id]) for c in candidates])
    else:
        probs = [scorer.score_encoding(encode_pair(query, triads[c.record_id]))
                 for c in candidates]
    annotated = [
        replace(c, rerank_p=float(p), final_score=lam * c.retrieval_norm + (1.0 - lam) * float(p))
        for c, p in zip(candidates, probs)
    ]
    annotated.sort(key=lambda c: (-c.final_score, c.record_id))
    return [replace(c, rank=i) for i, c in enumerate(annotated, start=1)]


def override_top1(original: list[RankedCandidate],
                  reranked: list[RankedCandidate],
                  scorer=None) -> tuple[list[RankedCandidate], TagStatus]:
    """Promote the scorer's favourite over the retrieval winner when its
    compatibility probability is strictly higher; otherwise keep the
    retrieval order. Returns the final list and the Reranked/Pending tag."""
    if not original or not reranked:
        return list(original), TagStatus.PENDING
    if {c.record_id for c in original} != {c.record_id for c in reranked}:
        raise ValidationError("override requires identical candidate sets")
    p_of = {c.record_id: c.rerank_p for c in reranked}
    best = min(reranked, key=lambda c: (-(c.rerank_p or 0.0), c.record_id))
    top = original[0]
    top_p = p_of.get(top.record_id) or 0.0
    if best.record_id != top.record_id and (best.rerank_p or 0.0) > top_p:
        promoted = [best] + [c for c in reranked if c.record_id != best.record_id]
        final = [replace(c, rank=i) for i, c in enumerate(promoted, start=1)]
        return final, TagStatus.RERANKED
    return list(original), TagStatus.PENDING
