"""Labeled triad-pair generation for compatibility-scorer training.

Positives substitute synonyms into a source triad; negatives corrupt the
test name (N1), test and sample (N2) or all three components (N3) with
values drawn from the reference pool, always checking replacements
against the synonym groups so labels are sound by construction. Hard
negatives come from retrieval near-misses: triads that share tokens with
the source but are not synonym-equivalent.

Class mix and the easy/hard ramp use quota scheduling (largest deficit
first), so generated streams hit their target proportions within one
pair at every prefix, and a fixed seed reproduces the stream byte for
byte.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPool, ParseError, ValidationError
from .hybrid import HybridRetriever
from .semantic import HashingEmbedder
from .synonyms import SynonymDictionary
from .textnorm import tokenize
from .types import FIELDS, ReferenceRecord, Triad

CLASSES = ("POS", "N1", "N2", "N3")
CORRUPTED = {"N1": ("test",), "N2": ("test", "sample"), "N3": FIELDS}


@dataclass(frozen=True)
class LabeledPair:
    """Two triads plus a binary compatibility label and provenance."""

    left: Triad
    right: Triad
    label: int
    corruption_class: str
    difficulty: str = "easy"

    def __post_init__(self):
        if self.corruption_class not in CLASSES:
            raise ValidationError(f"unknown corruption class {self.corruption_class!r}")
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")
        if (self.label == 1) != (self.corruption_class == "POS"):
            raise ValidationError("label 1 <=> class POS violated")
        if self.difficulty not in ("easy", "hard"):
            raise ValidationError(f"unknown difficulty {self.difficulty!r}")

    def as_dict(self) -> dict:
        return {
            "left": self.left.as_dict(),
            "right": self.right.as_dict(),
            "label": self.label,
            "class": self.corruption_class,
            "difficulty": self.difficulty,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LabeledPair":
        return cls(
            left=Triad.from_dict(data["left"]),
            right=Triad.from_dict(data["right"]),
            label=int(data["label"]),
            corruption_class=data["class"],
            difficulty=data.get("difficulty", "easy"),
        )


@dataclass(frozen=True)
class GenerationSchedule:
    """Pair counts and mixing targets for one generation run.

    ``hard_stages`` maps progress milestones to the hard-negative
    fraction in force until that point; fractions must be non-decreasing
    (difficulty ramps up, never down).
    """

    total: int
    positive_fraction: float = 0.5
    negative_fractions: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    hard_stages: tuple[tuple[float, float], ...] = ((1 / 3, 0.2), (1.0, 0.5))

    def __post_init__(self):
        if self.total < 1:
            raise ValidationError("total must be >= 1")
        if not (0.0 <= self.positive_fraction <= 1.0):
            raise ValidationError("positive_fraction must be in [0, 1]")
        if abs(sum(self.negative_fractions) - 1.0) > 1e-9:
            raise ValidationError("negative_fractions must sum to 1")
        fractions = [f for _, f in self.hard_stages]
        if any(b > a for a, b in zip(fractions[1:], fractions)):
            raise ValidationError("hard-negative ramp must be non-decreasing")
        if self.hard_stages and self.hard_stages[-1][0] < 1.0:
            raise ValidationError("last hard stage must cover progress 1.0")

    def class_fractions(self) -> dict[str, float]:
        neg = 1.0 - self.positive_fraction
        f1, f2, f3 = self.negative_fractions
        return {"POS": self.positive_fraction, "N1": neg * f1,
                "N2": neg * f2, "N3": neg * f3}

    def hard_fraction(self, progress: float) -> float:
        for milestone, fraction in self.hard_stages:
            if progress <= milestone:
                return fraction
        return self.hard_stages[-1][1]


def synonym_equivalent(a: Triad, b: Triad, synonyms: SynonymDictionary) -> bool:
    """True when every component pair is equal or shares a synonym group."""
    return all(
        synonyms.same_group(a.component(f), b.component(f), f) for f in FIELDS
    )


class PairFactory:
    """Deterministic generator of labeled pairs over a reference pool."""

    def __init__(self, pool, synonyms: SynonymDictionary, seed: int = 0,
                 retriever: HybridRetriever | None = None, hard_k: int = 10,
                 syn_sub_prob: float = 0.25):
        triads = [p.triad if isinstance(p, ReferenceRecord) else p for p in pool]
        self.pool = sorted(set(triads), key=lambda t: (t.test, t.sample, t.unit))
        if len(self.pool) < 2:
            raise InsufficientPool("need at least 2 distinct triads")
        self.synonyms = synonyms
        self.rng = np.random.default_rng(seed)
        self.hard_k = hard_k
        self.syn_sub_prob = syn_sub_prob
        self._tests = sorted({t.test for t in self.pool})
        self._samples = sorted({t.sample for t in self.pool if t.sample})
        self._units = sorted({t.unit for t in self.pool if t.unit})
        self._retriever = retriever
        self._hard_cache: dict[Triad, list[Triad]] = {}
        self._eligible_cache: dict[tuple[str, str], list[str]] = {}
        self._variant_cache: dict[tuple[str, str], list[str]] = {}

    # -- retrieval-backed mining -----------------------------------------

    def _pool_retriever(self) -> HybridRetriever:
        if self._retriever is None:
            records = [
                ReferenceRecord(id=f"p{i:06d}", triad=t)
                for i, t in enumerate(self.pool)
            ]
            self._retriever = HybridRetriever(
                synonyms=self.synonyms, provider=HashingEmbedder(dimension=128)
            ).fit(records)
            self._retriever_triads = {r.id: r.triad for r in records}
        elif not hasattr(self, "_retriever_triads"):
            self._retriever_triads = {
                rid: rec.triad for rid, rec in self._retriever.records_.items()
            }
        return self._retriever

    def mine_hard_negatives(self, source: Triad, k: int | None = None) -> list[Triad]:
        """Near-miss triads: retrieval top hits sharing a token with the
        source but failing synonym equivalence on at least one component."""
        k = self.hard_k if k is None else k
        if k <= 0:
            return []
        retriever = self._pool_retriever()
        if source not in self._hard_cache:
            source_tokens = set(
                tokenize(source.test) + tokenize(source.sample) + tokenize(source.unit)
            )
            mined: list[Triad] = []
            for cand in retriever.retrieve(source, top_k=self.hard_k * 3):
                triad = self._retriever_triads[cand.record_id]
                if synonym_equivalent(source, triad, self.synonyms):
                    continue
                cand_tokens = set(
                    tokenize(triad.test) + tokenize(triad.sample) + tokenize(triad.unit)
                )
                if source_tokens & cand_tokens:
                    mined.append(triad)
            self._hard_cache[source] = mined
        return self._hard_cache[source][:k]

    # -- single-pair construction ----------------------------------------

    def _synonym_variant(self, value: str, category: str) -> str:
        key = (value, category)
        group = self._variant_cache.get(key)
        if group is None:
            group = sorted(self.synonyms.group_of(value, category) - {value})
            self._variant_cache[key] = group
        if not group:
            return value
        return group[self.rng.integers(len(group))]

    def make_positive(self, source: Triad) -> LabeledPair:
        """Synonym-substituted twin of the source; identical when no
        component has a synonym group."""
        substitutable = [
            f for f in FIELDS
            if len(self.synonyms.group_of(source.component(f), f)) > 1
        ]
        values = {f: source.component(f) for f in FIELDS}
        if substitutable:
            picks = [f for f in substitutable if self.rng.random() < 0.5]
            if not picks:
                picks = [substitutable[self.rng.integers(len(substitutable))]]
            for f in picks:
                values[f] = self._synonym_variant(values[f], f)
        return LabeledPair(left=source, right=Triad(**values), label=1,
                           corruption_class="POS")

    def _corrupt_value(self, source_value: str, category: str) -> str:
        key = (source_value, category)
        eligible = self._eligible_cache.get(key)
        if eligible is None:
            choices = {"test": self._tests, "sample": self._samples,
                       "unit": self._units}[category]
            eligible = [
                v for v in choices
                if not self.synonyms.same_group(v, source_value, category)
            ]
            self._eligible_cache[key] = eligible
        if not eligible:
            raise InsufficientPool(
                f"no {category} value outside the synonym group of {source_value!r}"
            )
        return eligible[self.rng.integers(len(eligible))]

    def _finish_negative(self, source: Triad, values: dict[str, str],
                         corrupt_class: str, difficulty: str) -> LabeledPair:
        # Uncorrupted components may still drift within their synonym
        # group; the label stays 0 because the corrupted ones left it.
        for f in FIELDS:
            if f not in CORRUPTED[corrupt_class] and self.rng.random() < self.syn_sub_prob:
                values[f] = self._synonym_variant(values[f], f)
        return LabeledPair(left=source, right=Triad(**values), label=0,
                           corruption_class=corrupt_class, difficulty=difficulty)

    def make_negative(self, source: Triad, corrupt_class: str,
                      difficulty: str = "easy") -> LabeledPair:
        """Corrupt the class-designated components with non-synonymous
        pool values; hard negatives source them from retrieval near-misses."""
        if corrupt_class not in ("N1", "N2", "N3"):
            raise ValidationError(f"corrupt_class must be N1/N2/N3, got {corrupt_class!r}")
        if difficulty == "hard":
            pair = self._try_hard_negative(source, corrupt_class)
            if pair is not None:
                return pair
            difficulty = "easy"
        values = {f: source.component(f) for f in FIELDS}
        for f in CORRUPTED[corrupt_class]:
            values[f] = self._corrupt_value(source.component(f), f)
        return self._finish_negative(source, values, corrupt_class, difficulty)

    def _try_hard_negative(self, source: Triad, corrupt_class: str) -> LabeledPair | None:
        for mined in self.mine_hard_negatives(source):
            ok = all(
                not self.synonyms.same_group(
                    mined.component(f), source.component(f), f
                ) and (mined.component(f) or f == "test")
                for f in CORRUPTED[corrupt_class]
            )
            if not ok:
                continue
            values = {f: source.component(f) for f in FIELDS}
            for f in CORRUPTED[corrupt_class]:
                values[f] = mined.component(f)
            return self._finish_negative(source, values, corrupt_class, "hard")
        return None

    # -- streaming generation --------------------------------------------

    def generate(self, schedule: GenerationSchedule):
        """Yield ``schedule.total`` pairs with quota-scheduled class mix."""
        fractions = schedule.class_fractions()
        counts = {c: 0 for c in CLASSES}
        neg_count = 0
        hard_count = 0
        for i in range(schedule.total):
            # Largest per-class deficit keeps every prefix on target.
            cls = max(
                CLASSES,
                key=lambda c: (fractions[c] * (i + 1) - counts[c], c),
            )
            counts[cls] += 1
            source = self.pool[self.rng.integers(len(self.pool))]
            if cls == "POS":
                yield self.make_positive(source)
                continue
            progress = (i + 1) / schedule.total
            h = schedule.hard_fraction(progress)
            d_hard = h * (neg_count + 1) - hard_count
            d_easy = (1.0 - h) * (neg_count + 1) - (neg_count - hard_count)
            difficulty = "hard" if d_hard >= d_easy else "easy"
            pair = self.make_negative(source, cls, difficulty)
            neg_count += 1
            if pair.difficulty == "hard":
                hard_count += 1
            yield pair


def generate_dataset(pool, synonyms: SynonymDictionary,
                     schedule: GenerationSchedule, seed: int = 0):
    """One-call stream of labeled pairs (see :class:`PairFactory`)."""
    factory = PairFactory(pool, synonyms, seed=seed)
    yield from factory.generate(schedule)


def is_sound(pair: LabeledPair, synonyms: SynonymDictionary) -> bool:
    """Exact dictionary check of the label/class contract."""
    if pair.label == 1:
        return synonym_equivalent(pair.left, pair.right, synonyms)
    corrupted = CORRUPTED[pair.corruption_class]
    for f in FIELDS:
        same = synonyms.same_group(
            pair.left.component(f), pair.right.component(f), f
        )
        if f in corrupted and same:
            return False
        if f not in corrupted and not same:
            return False
    return True


# -- pair file round-trip -------------------------------------------------

def _open(path, mode: str):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_pairs(path, pairs) -> int:
    """Serialize pairs as JSON-lines; returns the number written."""
    n = 0
    with _open(path, "w") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.as_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_pairs(path) -> list[LabeledPair]:
    out = []
    with _open(path, "r") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(LabeledPair.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
    return out
