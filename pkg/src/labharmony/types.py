"""Core domain types: triads, reference records, queries, weights, tags.

All types are immutable after construction and safe to share across
threads. Triad fields are stored in canonical form, so equality and
hashing operate on normalized text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError
from .textnorm import normalize_text

FIELDS = ("test", "sample", "unit")


@dataclass(frozen=True)
class Triad:
    """A (test name, sample type, unit) triple; the atomic harmonization payload.

    Fields are normalized on construction. The test name must be non-empty
    after normalization; sample and unit may be empty.
    """

    test: str
    sample: str = ""
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "test", normalize_text(self.test))
        object.__setattr__(self, "sample", normalize_text(self.sample))
        object.__setattr__(self, "unit", normalize_text(self.unit))
        if not self.test:
            raise ValidationError("triad test name is empty after normalization")

    def component(self, name: str) -> str:
        if name not in FIELDS:
            raise ValidationError(f"unknown triad component {name!r}")
        return getattr(self, name)

    def replace(self, **kwargs: str) -> "Triad":
        values = {f: getattr(self, f) for f in FIELDS}
        values.update(kwargs)
        return Triad(**values)

    def as_dict(self) -> dict[str, str]:
        return {"test": self.test, "sample": self.sample, "unit": self.unit}

    @classmethod
    def from_dict(cls, data: dict) -> "Triad":
        return cls(
            test=data.get("test", ""),
            sample=data.get("sample", ""),
            unit=data.get("unit", ""),
        )


@dataclass(frozen=True)
class ReferenceRecord:
    """A standardized database entry a query triad can harmonize to."""

    id: str
    triad: Triad
    labcode: str = ""
    preferred_unit: str = ""
    conversion_factor: float = 1.0
    synonyms: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValidationError("reference record id is empty")
        if not (self.conversion_factor > 0):
            raise ValidationError(
                f"record {self.id}: conversion_factor must be > 0, "
                f"got {self.conversion_factor}"
            )
        object.__setattr__(
            self,
            "synonyms",
            tuple(normalize_text(s) for s in self.synonyms if normalize_text(s)),
        )


@dataclass(frozen=True)
class QueryStats:
    """Descriptive statistics attached to a source query."""

    min: float
    max: float
    mean: float
    std: float

    def __post_init__(self):
        if not (self.min <= self.mean <= self.max):
            raise ValidationError(
                f"stats violate min <= mean <= max: {self.min}, {self.mean}, {self.max}"
            )
        if self.std < 0:
            raise ValidationError(f"stats std must be >= 0, got {self.std}")
        for v in (self.min, self.max, self.mean, self.std):
            if not math.isfinite(v):
                raise ValidationError("stats values must be finite")


_CODE_HINT = re.compile(r"^\d{1,5}-\d$")


@dataclass(frozen=True)
class QueryRecord:
    """A source triad to harmonize, with optional code hint and statistics."""

    triad: Triad
    code_hint: str | None = None
    frequency: int = 0
    stats: QueryStats | None = None

    def __post_init__(self):
        if self.frequency < 0:
            raise ValidationError(f"frequency must be >= 0, got {self.frequency}")
        if self.code_hint is not None and not _CODE_HINT.match(self.code_hint):
            raise ValidationError(f"malformed code hint {self.code_hint!r}")


# Bounds of the tunable fusion parameters: the two mixing weights range over
# [0, 10], the per-field boosts over [0, 5].
ALPHA_BETA_BOUNDS = (0.0, 10.0)
FIELD_WEIGHT_BOUNDS = (0.0, 5.0)
WEIGHT_BOUNDS = (
    ALPHA_BETA_BOUNDS,
    ALPHA_BETA_BOUNDS,
    FIELD_WEIGHT_BOUNDS,
    FIELD_WEIGHT_BOUNDS,
    FIELD_WEIGHT_BOUNDS,
)


@dataclass(frozen=True)
class WeightVector:
    """Fusion parameters [alpha, beta, w_test, w_sample, w_unit]."""

    alpha: float = 1.0
    beta: float = 1.0
    w_test: float = 1.0
    w_sample: float = 1.0
    w_unit: float = 1.0

    def __post_init__(self):
        for value, (lo, hi), name in zip(
            self.as_tuple(),
            WEIGHT_BOUNDS,
            ("alpha", "beta", "w_test", "w_sample", "w_unit"),
        ):
            if not (lo <= value <= hi):
                raise ValidationError(
                    f"{name}={value} outside bounds [{lo}, {hi}]"
                )

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.alpha, self.beta, self.w_test, self.w_sample, self.w_unit)

    def field_weight(self, field_name: str) -> float:
        return {
            "test": self.w_test,
            "sample": self.w_sample,
            "unit": self.w_unit,
        }[field_name]

    @classmethod
    def from_sequence(cls, values) -> "WeightVector":
        alpha, beta, w_test, w_sample, w_unit = (float(v) for v in values)
        return cls(alpha, beta, w_test, w_sample, w_unit)


class TagStatus(str, Enum):
    """Workflow state of a harmonization decision. Closed enumeration."""

    MISSING = "Missing"
    VERIFIED = "Verified"
    PENDING = "Pending"
    HUMAN = "Human"
    COPY = "Copy"
    RERANKED = "Reranked"

    @classmethod
    def parse(cls, value: str) -> "TagStatus":
        for member in cls:
            if member.value == value:
                return member
        raise ValidationError(f"unknown tag status {value!r}")
