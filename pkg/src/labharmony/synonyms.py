"""Synonym dictionary: curated term groups per category with O(1) lookup.

File format: UTF-8 text, one group per line, comma-separated terms. The
first token is the category prefix (``unit:``, ``sample:`` or ``test:``);
``#`` starts a comment line. Groups are symmetric: any member expands to
all members. Within a category, groups must be pairwise disjoint after
normalization; duplicates inside one group collapse silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import OverlapError, ParseError
from .textnorm import normalize_text

CATEGORIES = ("test", "sample", "unit")


@dataclass(frozen=True)
class SynonymDictionary:
    """Normalized, disjoint synonym groups for tests, samples and units."""

    test_groups: tuple[frozenset[str], ...] = ()
    sample_groups: tuple[frozenset[str], ...] = ()
    unit_groups: tuple[frozenset[str], ...] = ()
    _lookup: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lookup: dict[str, dict[str, frozenset[str]]] = {c: {} for c in CATEGORIES}
        for category in CATEGORIES:
            for group in self.groups(category):
                for term in group:
                    if term in lookup[category]:
                        raise OverlapError(
                            f"term {term!r} appears in two {category} groups"
                        )
                    lookup[category][term] = group
        object.__setattr__(self, "_lookup", lookup)

    def groups(self, category: str) -> tuple[frozenset[str], ...]:
        if category not in CATEGORIES:
            raise ParseError(f"unknown synonym category {category!r}")
        return getattr(self, f"{category}_groups")

    def group_of(self, term: str, category: str) -> frozenset[str]:
        """Group containing the normalized term, else the singleton {term}."""
        norm = normalize_text(term)
        if category not in CATEGORIES:
            raise ParseError(f"unknown synonym category {category!r}")
        return self._lookup[category].get(norm, frozenset((norm,)))

    def same_group(self, a: str, b: str, category: str) -> bool:
        """True when the two terms are equal or share a synonym group."""
        na, nb = normalize_text(a), normalize_text(b)
        return na == nb or nb in self.group_of(na, category)

    def size(self) -> dict[str, int]:
        return {c: len(self.groups(c)) for c in CATEGORIES}

    @classmethod
    def empty(cls) -> "SynonymDictionary":
        return cls()

    @classmethod
    def from_groups(
        cls,
        test: list[list[str]] | None = None,
        sample: list[list[str]] | None = None,
        unit: list[list[str]] | None = None,
    ) -> "SynonymDictionary":
        def build(groups):
            out = []
            for g in groups or ():
                normed = frozenset(normalize_text(t) for t in g if normalize_text(t))
                if normed:
                    out.append(normed)
            return tuple(out)

        return cls(
            test_groups=build(test),
            sample_groups=build(sample),
            unit_groups=build(unit),
        )


def parse_synonym_lines(lines) -> SynonymDictionary:
    """Parse the one-group-per-line format into a validated dictionary."""
    collected: dict[str, list[list[str]]] = {c: [] for c in CATEGORIES}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        prefix, sep, rest = line.partition(":")
        category = prefix.strip().lower()
        if not sep or category not in CATEGORIES:
            raise ParseError(f"line {lineno}: expected 'unit:'/'sample:'/'test:' prefix")
        terms = [t.strip() for t in rest.split(",")]
        terms = [t for t in terms if t]
        if not terms:
            raise ParseError(f"line {lineno}: group has no terms")
        collected[category].append(terms)
    return SynonymDictionary.from_groups(
        test=collected["test"], sample=collected["sample"], unit=collected["unit"]
    )


def load_synonym_dictionary(path: str | Path) -> SynonymDictionary:
    """Load and validate a synonym file (see module docstring for format)."""
    with open(path, encoding="utf-8") as handle:
        return parse_synonym_lines(handle)


def load_seed_dictionary() -> SynonymDictionary:
    """The dictionary shipped with the package (data/seed_synonyms.txt)."""
    text = resources.files("labharmony.data").joinpath("seed_synonyms.txt").read_text(
        encoding="utf-8"
    )
    return parse_synonym_lines(text.splitlines())
