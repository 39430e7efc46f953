"""Damerau-Levenshtein matching for query terms absent from the vocabulary."""

from __future__ import annotations

from collections import defaultdict
from functools import lru_cache


def _banded_osa(a: str, b: str, cap: int) -> int:
    """Optimal-string-alignment distance within a diagonal band.

    Exact whenever the true distance is <= cap; anything larger comes
    back as cap + 1. Cost is O(len(a) * cap) instead of the full table.
    """
    la, lb = len(a), len(b)
    if la > lb:
        a, b, la, lb = b, a, lb, la
    if lb - la > cap:
        return cap + 1
    inf = cap + 1
    width = 2 * cap + 1
    # Cell k of a row holds column j = i + k - cap.
    prev2 = [inf] * width
    prev = [inf] * width
    for k in range(cap, width):
        j = k - cap
        prev[k] = j if j <= lb else inf
    cur = [inf] * width
    for i in range(1, la + 1):
        for k in range(width):
            j = i + k - cap
            if j < 0 or j > lb:
                cur[k] = inf
                continue
            if j == 0:
                cur[k] = i
                continue
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = prev[k] + cost  # substitution/match at (i-1, j-1)
            if k + 1 < width and prev[k + 1] + 1 < best:
                best = prev[k + 1] + 1  # deletion from a
            if k >= 1 and cur[k - 1] + 1 < best:
                best = cur[k - 1] + 1  # insertion into a
            if (i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]
                    and prev2[k] + 1 < best):
                best = prev2[k] + 1  # adjacent transposition
            cur[k] = best if best <= cap else inf
        prev2, prev, cur = prev, cur, prev2
    result = prev[lb - la + cap]
    return result if result <= cap else cap + 1


@lru_cache(maxsize=262_144)
def damerau_levenshtein(a: str, b: str, cap: int | None = None) -> int:
    """Edit distance counting insert, delete, substitute and adjacent swap.

    Optimal-string-alignment variant. With ``cap`` set, any distance
    above it is reported as cap + 1. Without a cap the exact distance is
    found by iterative deepening over the banded kernel, so similar
    strings cost O(n * d) rather than O(n^2).
    """
    if a == b:
        return 0
    if not a or not b:
        return max(len(a), len(b))
    if cap is not None:
        return _banded_osa(a, b, cap)
    limit = max(len(a), len(b))
    band = max(1, abs(len(a) - len(b)))
    while True:
        d = _banded_osa(a, b, band)
        if d <= band:
            return d
        if band >= limit:
            return d
        band = min(band * 2, limit)


class FuzzyVocabulary:
    """Vocabulary bucketed by term length for bounded-distance lookups."""

    def __init__(self, terms):
        self._by_length: dict[int, list[str]] = defaultdict(list)
        for term in terms:
            self._by_length[len(term)].append(term)

    def matches(self, term: str, max_edits: int) -> dict[str, int]:
        """Vocabulary terms within ``max_edits``, mapped to their distance."""
        if max_edits not in (0, 1, 2):
            raise ValueError("max_edits must be 0, 1 or 2")
        out: dict[str, int] = {}
        n = len(term)
        for length in range(max(1, n - max_edits), n + max_edits + 1):
            for candidate in self._by_length.get(length, ()):
                dist = damerau_levenshtein(term, candidate, cap=max_edits)
                if dist <= max_edits:
                    out[candidate] = dist
        return out


def fuzzy_match_terms(term: str, vocabulary, max_edits: int) -> set[str]:
    """Vocabulary terms within Damerau-Levenshtein distance <= max_edits.

    A term matched at distance e contributes to scoring with multiplier
    1 / (1 + e); see :func:`fuzzy_multiplier`.
    """
    return set(FuzzyVocabulary(vocabulary).matches(term, max_edits))


def fuzzy_multiplier(distance: int) -> float:
    """Graded penalty for a partial match at the given edit distance."""
    return 1.0 / (1.0 + distance)


@lru_cache(maxsize=262_144)
def levenshtein(a: str, b: str) -> int:
    """Plain Levenshtein distance, bit-parallel.

    Runs in O(len(b)) word operations (arbitrary-precision masks, so no
    length limit); an order of magnitude faster than the tabular kernels
    for the string sizes seen in triad components. No transposition move,
    so an adjacent swap costs 2 here versus 1 in damerau_levenshtein.
    """
    if a == b:
        return 0
    m = len(a)
    if m == 0 or len(b) == 0:
        return max(m, len(b))
    peq: dict[str, int] = {}
    for i, ch in enumerate(a):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    full = (1 << m) - 1
    top = 1 << (m - 1)
    vp = full
    vn = 0
    score = m
    for ch in b:
        pm = peq.get(ch, 0)
        x = pm | vn
        d0 = (((x & vp) + vp) ^ vp) | x
        hn = vp & d0
        hp = vn | (~(d0 | vp) & full)
        if hp & top:
            score += 1
        elif hn & top:
            score -= 1
        x = ((hp << 1) | 1) & full
        vn = x & d0
        vp = ((hn << 1) & full) | (~(x | d0) & full)
    return score
