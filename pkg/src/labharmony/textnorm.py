"""Text canonicalization shared by every module that touches free-form terms.

One canonical form keeps synonym groups small: lowercase, NFKC, single
spaces, and superscript digits rewritten to caret notation before NFKC can
flatten them into plain digits (NFKC turns "10³" into "103", losing the
exponent marker, so the caret rewrite must run first).
"""

from __future__ import annotations

import re
import unicodedata

_SUPERSCRIPT_DIGITS = {
    "⁰": "0",
    "¹": "1",
    "²": "2",
    "³": "3",
    "⁴": "4",
    "⁵": "5",
    "⁶": "6",
    "⁷": "7",
    "⁸": "8",
    "⁹": "9",
}

_SUPERSCRIPT_RUN = re.compile("[" + "".join(_SUPERSCRIPT_DIGITS) + "]+")

_WS = re.compile(r"\s+")


def _caret(match: re.Match) -> str:
    return "^" + "".join(_SUPERSCRIPT_DIGITS[c] for c in match.group(0))


def normalize_text(raw: str) -> str:
    """Canonicalize a free-form term. Total and idempotent.

    A run of superscript digits becomes a single caret group, e.g.
    "10³/L" -> "10^3/l".
    """
    text = _SUPERSCRIPT_RUN.sub(_caret, raw)
    text = unicodedata.normalize("NFKC", text)
    text = text.lower()
    return _WS.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    """Split normalized text into index/query tokens.

    Whitespace-separated words; a slash-joined word additionally yields its
    parts, so "mg/dl" produces ["mg/dl", "mg", "dl"] and matches records
    indexed under either convention.
    """
    tokens: list[str] = []
    for word in text.split():
        tokens.append(word)
        if "/" in word:
            parts = [p for p in word.split("/") if p]
            if len(parts) > 1:
                tokens.extend(parts)
    return tokens
