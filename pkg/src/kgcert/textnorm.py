"""ASCII folding and deterministic sentence splitting.

Raw corpus text arrives with arbitrary Unicode; everything downstream
(alias matching, prompt templates, serialized artifacts) assumes plain
ASCII, so folding happens once during preprocessing. Sentence splitting is
rule-based rather than model-based: certificates must be reproducible, so
the split may not depend on an external tokenizer's version.
"""

from __future__ import annotations

import re
import unicodedata

# Punctuation that NFKD does not decompose but that has an obvious ASCII stand-in.
_PUNCT_MAP = {
    " ": " ",   # no-break space
    "‐": "-", "‑": "-", "‒": "-", "–": "-",
    "—": "-", "―": "-", "−": "-",
    "‘": "'", "’": "'", "‚": "'", "‛": "'", "′": "'",
    "“": '"', "”": '"', "„": '"', "‟": '"', "″": '"',
    "…": "...",
    "×": "x",
}
_PUNCT_TABLE = str.maketrans(_PUNCT_MAP)

# Words whose trailing period does not end a sentence.
_ABBREVIATIONS = frozenset({
    "dr", "mr", "mrs", "ms", "prof", "rev", "hon", "st", "jr", "sr",
    "vs", "etc", "e.g", "i.e", "cf", "al", "inc", "ltd", "co", "corp",
    "mt", "ft", "no", "vol", "fig", "ca", "approx",
})

_BOUNDARY = re.compile(r"([.!?])\s+(?=[A-Z0-9\"'(])")


def normalize_ascii(text: str) -> str:
    """Fold text to pure ASCII.

    Mapped punctuation is replaced, the rest is NFKD-decomposed with
    combining marks stripped, and anything still outside ASCII is dropped.
    Idempotent: ASCII input is returned unchanged.
    """
    mapped = text.translate(_PUNCT_TABLE)
    decomposed = unicodedata.normalize("NFKD", mapped)
    without_marks = "".join(c for c in decomposed if not unicodedata.combining(c))
    return without_marks.encode("ascii", "ignore").decode("ascii")


def _ends_with_abbreviation(fragment: str) -> bool:
    last = fragment.rstrip(".").rsplit(None, 1)[-1] if fragment.strip() else ""
    last = last.lstrip("(\"'")
    return bool(last) and last.lower() in _ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split ASCII text into sentences on ``. ! ?`` followed by a capital.

    A fixed abbreviation stop-list suppresses splits after titles and
    initials. Whitespace inside each sentence is collapsed to single
    spaces; empty sentences are dropped.
    """
    if not text.strip():
        return []
    pieces: list[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        candidate = text[start:match.end(1)]
        if match.group(1) == "." and _ends_with_abbreviation(candidate):
            continue
        pieces.append(candidate)
        start = match.end()
    pieces.append(text[start:])
    sentences = [" ".join(p.split()) for p in pieces]
    return [s for s in sentences if s]
