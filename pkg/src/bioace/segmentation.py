"""Deterministic rule-based sentence segmentation for scientific abstracts.

A boundary is placed after a terminal character in ``. ! ?`` when it is
followed by whitespace and then an uppercase letter or a digit, unless the
text up to and including the terminal period ends with a protected
abbreviation ("vs.", "e.g.", ...). The splitter never drops non-whitespace
characters: joining the returned sentences with single spaces reproduces the
input up to whitespace runs.

The splitter is intentionally pluggable: everything downstream accepts any
``callable[[str], list[str]]``, so an external segmentation endpoint can be
substituted without touching the consumers.
"""

from __future__ import annotations

# Periods ending these tokens never terminate a sentence. Matching is
# case-insensitive and requires a word boundary before the abbreviation.
DEFAULT_ABBREVIATIONS = (
    "vs.",
    "e.g.",
    "i.e.",
    "Fig.",
    "et al.",
    "approx.",
    "No.",
)

_TERMINALS = ".!?"


def _ends_with_abbreviation(prefix: str, abbreviations: tuple[str, ...]) -> bool:
    low = prefix.casefold()
    for abbr in abbreviations:
        a = abbr.casefold()
        if not low.endswith(a):
            continue
        before = low[: -len(a)]
        if not before or not before[-1].isalnum():
            return True
    return False


def segment_sentences(
    text: str,
    abbreviations: tuple[str, ...] = DEFAULT_ABBREVIATIONS,
) -> list[str]:
    """Split ``text`` into sentences; empty input yields an empty list."""
    if not text or not text.strip():
        return []

    boundaries = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in _TERMINALS:
            continue
        j = i + 1
        while j < n and text[j].isspace():
            j += 1
        if j == i + 1 or j >= n:
            continue  # no whitespace after the terminal, or end of text
        nxt = text[j]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if ch == "." and _ends_with_abbreviation(text[: i + 1], abbreviations):
            continue
        boundaries.append(i + 1)

    sentences = []
    start = 0
    for b in boundaries:
        piece = text[start:b].strip()
        if piece:
            sentences.append(piece)
        start = b
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
