"""Text normalization and tokenization shared across the pipeline.

The corpus is bilingual (roughly 3:1 Chinese/English), so tokenization
has two lanes: Latin-ish word runs are lowercased tokens, CJK runs are
split into character bigrams (full morphological analysis is out of
scope).
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"[0-9a-z]+")

# CJK unified ideographs (+ ext A), kana, hangul.
_CJK_RANGES = (
    (0x3040, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),
    (0xF900, 0xFAFF),
)
_CJK_RE = re.compile(
    "[" + "".join(f"{chr(lo)}-{chr(hi)}" for lo, hi in _CJK_RANGES) + "]+"
)


def normalize_ws(text: str) -> str:
    """Collapse runs of Unicode whitespace to one space and trim the ends.

    Applied before any emptiness test; an "&nbsp;"-only anchor normalizes
    to the empty string.
    """
    return " ".join(text.split())


def is_blank(text: str) -> bool:
    return not normalize_ws(text)


def _cjk_bigrams(run: str) -> list[str]:
    if len(run) == 1:
        return [run]
    return [run[i : i + 2] for i in range(len(run) - 1)]


def tokenize(text: str) -> list[str]:
    """Split text into word tokens: lowercased alphanumeric runs for
    Latin script, character bigrams for CJK runs. Order-preserving."""
    tokens: list[str] = []
    lowered = text.casefold()
    # Interleave word and CJK matches in document order.
    matches = sorted(
        [(m.start(), "w", m.group()) for m in _WORD_RE.finditer(lowered)]
        + [(m.start(), "c", m.group()) for m in _CJK_RE.finditer(lowered)]
    )
    for _, kind, run in matches:
        if kind == "w":
            tokens.append(run)
        else:
            tokens.extend(_cjk_bigrams(run))
    return tokens


def char_trigrams(token: str) -> list[str]:
    """Character trigrams of a single token; tokens shorter than 3 chars
    contribute none (the whole-token feature covers them)."""
    if len(token) < 3:
        return []
    return [token[i : i + 3] for i in range(len(token) - 2)]


def token_set(text: str) -> frozenset[str]:
    return frozenset(tokenize(text))
