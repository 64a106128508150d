"""Corpus domain types, cleaning rules, dataset splitting, and JSON I/O.

The on-disk format is a single UTF-8 JSON document::

    {"schema": "hwpps-v1", "pairs": [ ... ]}

Field names are part of the contract and must not drift. Unknown fields
found in a file are kept on the in-memory objects and written back out,
so corpora produced by newer tools survive a round-trip.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from ._text import normalize_ws

SCHEMA_TAG = "hwpps-v1"

IMAGE_TEXT_KINDS = ("alt", "title", "ocr")


class Label(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    UNLABELED = "Unlabeled"


class LinkKind(str, Enum):
    TEXT = "Text"
    IMAGE = "Image"


class SchemaViolation(Exception):
    """A corpus file does not match the hwpps-v1 schema."""

    def __init__(self, field_name: str, detail: str = "", line: Optional[int] = None):
        self.field = field_name
        self.line = line
        message = f"schema violation at {field_name!r}"
        if line is not None:
            message += f" (line {line})"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class IoFailure(Exception):
    """Reading or writing a corpus file failed at the I/O level."""


class EmptyCorpus(Exception):
    """split_corpus was handed nothing to split."""


@dataclass(frozen=True)
class HyperlinkContext:
    """Source-side context of a hyperlink: anchor text, image-derived
    text, and up to five surrounding snippets ordered by DOM distance."""

    source_url: str
    anchor_text: str = ""
    image_texts: tuple[tuple[str, str], ...] = ()
    side_texts: tuple[tuple[str, int], ...] = ()
    link_kind: LinkKind = LinkKind.TEXT
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.side_texts) > 5:
            raise ValueError("side_texts holds at most 5 snippets")
        last = 0
        for text, distance in self.side_texts:
            if not normalize_ws(text):
                raise ValueError("side_texts entries must be non-empty")
            if not 1 <= distance <= 5:
                raise ValueError(f"dom_distance must be in 1..5, got {distance}")
            if distance <= last:
                raise ValueError("side_texts must be strictly ascending by dom_distance")
            last = distance
        for kind, text in self.image_texts:
            if kind not in IMAGE_TEXT_KINDS:
                raise ValueError(f"unknown image text kind {kind!r}")
            if not normalize_ws(text):
                raise ValueError("image_texts entries must be non-empty")
        if self.link_kind is LinkKind.TEXT and self.image_texts:
            raise ValueError("a Text link carries no image texts")


@dataclass(frozen=True)
class PageContent:
    """Target-side content summary: title, h1-h3 headers in document
    order, and ranked body keywords."""

    target_url: str
    http_status: int
    title: str = ""
    headers: tuple[tuple[int, str], ...] = ()
    keywords: tuple[tuple[str, float], ...] = ()
    final_url: Optional[str] = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for level, _text in self.headers:
            if level not in (1, 2, 3):
                raise ValueError(f"header level must be 1..3, got {level}")
        scores = [score for _term, score in self.keywords]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("keywords must be sorted by descending score")


@dataclass(frozen=True)
class CorpusPair:
    link: HyperlinkContext
    page: PageContent
    label: Label = Label.UNLABELED
    collected_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc).replace(microsecond=0)
    )
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.label is Label.POSITIVE and self.page.http_status != 200:
            raise ValueError("a Positive pair requires http_status 200")
        if self.collected_at.tzinfo is None:
            raise ValueError("collected_at must be timezone-aware UTC")


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[CorpusPair, ...]
    validation: tuple[CorpusPair, ...]
    seed: int
    warning: Optional[str] = None


class RejectReason(str, Enum):
    EMPTY_SOURCE = "EmptySource"
    EMPTY_TARGET = "EmptyTarget"


def clean_pair(pair: CorpusPair) -> Optional[RejectReason]:
    """Apply the corpus cleaning rule. Returns None to accept, or the
    violated rule: a pair is dropped when the source side has no text at
    all (empty anchor and no image text) or the target side is empty
    (no title, headers, or keywords)."""
    if not normalize_ws(pair.link.anchor_text) and not pair.link.image_texts:
        return RejectReason.EMPTY_SOURCE
    if (
        not normalize_ws(pair.page.title)
        and not pair.page.headers
        and not pair.page.keywords
    ):
        return RejectReason.EMPTY_TARGET
    return None


def split_corpus(
    pairs: Sequence[CorpusPair], ratio: float = 0.85, seed: int = 0
) -> CorpusSplit:
    """Deterministic shuffle under ``seed``, then prefix/suffix split at
    ``round(ratio * N)``. The same inputs always produce the same split."""
    if not pairs:
        raise EmptyCorpus("cannot split an empty pair list")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    order = list(range(len(pairs)))
    random.Random(seed).shuffle(order)
    cut = round(ratio * len(pairs))
    train = tuple(pairs[i] for i in order[:cut])
    validation = tuple(pairs[i] for i in order[cut:])
    warning = None
    if not validation:
        warning = "validation set is empty at this corpus size"
    elif not train:
        warning = "train set is empty at this corpus size"
    return CorpusSplit(train=train, validation=validation, seed=seed, warning=warning)


# --- JSON serialization -----------------------------------------------------

_KNOWN_LINK_FIELDS = {"url", "anchor_text", "link_kind", "side_texts", "image_texts"}
_KNOWN_PAGE_FIELDS = {"url", "http_status", "title", "headers", "keywords", "final_url"}
_KNOWN_PAIR_FIELDS = {"link", "page", "label", "collected_at"}


def _timestamp_to_json(moment: datetime) -> str:
    return moment.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _timestamp_from_json(raw: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except (ValueError, AttributeError) as exc:
        raise SchemaViolation(where, f"not an RFC 3339 timestamp: {raw!r}") from exc


def pair_to_json(pair: CorpusPair) -> dict[str, Any]:
    link: dict[str, Any] = {
        "url": pair.link.source_url,
        "anchor_text": pair.link.anchor_text,
        "link_kind": pair.link.link_kind.value,
        "side_texts": [
            {"text": text, "dom_distance": distance}
            for text, distance in pair.link.side_texts
        ],
        "image_texts": [
            {"kind": kind, "text": text} for kind, text in pair.link.image_texts
        ],
    }
    link.update(pair.link.extra)
    page: dict[str, Any] = {
        "url": pair.page.target_url,
        "http_status": pair.page.http_status,
        "title": pair.page.title,
        "headers": [
            {"level": level, "text": text} for level, text in pair.page.headers
        ],
        "keywords": [
            {"term": term, "score": score} for term, score in pair.page.keywords
        ],
    }
    if pair.page.final_url is not None:
        page["final_url"] = pair.page.final_url
    page.update(pair.page.extra)
    record: dict[str, Any] = {
        "link": link,
        "page": page,
        "label": pair.label.value,
        "collected_at": _timestamp_to_json(pair.collected_at),
    }
    record.update(pair.extra)
    return record


def _require(mapping: dict[str, Any], key: str, where: str) -> Any:
    if key not in mapping:
        raise SchemaViolation(f"{where}.{key}" if where else key, "missing field")
    return mapping[key]


def pair_from_json(record: dict[str, Any], index: int = -1) -> CorpusPair:
    where = f"pairs[{index}]" if index >= 0 else "pair"
    if not isinstance(record, dict):
        raise SchemaViolation(where, "pair must be an object")
    link_raw = _require(record, "link", where)
    page_raw = _require(record, "page", where)
    try:
        link = HyperlinkContext(
            source_url=_require(link_raw, "url", f"{where}.link"),
            anchor_text=link_raw.get("anchor_text", ""),
            image_texts=tuple(
                (entry["kind"], entry["text"])
                for entry in link_raw.get("image_texts", [])
            ),
            side_texts=tuple(
                (entry["text"], entry["dom_distance"])
                for entry in link_raw.get("side_texts", [])
            ),
            link_kind=LinkKind(link_raw.get("link_kind", "Text")),
            extra={k: v for k, v in link_raw.items() if k not in _KNOWN_LINK_FIELDS},
        )
        page = PageContent(
            target_url=_require(page_raw, "url", f"{where}.page"),
            http_status=_require(page_raw, "http_status", f"{where}.page"),
            title=page_raw.get("title", ""),
            headers=tuple(
                (entry["level"], entry["text"])
                for entry in page_raw.get("headers", [])
            ),
            keywords=tuple(
                (entry["term"], entry["score"])
                for entry in page_raw.get("keywords", [])
            ),
            final_url=page_raw.get("final_url"),
            extra={k: v for k, v in page_raw.items() if k not in _KNOWN_PAGE_FIELDS},
        )
        return CorpusPair(
            link=link,
            page=page,
            label=Label(_require(record, "label", where)),
            collected_at=_timestamp_from_json(
                _require(record, "collected_at", where), f"{where}.collected_at"
            ),
            extra={k: v for k, v in record.items() if k not in _KNOWN_PAIR_FIELDS},
        )
    except SchemaViolation:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(where, str(exc)) from exc


def write_corpus(pairs: Sequence[CorpusPair], path: Union[str, Path]) -> None:
    document = {"schema": SCHEMA_TAG, "pairs": [pair_to_json(p) for p in pairs]}
    try:
        Path(path).write_text(
            json.dumps(document, ensure_ascii=False, indent=None), encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write corpus to {path}: {exc}") from exc


def read_corpus(path: Union[str, Path]) -> list[CorpusPair]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read corpus from {path}: {exc}") from exc
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("document", exc.msg, line=exc.lineno) from exc
    if not isinstance(document, dict):
        raise SchemaViolation("document", "top level must be an object")
    if document.get("schema") != SCHEMA_TAG:
        raise SchemaViolation("schema", f"expected {SCHEMA_TAG!r}")
    pairs_raw = document.get("pairs")
    if not isinstance(pairs_raw, list):
        raise SchemaViolation("pairs", "must be an array")
    return [pair_from_json(record, i) for i, record in enumerate(pairs_raw)]

