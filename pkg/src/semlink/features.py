"""Feature-text decomposition shared by scoring and training.

A hyperlink contributes several scoreable texts (anchor, image-derived
text, side snippets); a page contributes title, headers, and its joined
keywords. Source features carry a spatial decay weight; target features
carry none.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from ._text import normalize_ws
from .corpus import HyperlinkContext, PageContent

HEADER_CAP = 10


class FeatureKind(str, Enum):
    ANCHOR = "Anchor"
    IMAGE_OCR = "ImageOcr"
    IMAGE_ATTR = "ImageAttr"
    SIDE_TEXT = "SideText"
    PAGE_TITLE = "PageTitle"
    PAGE_HEADER = "PageHeader"
    PAGE_KEYWORDS = "PageKeywords"


_SOURCE_KINDS = {
    FeatureKind.ANCHOR,
    FeatureKind.IMAGE_OCR,
    FeatureKind.IMAGE_ATTR,
    FeatureKind.SIDE_TEXT,
}

# Literal table so the contract values are exact, not float arithmetic.
_SIDE_TEXT_WEIGHTS = {1: 0.9, 2: 0.8, 3: 0.7, 4: 0.6, 5: 0.5}


@dataclass(frozen=True)
class FeatureText:
    """One scoreable text fragment; ``rank`` is the side-text DOM
    distance (1..5) and None for every other kind."""

    text: str
    kind: FeatureKind
    rank: Optional[int] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("feature text must be non-empty")
        if self.kind is FeatureKind.SIDE_TEXT and self.rank not in _SIDE_TEXT_WEIGHTS:
            raise ValueError(f"side text rank must be 1..5, got {self.rank}")

    def describe(self) -> str:
        if self.kind is FeatureKind.SIDE_TEXT:
            return f"SideText({self.rank})"
        return self.kind.value


def weight_of(feature: Union[FeatureText, FeatureKind], rank: Optional[int] = None) -> float:
    """Spatial decay weight of a source feature: anchor and image text
    carry full weight, side snippets decay linearly with DOM distance.
    Target-side kinds carry no weight and are rejected."""
    if isinstance(feature, FeatureText):
        kind, rank = feature.kind, feature.rank
    else:
        kind = feature
    if kind not in _SOURCE_KINDS:
        raise ValueError(f"{kind.value} is a target feature and carries no weight")
    if kind is FeatureKind.SIDE_TEXT:
        if rank not in _SIDE_TEXT_WEIGHTS:
            raise ValueError(f"side text rank must be 1..5, got {rank}")
        return _SIDE_TEXT_WEIGHTS[rank]
    return 1.0


def source_features(link: HyperlinkContext) -> list[FeatureText]:
    """Scoreable source fragments, in aggregation order: anchor, image
    texts, side texts."""
    features: list[FeatureText] = []
    anchor = normalize_ws(link.anchor_text)
    if anchor:
        features.append(FeatureText(anchor, FeatureKind.ANCHOR))
    for kind, text in link.image_texts:
        text = normalize_ws(text)
        if not text:
            continue
        feature_kind = FeatureKind.IMAGE_OCR if kind == "ocr" else FeatureKind.IMAGE_ATTR
        features.append(FeatureText(text, feature_kind))
    for text, distance in link.side_texts:
        text = normalize_ws(text)
        if text:
            features.append(FeatureText(text, FeatureKind.SIDE_TEXT, rank=distance))
    return features


def target_features(page: PageContent) -> list[FeatureText]:
    """Scoreable target fragments: title, first few headers, and the
    ranked keywords joined into one text."""
    features: list[FeatureText] = []
    title = normalize_ws(page.title)
    if title:
        features.append(FeatureText(title, FeatureKind.PAGE_TITLE))
    for _level, text in page.headers[:HEADER_CAP]:
        text = normalize_ws(text)
        if text:
            features.append(FeatureText(text, FeatureKind.PAGE_HEADER))
    keyword_text = " ".join(term for term, _score in page.keywords).strip()
    if keyword_text:
        features.append(FeatureText(keyword_text, FeatureKind.PAGE_KEYWORDS))
    return features
