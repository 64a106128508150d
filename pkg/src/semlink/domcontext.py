"""Hyperlink-side extraction: anchor discovery, navigational filtering,
surrounding-text harvesting, and image attribute/OCR text.

The side-text walk is the heart of this module. Generic anchors like
"Read More" borrow meaning from their neighborhood, so we collect up to
``k`` distinct snippets walking outward from the anchor: text-node
siblings first (nearest first, preceding before following), then element
siblings' text, then the same sweep one ancestor up, and so on until the
tree is exhausted. A snippet's 1-based position in that walk is its
``dom_distance``; the relevance oracle decays weights along it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional
from urllib.parse import urljoin, urlsplit

from . import dom
from ._text import normalize_ws
from .corpus import HyperlinkContext, LinkKind

logger = logging.getLogger(__name__)

SIDE_TEXT_LIMIT = 5
SNIPPET_MAX_CHARS = 200

# Engine for reading text out of image bytes; pure per input bytes.
OcrPlugin = Callable[[bytes], list[str]]
# Fetches image bytes for an absolute URL.
ImageFetcher = Callable[[str], bytes]


@dataclass(frozen=True)
class AnchorCandidate:
    """An ``<a href=...>`` occurrence prior to context extraction.

    ``images`` holds the (alt, title) attribute pairs of every enclosed
    <img>; ``image_srcs`` the matching resolved src URLs (None when the
    img has no usable src), so an OCR plugin can locate the bytes.
    """

    href: str
    resolved_url: Optional[str]  # None when unresolvable
    node_path: tuple[int, ...]
    inner_text: str
    images: tuple[tuple[Optional[str], Optional[str]], ...]
    image_srcs: tuple[Optional[str], ...] = ()


class DropReason(str, Enum):
    JAVASCRIPT_SCHEME = "JavascriptScheme"
    MAIL_SCHEME = "MailScheme"
    TEL_SCHEME = "TelScheme"
    FRAGMENT_JUMP = "FragmentJump"
    UNRESOLVABLE = "Unresolvable"


_DROPPED_SCHEMES = {
    "javascript": DropReason.JAVASCRIPT_SCHEME,
    "mailto": DropReason.MAIL_SCHEME,
    "tel": DropReason.TEL_SCHEME,
}


def _resolve(href: str, base_url: str) -> Optional[str]:
    try:
        resolved = urljoin(base_url, href)
        parts = urlsplit(resolved)
    except ValueError:
        return None
    if not parts.scheme:
        return None
    if parts.scheme in ("http", "https") and not parts.netloc:
        return None
    return resolved


def discover_anchors(
    document: str | bytes | dom.Element, base_url: str
) -> list[AnchorCandidate]:
    """One candidate per <a> element carrying an href attribute, in
    document order, with relative hrefs resolved against ``base_url``."""
    root = document if isinstance(document, dom.Element) else dom.parse_html(document)
    candidates: list[AnchorCandidate] = []
    for el in root.iter_elements():
        if el.tag != "a" or "href" not in el.attrs:
            continue
        href = el.attrs.get("href") or ""
        images = []
        srcs: list[Optional[str]] = []
        for img in el.find_all("img"):
            images.append((img.attrs.get("alt"), img.attrs.get("title")))
            src = img.attrs.get("src")
            srcs.append(_resolve(src, base_url) if src else None)
        candidates.append(
            AnchorCandidate(
                href=href,
                resolved_url=_resolve(href, base_url),
                node_path=dom.node_path(el),
                inner_text=dom.text_of(el),
                images=tuple(images),
                image_srcs=tuple(srcs),
            )
        )
    return candidates


def filter_navigational(candidate: AnchorCandidate) -> Optional[DropReason]:
    """Drop non-navigational links (script pseudo-links, mail/tel
    handlers, same-page jumps, unresolvable hrefs). None means keep."""
    href = candidate.href.strip()
    scheme = href.split(":", 1)[0].lower() if ":" in href else ""
    if scheme in _DROPPED_SCHEMES:
        return _DROPPED_SCHEMES[scheme]
    if href.startswith("#"):
        return DropReason.FRAGMENT_JUMP
    if candidate.resolved_url is None:
        return DropReason.UNRESOLVABLE
    return None


def _clip_snippet(text: str, limit: int = SNIPPET_MAX_CHARS) -> str:
    if len(text) <= limit:
        return text
    cut = text.rfind(" ", 0, limit + 1)
    return text[:limit] if cut <= 0 else text[:cut]


def _sibling_sweep(node: dom.Node) -> Iterator[str]:
    """Snippets around one node: text-node siblings first (preceding
    nearest-first, then following), then element siblings' whole text in
    the same near-to-far order."""
    parent = node.parent
    if parent is None:
        return
    idx = parent.children.index(node)
    preceding = list(reversed(parent.children[:idx]))
    following = parent.children[idx + 1 :]
    skip = dom.NON_CONTENT_TAGS | {"head"}  # head text is never rendered
    for group in (preceding, following):
        for sib in group:
            if isinstance(sib, dom.TextNode):
                yield normalize_ws(sib.text)
    for group in (preceding, following):
        for sib in group:
            if isinstance(sib, dom.Element) and sib.tag not in skip:
                yield dom.text_of(sib)


def extract_side_text(
    root: dom.Element, anchor: AnchorCandidate, k: int = SIDE_TEXT_LIMIT
) -> list[tuple[str, int]]:
    """Up to ``k`` distinct snippets surrounding the anchor, each tagged
    with its 1-based traversal rank. The anchor's own text never appears."""
    if k < 1:
        raise ValueError("k must be >= 1")
    element = dom.resolve_path(root, anchor.node_path)
    own_text = dom.text_of(element)
    seen = {own_text, ""}
    collected: list[tuple[str, int]] = []
    node: dom.Node = element
    while node.parent is not None and len(collected) < k:
        for snippet in _sibling_sweep(node):
            snippet = _clip_snippet(snippet)
            if snippet in seen:
                continue
            seen.add(snippet)
            collected.append((snippet, len(collected) + 1))
            if len(collected) >= k:
                break
        node = node.parent
    return collected


def extract_image_text(
    anchor: AnchorCandidate,
    ocr: Optional[OcrPlugin] = None,
    fetch: Optional[ImageFetcher] = None,
) -> list[tuple[str, str]]:
    """(kind, text) entries for every non-empty alt/title attribute; OCR
    fragments follow when a plugin is supplied and the bytes are
    fetchable. A failed image fetch degrades to attributes-only."""
    results: list[tuple[str, str]] = []
    for alt, title in anchor.images:
        if alt and normalize_ws(alt):
            results.append(("alt", normalize_ws(alt)))
        if title and normalize_ws(title):
            results.append(("title", normalize_ws(title)))
    if ocr is not None and fetch is not None:
        for src in anchor.image_srcs:
            if not src:
                continue
            try:
                payload = fetch(src)
            except Exception as exc:
                logger.warning("image fetch failed for %s: %s", src, exc)
                continue
            try:
                fragments = ocr(payload)
            except Exception as exc:
                logger.warning("ocr plugin failed for %s: %s", src, exc)
                continue
            for fragment in fragments:
                fragment = normalize_ws(fragment)
                if fragment:
                    results.append(("ocr", fragment))
    return results


def build_hyperlink_context(
    root: dom.Element,
    anchor: AnchorCandidate,
    source_url: str,
    k: int = SIDE_TEXT_LIMIT,
    ocr: Optional[OcrPlugin] = None,
    fetch: Optional[ImageFetcher] = None,
) -> HyperlinkContext:
    """Assemble the source-side record for one kept anchor."""
    image_texts = extract_image_text(anchor, ocr=ocr, fetch=fetch)
    side_texts = extract_side_text(root, anchor, k=min(k, SIDE_TEXT_LIMIT))
    kind = LinkKind.IMAGE if anchor.images else LinkKind.TEXT
    return HyperlinkContext(
        source_url=source_url,
        anchor_text=normalize_ws(anchor.inner_text),
        image_texts=tuple(image_texts),
        side_texts=tuple(side_texts),
        link_kind=kind,
    )
