"""Minimal error-tolerant DOM built on the stdlib HTML tokenizer.

Real-web markup is messy, so parsing never hard-fails: stray end tags
are ignored, unclosed elements are closed implicitly, and a handful of
browser-style auto-close rules (``<li>``, ``<p>``, table cells) keep
common sloppy markup from nesting forever. The tree is deliberately
small: elements, text nodes, parent
links, and document-order traversal — exactly what anchor discovery and
side-text extraction need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterator, Optional, Union

from ._text import normalize_ws


class ParseFailure(Exception):
    """Raised only on byte-level decoding failure, never on bad markup."""


VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

# Text under these never counts as page content.
NON_CONTENT_TAGS = frozenset({"script", "style", "noscript", "template"})

_BLOCKISH = frozenset(
    "address article aside blockquote div dl fieldset footer form h1 h2 h3 h4 "
    "h5 h6 header hr main nav ol p pre section table ul".split()
)

# Opening tag -> set of tags it implicitly closes when they sit on top of
# the open-element stack.
_IMPLICIT_CLOSE: dict[str, frozenset[str]] = {
    "li": frozenset({"li"}),
    "option": frozenset({"option"}),
    "tr": frozenset({"tr", "td", "th"}),
    "td": frozenset({"td", "th"}),
    "th": frozenset({"td", "th"}),
    "dd": frozenset({"dd", "dt"}),
    "dt": frozenset({"dd", "dt"}),
}
for _tag in _BLOCKISH:
    _IMPLICIT_CLOSE[_tag] = _IMPLICIT_CLOSE.get(_tag, frozenset()) | {"p"}


@dataclass
class TextNode:
    text: str
    parent: Optional["Element"] = field(default=None, repr=False)


@dataclass
class Element:
    tag: str
    attrs: dict[str, Optional[str]]
    children: list[Union["Element", TextNode]] = field(default_factory=list)
    parent: Optional["Element"] = field(default=None, repr=False)

    def append(self, node: Union["Element", TextNode]) -> None:
        node.parent = self
        self.children.append(node)

    @property
    def element_children(self) -> list["Element"]:
        return [c for c in self.children if isinstance(c, Element)]

    def iter_elements(self) -> Iterator["Element"]:
        """All descendant elements in document order, self excluded."""
        for child in self.children:
            if isinstance(child, Element):
                yield child
                yield from child.iter_elements()

    def find_all(self, *tags: str) -> list["Element"]:
        wanted = set(tags)
        return [el for el in self.iter_elements() if el.tag in wanted]

    def find_first(self, tag: str) -> Optional["Element"]:
        for el in self.iter_elements():
            if el.tag == tag:
                return el
        return None


Node = Union[Element, TextNode]


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = Element("#document", {})
        self._stack: list[Element] = [self.root]

    @property
    def _top(self) -> Element:
        return self._stack[-1]

    def handle_starttag(self, tag: str, attrs: list[tuple[str, Optional[str]]]) -> None:
        closers = _IMPLICIT_CLOSE.get(tag)
        if closers:
            while len(self._stack) > 1 and self._top.tag in closers:
                self._stack.pop()
        attr_dict: dict[str, Optional[str]] = {}
        for name, value in attrs:
            attr_dict.setdefault(name, value)
        element = Element(tag, attr_dict)
        self._top.append(element)
        if tag not in VOID_ELEMENTS:
            self._stack.append(element)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, Optional[str]]]) -> None:
        attr_dict: dict[str, Optional[str]] = {}
        for name, value in attrs:
            attr_dict.setdefault(name, value)
        self._top.append(Element(tag, attr_dict))

    def handle_endtag(self, tag: str) -> None:
        # Close up to the nearest matching open element; a stray end tag
        # with no match is dropped on the floor.
        for depth in range(len(self._stack) - 1, 0, -1):
            if self._stack[depth].tag == tag:
                del self._stack[depth:]
                return

    def handle_data(self, data: str) -> None:
        if data:
            self._top.append(TextNode(data))


def parse_html(document: Union[str, bytes]) -> Element:
    """Parse markup into a document tree. Accepts text or UTF-8 bytes;
    only undecodable bytes raise ParseFailure."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseFailure(f"document is not valid UTF-8: {exc}") from exc
    builder = _TreeBuilder()
    builder.feed(document)
    builder.close()
    return builder.root


def text_of(node: Node, skip: frozenset[str] = NON_CONTENT_TAGS) -> str:
    """Whitespace-normalized text content of a subtree, skipping
    non-content tags."""
    return normalize_ws(" ".join(_iter_text(node, skip)))


def _iter_text(node: Node, skip: frozenset[str]) -> Iterator[str]:
    if isinstance(node, TextNode):
        yield node.text
        return
    if node.tag in skip:
        return
    for child in node.children:
        yield from _iter_text(child, skip)


def node_path(element: Element) -> tuple[int, ...]:
    """Address of an element as child indices (element children only)
    from the document root."""
    path: list[int] = []
    current = element
    while current.parent is not None:
        path.append(current.parent.element_children.index(current))
        current = current.parent
    return tuple(reversed(path))


def resolve_path(root: Element, path: tuple[int, ...]) -> Element:
    current = root
    for index in path:
        current = current.element_children[index]
    return current
