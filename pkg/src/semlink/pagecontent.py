"""Target-page content extraction: title, structural headers, and
graph-ranked keywords from the main content block.

Whole-body text is too noisy for similarity scoring (menus, footers,
cookie banners), so keywords come from the densest content block only,
ranked by co-occurrence graph iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import dom
from ._text import normalize_ws, tokenize
from .corpus import PageContent

# Deliberately small English stopword list; CJK needs none because
# bigram tokens rarely collide with function words.
STOPWORDS = frozenset(
    """
    a about above after again all also am an and any are as at be because
    been before being below between both but by can could did do does doing
    down during each few for from further had has have having he her here
    hers him his how i if in into is it its just me more most my no nor not
    now of off on once only or other our ours out over own per s same she
    should so some such t than that the their theirs them then there these
    they this those through to too under until up very was we were what
    when where which while who whom why will with would you your yours
    """.split()
)

DEFAULT_KEYWORD_COUNT = 10
DEFAULT_WINDOW = 4
DEFAULT_DAMPING = 0.85
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-6

# Blocks whose text never counts as main content.
_EXCLUDED_TAGS = frozenset({"nav", "footer", "header"}) | dom.NON_CONTENT_TAGS
_EXCLUDED_NAME_PARTS = ("nav", "menu", "footer", "sidebar")
_CANDIDATE_TAGS = frozenset({"main", "article", "section", "div", "td", "body"})
_MIN_MAIN_CHARS = 50


def _as_root(document: Union[str, bytes, dom.Element]) -> dom.Element:
    if isinstance(document, dom.Element):
        return document
    return dom.parse_html(document)


def extract_title_headers(
    document: Union[str, bytes, dom.Element],
) -> tuple[str, list[tuple[int, str]]]:
    """The first <title>'s text (empty if absent) and all h1-h3 texts in
    document order."""
    root = _as_root(document)
    title_el = root.find_first("title")
    title = dom.text_of(title_el) if title_el is not None else ""
    headers: list[tuple[int, str]] = []
    for el in root.iter_elements():
        if el.tag in ("h1", "h2", "h3"):
            text = dom.text_of(el)
            if text:
                headers.append((int(el.tag[1]), text))
    return title, headers


def _is_noise_element(el: dom.Element) -> bool:
    if el.tag in _EXCLUDED_TAGS:
        return True
    for attr in ("id", "class"):
        value = (el.attrs.get(attr) or "").lower()
        if value and any(part in value for part in _EXCLUDED_NAME_PARTS):
            return True
    return False


def _content_text(el: dom.Element) -> str:
    """Text under ``el`` skipping noise subtrees."""
    chunks: list[str] = []

    def walk(node):
        if isinstance(node, dom.TextNode):
            chunks.append(node.text)
            return
        if node is not el and _is_noise_element(node):
            return
        if node.tag in dom.NON_CONTENT_TAGS:
            return
        for child in node.children:
            walk(child)

    walk(el)
    return normalize_ws(" ".join(chunks))


def _subtree_element_count(el: dom.Element) -> int:
    return 1 + sum(1 for _ in el.iter_elements())


def select_main_content(document: Union[str, bytes, dom.Element]) -> str:
    """Pick the highest text-density block, skipping navigation and
    boilerplate; fall back to the whole body when the winner is too thin
    to mean anything."""
    root = _as_root(document)
    body = root.find_first("body") or root
    best_text = ""
    best_density = -1.0
    candidates = [body] + [
        el for el in body.iter_elements() if el.tag in _CANDIDATE_TAGS
    ]
    for el in candidates:
        if _is_noise_element(el):
            continue
        text = _content_text(el)
        density = len(text) / _subtree_element_count(el)
        if density > best_density:
            best_density = density
            best_text = text
    if len(best_text) < _MIN_MAIN_CHARS:
        return dom.text_of(body)
    return best_text


class EmptyText(Exception):
    pass


@dataclass(frozen=True)
class WordGraph:
    """Undirected co-occurrence graph over content words. Node order is
    first-appearance order; edge weights count window co-occurrences."""

    nodes: tuple[str, ...]
    edges: dict[tuple[int, int], float]
    window: int

    @classmethod
    def from_tokens(cls, tokens: list[str], window: int) -> "WordGraph":
        index: dict[str, int] = {}
        for tok in tokens:
            if tok not in index:
                index[tok] = len(index)
        edges: dict[tuple[int, int], float] = {}
        for i, tok in enumerate(tokens):
            u = index[tok]
            for j in range(i + 1, min(i + window, len(tokens))):
                v = index[tokens[j]]
                if u == v:
                    continue
                key = (min(u, v), max(u, v))
                edges[key] = edges.get(key, 0.0) + 1.0
        return cls(nodes=tuple(index), edges=edges, window=window)


def pagerank_scores(
    graph: WordGraph,
    damping: float = DEFAULT_DAMPING,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> list[float]:
    """Weighted PageRank on the undirected graph:

        score(v) = (1 - d) + d * sum_{u in adj(v)} w(u,v)/W(u) * score(u)

    with W(u) the total edge weight at u. Iterates from all-ones until
    the largest per-node change drops below ``tol`` or ``max_iter`` is
    hit. Isolated nodes settle at (1 - d).
    """
    n = len(graph.nodes)
    if n == 0:
        return []
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    strength = [0.0] * n
    for (u, v), w in graph.edges.items():
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))
        strength[u] += w
        strength[v] += w
    scores = [1.0] * n
    for _ in range(max_iter):
        delta = 0.0
        new_scores = [0.0] * n
        for v in range(n):
            acc = 0.0
            for u, w in adjacency[v]:
                acc += w / strength[u] * scores[u]
            new_scores[v] = (1.0 - damping) + damping * acc
            delta = max(delta, abs(new_scores[v] - scores[v]))
        scores = new_scores
        if delta < tol:
            break
    return scores


def content_words(text: str) -> list[str]:
    return [tok for tok in tokenize(text) if tok not in STOPWORDS]


def textrank_keywords(
    text: str,
    n: int = DEFAULT_KEYWORD_COUNT,
    window: int = DEFAULT_WINDOW,
    damping: float = DEFAULT_DAMPING,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> list[tuple[str, float]]:
    """Top-n content words by graph rank, sorted by (-score, term).
    Empty or stopword-only text yields an empty list."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < damping < 1:
        raise ValueError("damping must be in (0, 1)")
    if window < 2:
        raise ValueError("window must be >= 2")
    words = content_words(text)
    if not words:
        return []
    graph = WordGraph.from_tokens(words, window)
    scores = pagerank_scores(graph, damping, max_iter, tol)
    ranked = sorted(zip(graph.nodes, scores), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:n]


def build_page_content(
    document: Union[str, bytes, dom.Element],
    url: str,
    status: int,
    final_url: Optional[str] = None,
    keyword_count: int = DEFAULT_KEYWORD_COUNT,
) -> PageContent:
    """Compose the three extractors into the target-side record."""
    root = _as_root(document)
    title, headers = extract_title_headers(root)
    keywords = textrank_keywords(select_main_content(root), n=keyword_count)
    return PageContent(
        target_url=url,
        http_status=status,
        title=title,
        headers=tuple(headers),
        keywords=tuple(keywords),
        final_url=final_url,
    )
