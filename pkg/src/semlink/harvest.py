"""Crawling and pairing: fetch seed pages, extract anchors, visit
targets, apply status and cleaning filters, emit labeled pairs.

Links found on actively maintained sites are assumed semantically
correct, so every surviving pair is labeled Positive. The crawler is
deliberately polite: bounded parallelism, one in-flight request per
host, a per-host minimum interval, and robots.txt respected unless
explicitly disabled (local fixtures).
"""

from __future__ import annotations

import json
import logging
import threading
import time
import urllib.robotparser
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Union
from urllib.parse import quote, urlsplit

import numpy as np
import requests

from . import dom
from ._text import normalize_ws
from .corpus import CorpusPair, Label, clean_pair, pair_to_json
from .domcontext import (
    OcrPlugin,
    build_hyperlink_context,
    discover_anchors,
    filter_navigational,
)
from .embedding import EmbeddingProvider
from .pagecontent import build_page_content

logger = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "semlink-crawler/0.1 (+https://example.invalid/semlink)"
MAX_REDIRECTS = 10


class SeedCategory(str, Enum):
    NEWS = "News"
    ECOMMERCE = "ECommerce"
    EDUCATION = "Education"
    GOVERNMENT = "Government"
    TECH_BLOG = "TechBlog"
    OTHER = "Other"


@dataclass(frozen=True)
class SeedList:
    entries: tuple[tuple[str, SeedCategory], ...]

    def __post_init__(self):
        urls = [url for url, _cat in self.entries]
        if len(set(urls)) != len(urls):
            raise ValueError("seed URLs must be deduplicated")
        for url in urls:
            if not urlsplit(url).scheme:
                raise ValueError(f"seed URL must be absolute: {url!r}")


def load_seed_list(path: Union[str, Path]) -> SeedList:
    """Parse a seeds file: one ``url[,category]`` per line, ``#`` comments."""
    entries: list[tuple[str, SeedCategory]] = []
    seen: set[str] = set()
    for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        url, _, category_raw = line.partition(",")
        url = url.strip()
        if url in seen:
            continue
        seen.add(url)
        category = SeedCategory.OTHER
        if category_raw.strip():
            category = SeedCategory(category_raw.strip())
        entries.append((url, category))
    return SeedList(entries=tuple(entries))


@dataclass(frozen=True)
class FetchPolicy:
    timeout: float = 15.0
    max_retries: int = 2
    retry_backoff: float = 0.5  # doubles per retry
    max_links_per_seed: int = 200
    parallelism: int = 4
    user_agent: str = DEFAULT_USER_AGENT
    respect_robots: bool = True
    per_host_interval: float = 1.0  # polite default; 0 for local fixtures

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


class FetchError(Exception):
    pass


class Timeout(FetchError):
    pass


class TooManyRedirects(FetchError):
    pass


class TransportFailure(FetchError):
    pass


class RobotsDenied(FetchError):
    pass


@dataclass(frozen=True)
class FetchResult:
    status: int
    final_url: str
    body: str


class _HostGate:
    """Serializes requests per host and enforces a minimum interval."""

    def __init__(self, interval: float):
        self.interval = interval
        self._locks: dict[str, threading.Lock] = {}
        self._last: dict[str, float] = {}
        self._registry = threading.Lock()

    def _lock_for(self, host: str) -> threading.Lock:
        with self._registry:
            if host not in self._locks:
                self._locks[host] = threading.Lock()
            return self._locks[host]

    def __call__(self, host: str):
        return _GateContext(self, host)


class _GateContext:
    def __init__(self, gate: _HostGate, host: str):
        self.gate = gate
        self.host = host
        self.lock = gate._lock_for(host)

    def __enter__(self):
        self.lock.acquire()
        if self.gate.interval > 0:
            elapsed = time.monotonic() - self.gate._last.get(self.host, -1e9)
            wait = self.gate.interval - elapsed
            if wait > 0:
                time.sleep(wait)
        return self

    def __exit__(self, *exc_info):
        self.gate._last[self.host] = time.monotonic()
        self.lock.release()
        return False


class Fetcher:
    """HTTP access shared by a crawl: redirects, retries, charset
    fallback, robots.txt, per-host politeness, and the pre-rendered HTML
    escape hatch for JavaScript-heavy sites."""

    def __init__(
        self,
        policy: FetchPolicy,
        rendered_html_dir: Optional[Union[str, Path]] = None,
        session: Optional[requests.Session] = None,
    ):
        self.policy = policy
        self.rendered_dir = Path(rendered_html_dir) if rendered_html_dir else None
        self.session = session or requests.Session()
        self.session.max_redirects = MAX_REDIRECTS
        self._gate = _HostGate(policy.per_host_interval)
        self._robots: dict[str, Optional[urllib.robotparser.RobotFileParser]] = {}
        self._robots_lock = threading.Lock()

    def _rendered_lookup(self, url: str) -> Optional[str]:
        if self.rendered_dir is None:
            return None
        candidate = self.rendered_dir / (quote(url, safe="") + ".html")
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
        return None

    def _robots_allows(self, url: str) -> bool:
        parts = urlsplit(url)
        origin = f"{parts.scheme}://{parts.netloc}"
        with self._robots_lock:
            if origin not in self._robots:
                parser: Optional[urllib.robotparser.RobotFileParser] = None
                try:
                    response = self.session.get(
                        origin + "/robots.txt",
                        timeout=self.policy.timeout,
                        headers={"User-Agent": self.policy.user_agent},
                    )
                    if response.status_code == 200:
                        parser = urllib.robotparser.RobotFileParser()
                        parser.parse(response.text.splitlines())
                except requests.RequestException:
                    parser = None  # unreachable robots file: allow
                self._robots[origin] = parser
            parser = self._robots[origin]
        if parser is None:
            return True
        return parser.can_fetch(self.policy.user_agent, url)

    def fetch(self, url: str) -> FetchResult:
        """GET a page, following up to 10 redirects, decoding by header
        charset with UTF-8 fallback. Non-2xx statuses are results, not
        errors."""
        rendered = self._rendered_lookup(url)
        if rendered is not None:
            return FetchResult(status=200, final_url=url, body=rendered)
        if self.policy.respect_robots and not self._robots_allows(url):
            raise RobotsDenied(f"robots.txt disallows {url}")
        host = urlsplit(url).netloc
        attempts = self.policy.max_retries + 1
        backoff = self.policy.retry_backoff
        last_error: Optional[FetchError] = None
        for attempt in range(attempts):
            try:
                with self._gate(host):
                    response = self.session.get(
                        url,
                        timeout=self.policy.timeout,
                        headers={"User-Agent": self.policy.user_agent},
                        allow_redirects=True,
                    )
                if "charset" not in response.headers.get("Content-Type", "").lower():
                    response.encoding = "utf-8"
                return FetchResult(
                    status=response.status_code,
                    final_url=response.url,
                    body=response.text,
                )
            except requests.Timeout as exc:
                last_error = Timeout(f"timeout fetching {url}: {exc}")
            except requests.TooManyRedirects as exc:
                raise TooManyRedirects(f"redirect limit on {url}: {exc}") from exc
            except requests.RequestException as exc:
                last_error = TransportFailure(f"transport failure on {url}: {exc}")
            if attempt + 1 < attempts:
                time.sleep(backoff)
                backoff *= 2
        assert last_error is not None
        raise last_error

    def fetch_bytes(self, url: str) -> bytes:
        """Raw bytes getter for image fetches (OCR plumbing)."""
        host = urlsplit(url).netloc
        with self._gate(host):
            response = self.session.get(
                url,
                timeout=self.policy.timeout,
                headers={"User-Agent": self.policy.user_agent},
            )
        response.raise_for_status()
        return response.content


def fetch(url: str, policy: FetchPolicy, fetcher: Optional[Fetcher] = None) -> FetchResult:
    return (fetcher or Fetcher(policy)).fetch(url)


@dataclass
class CrawlStats:
    seeds_total: int = 0
    seeds_failed: int = 0
    anchors_discovered: int = 0
    anchors_dropped: dict[str, int] = field(default_factory=dict)
    targets_attempted: int = 0
    status_histogram: dict[str, int] = field(default_factory=dict)
    target_fetch_failures: int = 0
    pairs_emitted: int = 0
    rejects: dict[str, int] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, attribute: str, amount: int = 1) -> None:
        with self._lock:
            setattr(self, attribute, getattr(self, attribute) + amount)

    def bump_map(self, attribute: str, key: str, amount: int = 1) -> None:
        with self._lock:
            mapping = getattr(self, attribute)
            mapping[key] = mapping.get(key, 0) + amount

    def to_json(self) -> dict[str, Any]:
        return {
            "seeds_total": self.seeds_total,
            "seeds_failed": self.seeds_failed,
            "anchors_discovered": self.anchors_discovered,
            "anchors_dropped": dict(sorted(self.anchors_dropped.items())),
            "targets_attempted": self.targets_attempted,
            "status_histogram": dict(sorted(self.status_histogram.items())),
            "target_fetch_failures": self.target_fetch_failures,
            "pairs_emitted": self.pairs_emitted,
            "rejects": dict(sorted(self.rejects.items())),
        }


def harvest_seed(
    seed_url: str,
    policy: FetchPolicy,
    k: int = 5,
    ocr: Optional[OcrPlugin] = None,
    fetcher: Optional[Fetcher] = None,
    stats: Optional[CrawlStats] = None,
) -> list[CorpusPair]:
    """Crawl one seed page into Positive pairs: discover anchors, drop
    non-navigational ones, fetch each target once, keep HTTP 200 targets
    whose pair survives cleaning."""
    fetcher = fetcher or Fetcher(policy)
    stats = stats if stats is not None else CrawlStats()
    seed = fetcher.fetch(seed_url)
    root = dom.parse_html(seed.body)
    anchors = discover_anchors(root, base_url=seed.final_url)
    stats.bump("anchors_discovered", len(anchors))

    kept = []
    for anchor in anchors:
        reason = filter_navigational(anchor)
        if reason is not None:
            stats.bump_map("anchors_dropped", reason.value)
            continue
        kept.append(anchor)
    kept = kept[: policy.max_links_per_seed]

    image_fetch = fetcher.fetch_bytes if ocr is not None else None
    target_cache: dict[str, Union[FetchResult, FetchError]] = {}
    pairs: list[CorpusPair] = []
    for anchor in kept:
        target_url = anchor.resolved_url
        assert target_url is not None
        stats.bump("targets_attempted")
        if target_url not in target_cache:
            try:
                target_cache[target_url] = fetcher.fetch(target_url)
            except FetchError as exc:
                target_cache[target_url] = exc
        result = target_cache[target_url]
        if isinstance(result, FetchError):
            stats.bump("target_fetch_failures")
            logger.info("skipping %s: %s", target_url, result)
            continue
        stats.bump_map("status_histogram", str(result.status))
        if result.status != 200:
            continue
        link = build_hyperlink_context(
            root, anchor, source_url=seed.final_url, k=k, ocr=ocr, fetch=image_fetch
        )
        page = build_page_content(
            result.body,
            url=target_url,
            status=result.status,
            final_url=result.final_url if result.final_url != target_url else None,
        )
        pair = CorpusPair(
            link=link,
            page=page,
            label=Label.UNLABELED,
            collected_at=datetime.now(timezone.utc).replace(microsecond=0),
        )
        reject = clean_pair(pair)
        if reject is not None:
            stats.bump_map("rejects", reject.value)
            continue
        pairs.append(replace(pair, label=Label.POSITIVE))
        stats.bump("pairs_emitted")
    return pairs


def _write_snapshot(pairs: Sequence[CorpusPair], out_path: Path) -> None:
    """Atomic whole-file rewrite so an interrupted crawl always leaves a
    parseable corpus holding a prefix of the collected pairs."""
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    document = {"schema": "hwpps-v1", "pairs": [pair_to_json(p) for p in pairs]}
    tmp.write_text(json.dumps(document, ensure_ascii=False), encoding="utf-8")
    tmp.replace(out_path)


def harvest_all(
    seeds: SeedList,
    policy: FetchPolicy,
    out_path: Union[str, Path],
    k: int = 5,
    ocr: Optional[OcrPlugin] = None,
    rendered_html_dir: Optional[Union[str, Path]] = None,
) -> CrawlStats:
    """Crawl every seed with bounded parallelism, appending pairs to the
    corpus file as seeds complete. Per-seed failures are recorded, never
    fatal."""
    out = Path(out_path)
    stats = CrawlStats(seeds_total=len(seeds.entries))
    fetcher = Fetcher(policy, rendered_html_dir=rendered_html_dir)
    collected: list[CorpusPair] = []
    _write_snapshot(collected, out)
    with ThreadPoolExecutor(max_workers=policy.parallelism) as pool:
        futures = {
            pool.submit(
                harvest_seed, url, policy, k=k, ocr=ocr, fetcher=fetcher, stats=stats
            ): url
            for url, _category in seeds.entries
        }
        for future in as_completed(futures):
            url = futures[future]
            try:
                pairs = future.result()
            except (FetchError, dom.ParseFailure) as exc:
                stats.bump("seeds_failed")
                logger.warning("seed %s failed: %s", url, exc)
                continue
            collected.extend(pairs)
            _write_snapshot(collected, out)
    return stats


@dataclass(frozen=True)
class SimilarityAudit:
    """Distribution of cosine(anchor, title) over a corpus; the sanity
    check that harvested positives really are semantically related."""

    total: int
    skipped_empty_anchor: int
    buckets: tuple[int, ...]  # 20 buckets of width 0.1 from -1.0 to 1.0
    fraction_above_half: Optional[float]
    fraction_above_point9: Optional[float]

    def to_json(self) -> dict[str, Any]:
        labels = [f"[{-1.0 + 0.1 * i:.1f},{-1.0 + 0.1 * (i + 1):.1f})" for i in range(20)]
        labels[-1] = labels[-1][:-1] + "]"
        return {
            "total": self.total,
            "skipped_empty_anchor": self.skipped_empty_anchor,
            "buckets": dict(zip(labels, self.buckets)),
            "fraction_above_0.5": (
                round(self.fraction_above_half, 3)
                if self.fraction_above_half is not None
                else None
            ),
            "fraction_above_0.9": (
                round(self.fraction_above_point9, 3)
                if self.fraction_above_point9 is not None
                else None
            ),
        }


def base_similarity_audit(
    pairs: Sequence[CorpusPair], provider: EmbeddingProvider
) -> SimilarityAudit:
    """Cosine similarity between anchor text and target title per pair,
    histogrammed in 0.1-wide buckets."""
    buckets = [0] * 20
    skipped = 0
    cosines: list[float] = []
    scored_pairs = []
    for pair in pairs:
        if not normalize_ws(pair.link.anchor_text):
            skipped += 1
            continue
        scored_pairs.append(pair)
    if scored_pairs:
        anchors = provider.embed_batch([p.link.anchor_text for p in scored_pairs])
        titles = provider.embed_batch([p.page.title for p in scored_pairs])
        for a, t in zip(anchors, titles):
            na, nt = float(np.linalg.norm(a)), float(np.linalg.norm(t))
            value = float(a @ t / (na * nt)) if na > 0 and nt > 0 else 0.0
            cosines.append(value)
            index = min(int((value + 1.0) / 0.1), 19)
            buckets[max(index, 0)] += 1
    n = len(cosines)
    return SimilarityAudit(
        total=len(pairs),
        skipped_empty_anchor=skipped,
        buckets=tuple(buckets),
        fraction_above_half=(sum(c > 0.5 for c in cosines) / n) if n else None,
        fraction_above_point9=(sum(c > 0.9 for c in cosines) / n) if n else None,
    )
