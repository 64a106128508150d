"""Metric computation, ablation switches, and the generative-model
baseline client.

Metric divisions by zero surface as explicit None ("undefined") values,
never a conventional zero: a harness that silently reports precision 0.0
when nothing was predicted positive hides the difference between a bad
model and an empty bucket.
"""

from __future__ import annotations

import dataclasses
import re
import time
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Union

import requests

from .corpus import CorpusPair, Label
from .embedding import EmbeddingCache, EmbeddingProvider
from .oracle import (
    DEFAULT_THRESHOLD,
    Decision,
    NoSourceFeatures,
    NoTargetFeatures,
    PairScorer,
    score_pair,
)
from .siamese import SiameseModel


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_json(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class Metrics:
    """Classification metrics; None marks an undefined division."""

    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]

    def to_json(self) -> dict[str, Optional[float]]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def compute_metrics(counts: ConfusionCounts) -> Metrics:
    accuracy = (counts.tp + counts.tn) / counts.total if counts.total else None
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    elif precision is not None and recall is not None:
        f1 = 0.0
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


@dataclass(frozen=True)
class AblationConfig:
    use_anchor: bool = True
    use_side_text: bool = True
    use_image_text: bool = True

    def __post_init__(self):
        if not (self.use_anchor or self.use_side_text or self.use_image_text):
            raise ValueError("at least one feature family must stay enabled")

    def mask(self, pair: CorpusPair) -> CorpusPair:
        """Strip disabled source features before scoring; masked texts
        are never embedded."""
        link = pair.link
        if not self.use_anchor:
            link = dataclasses.replace(link, anchor_text="")
        if not self.use_side_text:
            link = dataclasses.replace(link, side_texts=())
        if not self.use_image_text:
            link = dataclasses.replace(link, image_texts=())
        return dataclasses.replace(pair, link=link)


class UnlabeledPair(Exception):
    pass


def evaluate(
    model: Union[SiameseModel, PairScorer],
    provider: EmbeddingProvider,
    labeled_pairs: Sequence[CorpusPair],
    tau: float = DEFAULT_THRESHOLD,
    ablation: AblationConfig = AblationConfig(),
    cache: Optional[EmbeddingCache] = None,
) -> tuple[ConfusionCounts, Metrics, list[dict[str, Any]]]:
    """Score labeled pairs under an ablation mask and count the
    confusion. A pair left without scoreable features counts as
    Irrelevant with score 0 (the oracle cannot validate it)."""
    for index, pair in enumerate(labeled_pairs):
        if pair.label is Label.UNLABELED:
            raise UnlabeledPair(f"pair {index} is unlabeled")
    cache = cache or EmbeddingCache(capacity=max(1024, 8 * len(labeled_pairs)))
    tp = fp = tn = fn = 0
    report: list[dict[str, Any]] = []
    for index, pair in enumerate(labeled_pairs):
        masked = ablation.mask(pair)
        note = None
        try:
            verdict = score_pair(
                model, provider, masked.link, masked.page, tau=tau, cache=cache
            )
            score = verdict.score
            decision = verdict.decision
        except (NoSourceFeatures, NoTargetFeatures) as exc:
            score = 0.0
            decision = Decision.IRRELEVANT
            note = type(exc).__name__
        positive = pair.label is Label.POSITIVE
        valid = decision is Decision.VALID
        if positive and valid:
            tp += 1
        elif positive:
            fn += 1
        elif valid:
            fp += 1
        else:
            tn += 1
        line: dict[str, Any] = {
            "index": index,
            "label": pair.label.value,
            "decision": decision.value,
            "score": score,
            "url": pair.page.target_url,
        }
        if note:
            line["note"] = note
        report.append(line)
    counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
    return counts, compute_metrics(counts), report


# --- generative baseline ------------------------------------------------------

PROMPT_TEMPLATE = """Assume you are a webpage visitor. You expect to see relevant webpage content when clicking on a hyperlink.
---
Your task is to determine the answer to the following question based on the rating criteria provided.
Q: After a webpage visitor clicks on a hyperlink with "Hyperlink Information," do they expect to view a webpage with "Target Webpage Information"?
--- Rating Criteria ---
1 - Definitely not
2 - Probably not
3 - Might or might not
4 - Probably yes
5 - Definitely yes
---
"Hyperlink Information":
{link_info}
---
"Target Webpage Information":
{webpage_info}
---
Just give me a rating and do not reply with anything else. Your reply should only be in the following format:
"Rating criteria: <rating criteria>\""""


def _render_fields(fields: list[tuple[str, str]]) -> str:
    return "\n".join(f"{name}: {value}" for name, value in fields if value)


def render_link_info(pair_or_link) -> str:
    link = pair_or_link.link if isinstance(pair_or_link, CorpusPair) else pair_or_link
    return _render_fields(
        [
            ("url", link.source_url),
            ("anchor_text", link.anchor_text),
            ("link_kind", link.link_kind.value),
            ("image_texts", "; ".join(text for _kind, text in link.image_texts)),
            ("side_texts", "; ".join(text for text, _distance in link.side_texts)),
        ]
    )


def render_webpage_info(pair_or_page) -> str:
    page = pair_or_page.page if isinstance(pair_or_page, CorpusPair) else pair_or_page
    return _render_fields(
        [
            ("url", page.target_url),
            ("http_status", str(page.http_status)),
            ("title", page.title),
            ("headers", "; ".join(text for _level, text in page.headers)),
            ("keywords", "; ".join(term for term, _score in page.keywords)),
        ]
    )


def render_prompt(link_info, webpage_info) -> str:
    """Fill the rating-prompt template with the canonical one-field-per-
    line renderings of both sides."""
    return PROMPT_TEMPLATE.format(
        link_info=render_link_info(link_info),
        webpage_info=render_webpage_info(webpage_info),
    )


@dataclass(frozen=True)
class LikertRating:
    value: int
    raw_reply: str

    def __post_init__(self):
        if not 1 <= self.value <= 5:
            raise ValueError(f"rating must be 1..5, got {self.value}")


class RatingParseFailure(Exception):
    def __init__(self, raw_reply: str):
        self.raw_reply = raw_reply
        super().__init__(f"no 1..5 rating found in reply: {raw_reply!r}")


_RATING_MARKER = re.compile(r"rating\s*criteria\s*:", re.IGNORECASE)
_FIRST_INT = re.compile(r"\d+")


def parse_rating(reply: str) -> LikertRating:
    """Extract the first integer after the ``Rating criteria:`` marker;
    anything else (missing marker, out-of-scale number) is a parse
    failure carrying the raw reply."""
    marker = _RATING_MARKER.search(reply)
    if marker is None:
        raise RatingParseFailure(reply)
    match = _FIRST_INT.search(reply, marker.end())
    if match is None:
        raise RatingParseFailure(reply)
    value = int(match.group())
    if not 1 <= value <= 5:
        raise RatingParseFailure(reply)
    return LikertRating(value=value, raw_reply=reply)


@dataclass(frozen=True)
class LlmEndpoint:
    endpoint: str
    model: str
    api_key: Optional[str] = None
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 0.5


@dataclass(frozen=True)
class LatencyStats:
    pairs_evaluated: int
    gaps: int  # transport failures after retries
    parse_failures: int
    seconds_total: float
    pairs_per_second: Optional[float]

    def to_json(self) -> dict[str, Any]:
        return {
            "pairs_evaluated": self.pairs_evaluated,
            "gaps": self.gaps,
            "parse_failures": self.parse_failures,
            "seconds_total": self.seconds_total,
            "pairs_per_second": self.pairs_per_second,
        }


def _chat_completion(config: LlmEndpoint, prompt: str, session) -> str:
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    body = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    backoff = config.backoff
    last_exc: Optional[Exception] = None
    for attempt in range(config.max_attempts):
        try:
            response = session.post(
                config.endpoint, json=body, headers=headers, timeout=config.timeout
            )
            response.raise_for_status()
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            last_exc = exc
            if attempt + 1 < config.max_attempts:
                time.sleep(backoff)
                backoff *= 2
    raise RuntimeError(f"chat endpoint failed after {config.max_attempts} attempts: {last_exc}")


def _rate_one(
    config: LlmEndpoint, index: int, pair: CorpusPair, http
) -> dict[str, Any]:
    line: dict[str, Any] = {"index": index, "label": pair.label.value}
    try:
        reply = _chat_completion(config, render_prompt(pair, pair), http)
    except RuntimeError as exc:
        line["gap"] = str(exc)
        return line
    try:
        rating = parse_rating(reply)
    except RatingParseFailure:
        line["parse_failure"] = reply
        return line
    line["rating"] = rating.value
    return line


def llm_baseline_evaluate(
    config: LlmEndpoint,
    labeled_pairs: Sequence[CorpusPair],
    rating_threshold: int = 4,
    session: Optional[requests.Session] = None,
    concurrency: int = 1,
) -> tuple[ConfusionCounts, Metrics, LatencyStats, list[dict[str, Any]]]:
    """Rate every pair through the chat endpoint and binarize at
    ``rating_threshold`` (>= threshold means relevant). Transport
    failures and unparseable replies become evaluation gaps, never
    default labels. Sequential per endpoint by default; ``concurrency``
    opts into parallel requests."""
    if not 2 <= rating_threshold <= 5:
        raise ValueError("rating_threshold must be in 2..5")
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    for index, pair in enumerate(labeled_pairs):
        if pair.label is Label.UNLABELED:
            raise UnlabeledPair(f"pair {index} is unlabeled")
    http = session or requests.Session()
    started = time.perf_counter()
    if concurrency == 1:
        report = [
            _rate_one(config, index, pair, http)
            for index, pair in enumerate(labeled_pairs)
        ]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            report = list(
                pool.map(
                    lambda item: _rate_one(config, item[0], item[1], http),
                    enumerate(labeled_pairs),
                )
            )
    elapsed = time.perf_counter() - started

    tp = fp = tn = fn = 0
    gaps = 0
    parse_failures = 0
    for pair, line in zip(labeled_pairs, report):
        if "gap" in line:
            gaps += 1
            continue
        if "parse_failure" in line:
            parse_failures += 1
            continue
        relevant = line["rating"] >= rating_threshold
        line["relevant"] = relevant
        positive = pair.label is Label.POSITIVE
        if positive and relevant:
            tp += 1
        elif positive:
            fn += 1
        elif relevant:
            fp += 1
        else:
            tn += 1
    evaluated = tp + fp + tn + fn
    stats = LatencyStats(
        pairs_evaluated=evaluated,
        gaps=gaps,
        parse_failures=parse_failures,
        seconds_total=elapsed,
        pairs_per_second=(evaluated / elapsed) if evaluated and elapsed > 0 else None,
    )
    counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
    return counts, compute_metrics(counts), stats, report
