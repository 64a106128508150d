"""The verdict layer: pairwise feature scoring, position-aware source
weights, max aggregation, and threshold classification.

Every source feature (anchor, image texts, side snippets) is scored
against every target feature (title, headers, joined keywords); the
final score is the maximum of the weighted products. Max, not mean: a
hyperlink's intent is usually localized in one strong cue, and averaging
would drown it in generic neighbors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from .corpus import CorpusPair, HyperlinkContext, PageContent
from .features import (
    HEADER_CAP,
    FeatureKind,
    FeatureText,
    source_features,
    target_features,
    weight_of,
)
from .embedding import EmbeddingCache, EmbeddingProvider
from .siamese import SiameseModel, score_matrix

DEFAULT_THRESHOLD = 0.7


class NoSourceFeatures(Exception):
    """The hyperlink side has no scoreable text (upstream cleaning gap)."""


class NoTargetFeatures(Exception):
    """The page side has no scoreable text (upstream cleaning gap)."""


@dataclass(frozen=True)
class MatrixEntry:
    source: FeatureText
    target: FeatureText
    raw: float
    weight: float
    weighted: float


class Decision(str, Enum):
    VALID = "Valid"
    IRRELEVANT = "Irrelevant"


@dataclass(frozen=True)
class Verdict:
    score: float
    decision: Decision
    matrix: tuple[MatrixEntry, ...]
    threshold: float
    best_index: int

    def __post_init__(self):
        if not self.matrix:
            raise ValueError("a verdict requires at least one matrix entry")
        if self.score != max(entry.weighted for entry in self.matrix):
            raise ValueError("verdict score must equal the max weighted entry")
        expected = Decision.VALID if self.score >= self.threshold else Decision.IRRELEVANT
        if self.decision is not expected:
            raise ValueError("decision is inconsistent with score and threshold")

    @property
    def best(self) -> MatrixEntry:
        return self.matrix[self.best_index]

    def to_json(self) -> dict[str, Any]:
        return {
            "score": self.score,
            "decision": self.decision.value,
            "threshold": self.threshold,
            "best": self.best_index,
            "matrix": [
                {
                    "source": entry.source.describe(),
                    "source_text": entry.source.text,
                    "target": entry.target.describe(),
                    "target_text": entry.target.text,
                    "raw": entry.raw,
                    "weight": entry.weight,
                    "weighted": entry.weighted,
                }
                for entry in self.matrix
            ],
        }


PairScorer = Callable[[np.ndarray, np.ndarray], float]


def score_pair(
    model: Union[SiameseModel, PairScorer],
    provider: EmbeddingProvider,
    link: HyperlinkContext,
    page: PageContent,
    tau: float = DEFAULT_THRESHOLD,
    cache: Optional[EmbeddingCache] = None,
) -> Verdict:
    """Score every (source, target) feature combination and aggregate by
    weighted max. Argmax ties resolve to the earliest (source order,
    then target order) entry."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {tau}")
    sources = source_features(link)
    targets = target_features(page)
    if not sources:
        raise NoSourceFeatures("hyperlink context has no scoreable text")
    if not targets:
        raise NoTargetFeatures("page content has no scoreable text")
    cache = cache or EmbeddingCache(capacity=1024)
    distinct = list(dict.fromkeys([f.text for f in sources + targets]))
    vectors = dict(zip(distinct, cache.embed(provider, distinct)))

    if isinstance(model, SiameseModel):
        src_mat = np.stack([vectors[f.text] for f in sources])
        tgt_mat = np.stack([vectors[f.text] for f in targets])
        raw_scores = score_matrix(model, src_mat, tgt_mat)
    else:
        raw_scores = np.array(
            [
                [float(model(vectors[s.text], vectors[t.text])) for t in targets]
                for s in sources
            ]
        )

    entries: list[MatrixEntry] = []
    best_index = 0
    best_score = -1.0
    for i, source in enumerate(sources):
        weight = weight_of(source)
        for j, target in enumerate(targets):
            raw = float(raw_scores[i, j])
            weighted = raw * weight
            entries.append(MatrixEntry(source, target, raw, weight, weighted))
            if weighted > best_score:
                best_score = weighted
                best_index = len(entries) - 1
    decision = Decision.VALID if best_score >= tau else Decision.IRRELEVANT
    return Verdict(
        score=best_score,
        decision=decision,
        matrix=tuple(entries),
        threshold=tau,
        best_index=best_index,
    )


@dataclass(frozen=True)
class VerifyOutcome:
    index: int
    verdict: Optional[Verdict]
    error: Optional[str] = None


@dataclass(frozen=True)
class ThroughputReport:
    """Wall-clock accounting for a verification batch, corpus I/O
    excluded. Embed time covers provider calls; head time is the rest."""

    pairs_scored: int
    pairs_failed: int
    seconds_total: float
    seconds_embed: float
    seconds_head: float
    pairs_per_second: Optional[float]

    def to_json(self) -> dict[str, Any]:
        return {
            "pairs_scored": self.pairs_scored,
            "pairs_failed": self.pairs_failed,
            "seconds_total": self.seconds_total,
            "seconds_embed": self.seconds_embed,
            "seconds_head": self.seconds_head,
            "pairs_per_second": self.pairs_per_second,
        }


class _TimedProvider:
    """Wraps a provider to attribute time spent embedding."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.descriptor = inner.descriptor
        self.seconds = 0.0

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        started = time.perf_counter()
        try:
            return self.inner.embed_batch(texts)
        finally:
            self.seconds += time.perf_counter() - started


def batch_verify(
    model: Union[SiameseModel, PairScorer],
    provider: EmbeddingProvider,
    pairs: Sequence[CorpusPair],
    tau: float = DEFAULT_THRESHOLD,
    cache: Optional[EmbeddingCache] = None,
) -> tuple[list[VerifyOutcome], ThroughputReport]:
    """Score a batch, isolating per-pair failures, and report throughput
    split into embedding time and head time."""
    timed = _TimedProvider(provider)
    cache = cache or EmbeddingCache(capacity=max(1024, 8 * len(pairs)))
    outcomes: list[VerifyOutcome] = []
    started = time.perf_counter()
    scored = 0
    failed = 0
    for index, pair in enumerate(pairs):
        try:
            verdict = score_pair(model, timed, pair.link, pair.page, tau=tau, cache=cache)
            outcomes.append(VerifyOutcome(index=index, verdict=verdict))
            scored += 1
        except (NoSourceFeatures, NoTargetFeatures) as exc:
            outcomes.append(
                VerifyOutcome(index=index, verdict=None, error=type(exc).__name__)
            )
            failed += 1
    total = time.perf_counter() - started
    report = ThroughputReport(
        pairs_scored=scored,
        pairs_failed=failed,
        seconds_total=total,
        seconds_embed=timed.seconds,
        seconds_head=max(total - timed.seconds, 0.0),
        pairs_per_second=(scored / total) if pairs and total > 0 else None,
    )
    return outcomes, report
