"""Verdict layer: weights, feature enumeration, weighted-max
aggregation, thresholding, and batch verification."""

from datetime import datetime, timezone

import numpy as np
import pytest

from semlink.corpus import CorpusPair, HyperlinkContext, Label, LinkKind, PageContent
from semlink.embedding import EmbeddingCache, HashProvider, hash_embed
from semlink.oracle import (
    Decision,
    FeatureKind,
    FeatureText,
    NoSourceFeatures,
    NoTargetFeatures,
    batch_verify,
    score_pair,
    source_features,
    target_features,
    weight_of,
)
from semlink.siamese import init_model

TS = datetime(2026, 1, 15, 12, 0, 0, tzinfo=timezone.utc)
PROVIDER = HashProvider()


def make_link(anchor="Contact", side_texts=(), image_texts=(), kind=None):
    if kind is None:
        kind = LinkKind.IMAGE if image_texts else LinkKind.TEXT
    return HyperlinkContext(
        source_url="https://s.example/p",
        anchor_text=anchor,
        side_texts=tuple(side_texts),
        image_texts=tuple(image_texts),
        link_kind=kind,
    )


def make_page(title="Contact Us", headers=(), keywords=()):
    return PageContent(
        target_url="https://t.example/x",
        http_status=200,
        title=title,
        headers=tuple(headers),
        keywords=tuple(keywords),
    )


class TestWeightOf:
    def test_anchor_full_weight(self):
        assert weight_of(FeatureKind.ANCHOR) == 1.0

    def test_image_kinds_full_weight(self):
        assert weight_of(FeatureKind.IMAGE_OCR) == 1.0
        assert weight_of(FeatureKind.IMAGE_ATTR) == 1.0

    def test_side_text_decay_table_exact(self):
        assert weight_of(FeatureKind.SIDE_TEXT, 1) == 0.9
        assert weight_of(FeatureKind.SIDE_TEXT, 2) == 0.8
        assert weight_of(FeatureKind.SIDE_TEXT, 3) == 0.7
        assert weight_of(FeatureKind.SIDE_TEXT, 4) == 0.6
        assert weight_of(FeatureKind.SIDE_TEXT, 5) == 0.5

    def test_strictly_decreasing_in_rank(self):
        weights = [weight_of(FeatureKind.SIDE_TEXT, k) for k in range(1, 6)]
        assert all(a > b for a, b in zip(weights, weights[1:]))

    def test_accepts_feature_text(self):
        feature = FeatureText("snippet", FeatureKind.SIDE_TEXT, rank=3)
        assert weight_of(feature) == 0.7

    def test_target_kinds_carry_no_weight(self):
        for kind in (FeatureKind.PAGE_TITLE, FeatureKind.PAGE_HEADER, FeatureKind.PAGE_KEYWORDS):
            with pytest.raises(ValueError):
                weight_of(kind)

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError):
            weight_of(FeatureKind.SIDE_TEXT, 6)


class TestFeatureEnumeration:
    def test_source_order_anchor_image_side(self):
        link = make_link(
            anchor="Go",
            image_texts=(("alt", "Logo"), ("ocr", "Sale")),
            side_texts=(("Near", 1), ("Far", 2)),
        )
        kinds = [f.kind for f in source_features(link)]
        assert kinds == [
            FeatureKind.ANCHOR,
            FeatureKind.IMAGE_ATTR,
            FeatureKind.IMAGE_OCR,
            FeatureKind.SIDE_TEXT,
            FeatureKind.SIDE_TEXT,
        ]

    def test_empty_anchor_skipped(self):
        link = make_link(anchor="", image_texts=(("alt", "Logo"),))
        assert [f.kind for f in source_features(link)] == [FeatureKind.IMAGE_ATTR]

    def test_keywords_joined_in_rank_order(self):
        page = make_page(keywords=(("campus", 0.9), ("life", 0.5), ("news", 0.1)))
        features = target_features(page)
        keyword_features = [f for f in features if f.kind is FeatureKind.PAGE_KEYWORDS]
        assert len(keyword_features) == 1
        assert keyword_features[0].text == "campus life news"

    def test_header_cap_ten(self):
        page = make_page(headers=tuple((2, f"Header {i}") for i in range(15)))
        headers = [f for f in target_features(page) if f.kind is FeatureKind.PAGE_HEADER]
        assert len(headers) == 10

    def test_feature_text_must_be_nonempty(self):
        with pytest.raises(ValueError):
            FeatureText("", FeatureKind.ANCHOR)


def scorer_from_table(table):
    """Stub pair scorer: looks up raw scores by the texts' hash vectors."""
    vectors = {text: hash_embed(text) for text in {t for pair in table for t in pair}}

    def score(src_vec, tgt_vec):
        for (src_text, tgt_text), value in table.items():
            if np.array_equal(src_vec, vectors[src_text]) and np.array_equal(
                tgt_vec, vectors[tgt_text]
            ):
                return value
        raise AssertionError("unexpected feature combination scored")

    return score


class TestScorePair:
    def test_single_pair_weighted_by_anchor(self):
        scorer = scorer_from_table({("Contact", "Contact Us"): 0.8})
        verdict = score_pair(scorer, PROVIDER, make_link(), make_page(), tau=0.7)
        assert verdict.score == pytest.approx(0.8)
        assert verdict.decision is Decision.VALID
        assert len(verdict.matrix) == 1
        assert verdict.best.weight == 1.0

    def test_weighted_max_prefers_strong_side_text(self):
        link = make_link(anchor="More", side_texts=(("Campus Life", 1),))
        page = make_page(title="Campus Life Weekly")
        scorer = scorer_from_table(
            {
                ("More", "Campus Life Weekly"): 0.6,
                ("Campus Life", "Campus Life Weekly"): 0.9,
            }
        )
        verdict = score_pair(scorer, PROVIDER, link, page, tau=0.7)
        assert verdict.score == pytest.approx(0.81)
        assert verdict.best.source.kind is FeatureKind.SIDE_TEXT
        assert verdict.best.raw == pytest.approx(0.9)
        assert verdict.best.weight == pytest.approx(0.9)

    def test_threshold_boundary(self):
        scorer = scorer_from_table({("Contact", "Contact Us"): 0.70})
        verdict = score_pair(scorer, PROVIDER, make_link(), make_page(), tau=0.7)
        assert verdict.decision is Decision.VALID
        scorer = scorer_from_table({("Contact", "Contact Us"): 0.69})
        verdict = score_pair(scorer, PROVIDER, make_link(), make_page(), tau=0.7)
        assert verdict.decision is Decision.IRRELEVANT

    def test_matrix_enumerates_all_combinations(self):
        link = make_link(anchor="Go", side_texts=(("Near", 1),))
        page = make_page(
            title="Title", headers=((1, "H one"), (2, "H two")), keywords=(("kw", 1.0),)
        )
        model = init_model(np.random.default_rng(1))
        verdict = score_pair(model, PROVIDER, link, page, tau=0.7)
        assert len(verdict.matrix) == 2 * 4

    def test_no_source_features(self):
        link = make_link(anchor="")
        with pytest.raises(NoSourceFeatures):
            score_pair(init_model(np.random.default_rng(2)), PROVIDER, link, make_page(), tau=0.7)

    def test_no_target_features(self):
        page = make_page(title="")
        with pytest.raises(NoTargetFeatures):
            score_pair(init_model(np.random.default_rng(3)), PROVIDER, make_link(), page, tau=0.7)

    def test_determinism_same_inputs_same_verdict(self):
        model = init_model(np.random.default_rng(4))
        link = make_link(anchor="Docs", side_texts=(("Guides", 1),))
        page = make_page(title="Documentation", keywords=(("docs", 1.0),))
        one = score_pair(model, PROVIDER, link, page, tau=0.7)
        two = score_pair(model, PROVIDER, link, page, tau=0.7)
        assert one == two

    def test_score_equals_max_of_matrix(self):
        model = init_model(np.random.default_rng(5))
        link = make_link(anchor="Read", side_texts=(("Campus", 1), ("Life", 3)))
        page = make_page(title="Campus", headers=((1, "Life"),))
        verdict = score_pair(model, PROVIDER, link, page, tau=0.7)
        assert verdict.score == max(e.weighted for e in verdict.matrix)
        assert verdict.best.weighted == verdict.score

    def test_monotone_in_added_features(self):
        rng = np.random.default_rng(6)
        for trial in range(10):
            model = init_model(np.random.default_rng(trial))
            base_link = make_link(anchor="Alpha topic")
            more_link = make_link(
                anchor="Alpha topic", side_texts=(("Beta context", 1),)
            )
            page = make_page(title="Gamma title", keywords=(("delta", 1.0),))
            base = score_pair(model, PROVIDER, base_link, page, tau=0.7)
            more = score_pair(model, PROVIDER, more_link, page, tau=0.7)
            assert more.score >= base.score

    def test_exclusion_far_side_text_cannot_validate(self):
        # Sources at rank >= 4 carry weight <= 0.6 < 0.7, so alone they
        # can never cross the default threshold, whatever the model says.
        for trial in range(50):
            model = init_model(np.random.default_rng(1000 + trial))
            link = make_link(
                anchor="", side_texts=(("Distant snippet", 4), ("Footer junk", 5))
            )
            page = make_page(title=f"Random page {trial}")
            verdict = score_pair(model, PROVIDER, link, page, tau=0.7)
            assert verdict.decision is Decision.IRRELEVANT

    def test_threshold_extremes_allowed(self):
        scorer = scorer_from_table({("Contact", "Contact Us"): 0.01})
        assert (
            score_pair(scorer, PROVIDER, make_link(), make_page(), tau=0.0).decision
            is Decision.VALID
        )
        scorer = scorer_from_table({("Contact", "Contact Us"): 0.99})
        assert (
            score_pair(scorer, PROVIDER, make_link(), make_page(), tau=1.0).decision
            is Decision.IRRELEVANT
        )

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            score_pair(
                init_model(np.random.default_rng(7)), PROVIDER, make_link(), make_page(), tau=1.5
            )

    def test_each_distinct_text_embedded_once(self):
        class Counting:
            descriptor = "counting:oracle"

            def __init__(self):
                self.texts = []

            def embed_batch(self, texts):
                self.texts.extend(texts)
                return [hash_embed(t) for t in texts]

        counting = Counting()
        link = make_link(anchor="Same", side_texts=(("Same", 1),))
        page = make_page(title="Same")
        model = init_model(np.random.default_rng(8))
        score_pair(model, counting, link, page, tau=0.7, cache=EmbeddingCache(64))
        assert counting.texts == ["Same"]


def make_pair(anchor="Contact", title="Contact Us"):
    kind = LinkKind.TEXT
    return CorpusPair(
        link=make_link(anchor=anchor, kind=kind),
        page=make_page(title=title),
        label=Label.POSITIVE,
        collected_at=TS,
    )


class TestBatchVerify:
    def test_order_preserved_and_report_fields(self):
        model = init_model(np.random.default_rng(9))
        pairs = [make_pair(anchor=f"anchor {i}", title=f"title {i}") for i in range(5)]
        outcomes, report = batch_verify(model, PROVIDER, pairs, tau=0.7)
        assert [o.index for o in outcomes] == [0, 1, 2, 3, 4]
        assert report.pairs_scored == 5
        assert report.pairs_failed == 0
        assert report.seconds_total > 0
        assert report.pairs_per_second is not None
        assert report.seconds_embed + report.seconds_head == pytest.approx(
            report.seconds_total, abs=1e-6
        )

    def test_empty_input(self):
        model = init_model(np.random.default_rng(10))
        outcomes, report = batch_verify(model, PROVIDER, [], tau=0.7)
        assert outcomes == []
        assert report.pairs_per_second is None

    def test_unscoreable_pair_isolated(self):
        model = init_model(np.random.default_rng(11))
        bad = CorpusPair(
            link=make_link(anchor=""),
            page=make_page(title="Fine"),
            label=Label.UNLABELED,
            collected_at=TS,
        )
        pairs = [make_pair(anchor="ok one"), bad, make_pair(anchor="ok two")]
        outcomes, report = batch_verify(model, PROVIDER, pairs, tau=0.7)
        assert outcomes[0].verdict is not None
        assert outcomes[1].verdict is None
        assert outcomes[1].error == "NoSourceFeatures"
        assert outcomes[2].verdict is not None
        assert report.pairs_failed == 1

    def test_verdict_json_round_trips(self):
        import json

        model = init_model(np.random.default_rng(12))
        verdict = score_pair(model, PROVIDER, make_link(), make_page(), tau=0.7)
        payload = json.loads(json.dumps(verdict.to_json()))
        assert payload["decision"] in ("Valid", "Irrelevant")
        assert payload["matrix"][payload["best"]]["weighted"] == pytest.approx(
            verdict.score
        )
