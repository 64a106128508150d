"""Corpus types, cleaning, splitting, and file round-trips."""

import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semlink.corpus import (
    CorpusPair,
    EmptyCorpus,
    HyperlinkContext,
    Label,
    LinkKind,
    PageContent,
    RejectReason,
    SchemaViolation,
    clean_pair,
    pair_to_json,
    read_corpus,
    split_corpus,
    write_corpus,
)

TS = datetime(2026, 1, 15, 12, 0, 0, tzinfo=timezone.utc)


def make_pair(
    anchor="Contact",
    title="Contact Us",
    image_texts=(),
    side_texts=(),
    headers=(),
    keywords=(),
    label=Label.POSITIVE,
    status=200,
    kind=None,
):
    if kind is None:
        kind = LinkKind.IMAGE if image_texts else LinkKind.TEXT
    return CorpusPair(
        link=HyperlinkContext(
            source_url="https://source.example/page",
            anchor_text=anchor,
            image_texts=tuple(image_texts),
            side_texts=tuple(side_texts),
            link_kind=kind,
        ),
        page=PageContent(
            target_url="https://target.example/x",
            http_status=status,
            title=title,
            headers=tuple(headers),
            keywords=tuple(keywords),
        ),
        label=label,
        collected_at=TS,
    )


class TestInvariants:
    def test_side_texts_capped_at_five(self):
        with pytest.raises(ValueError):
            make_pair(side_texts=tuple((f"t{i}", i) for i in range(1, 7)))

    def test_side_texts_strictly_ascending(self):
        with pytest.raises(ValueError):
            make_pair(side_texts=(("a", 2), ("b", 2)))

    def test_side_text_distance_range(self):
        with pytest.raises(ValueError):
            make_pair(side_texts=(("a", 0),))
        with pytest.raises(ValueError):
            make_pair(side_texts=(("a", 6),))

    def test_side_text_must_be_nonempty(self):
        with pytest.raises(ValueError):
            make_pair(side_texts=(("   ", 1),))

    def test_text_link_has_no_image_texts(self):
        with pytest.raises(ValueError):
            make_pair(image_texts=(("alt", "Logo"),), kind=LinkKind.TEXT)

    def test_unknown_image_kind(self):
        with pytest.raises(ValueError):
            make_pair(image_texts=(("exif", "x"),))

    def test_positive_pair_requires_200(self):
        with pytest.raises(ValueError):
            make_pair(status=404, label=Label.POSITIVE)
        make_pair(status=404, label=Label.NEGATIVE)  # fine

    def test_header_levels(self):
        with pytest.raises(ValueError):
            make_pair(headers=((4, "deep"),))

    def test_keywords_sorted_descending(self):
        with pytest.raises(ValueError):
            make_pair(keywords=(("a", 0.1), ("b", 0.9)))


class TestCleanPair:
    def test_both_sides_nonempty_accepts(self):
        assert clean_pair(make_pair(anchor="Contact", title="Contact Us")) is None

    def test_empty_source_rejected(self):
        pair = make_pair(anchor="", title="Anything")
        assert clean_pair(pair) is RejectReason.EMPTY_SOURCE

    def test_alt_text_rescues_empty_anchor(self):
        pair = make_pair(anchor="", image_texts=(("alt", "logo"),), title="Home")
        assert clean_pair(pair) is None

    def test_empty_target_rejected(self):
        pair = make_pair(anchor="Docs", title="", headers=(), keywords=())
        assert clean_pair(pair) is RejectReason.EMPTY_TARGET

    def test_whitespace_only_anchor_is_empty(self):
        pair = make_pair(anchor="  \t ", title="Page")
        assert clean_pair(pair) is RejectReason.EMPTY_SOURCE

    def test_headers_rescue_empty_title(self):
        pair = make_pair(anchor="Docs", title="", headers=((1, "Guide"),))
        assert clean_pair(pair) is None

    @given(
        anchor=st.sampled_from(["", " ", "\t", " ", "  　 "]),
        title=st.text(max_size=20),
    )
    @settings(max_examples=60)
    def test_fuzz_empty_source_always_rejected(self, anchor, title):
        pair = make_pair(anchor=anchor, title=title)
        assert clean_pair(pair) is RejectReason.EMPTY_SOURCE


class TestSplitCorpus:
    def test_85_15(self):
        pairs = [make_pair(anchor=f"a{i}") for i in range(100)]
        split = split_corpus(pairs, ratio=0.85, seed=7)
        assert len(split.train) == 85
        assert len(split.validation) == 15
        assert split.warning is None

    def test_degenerate_single_pair(self):
        split = split_corpus([make_pair()], ratio=0.85, seed=1)
        assert len(split.train) == 1
        assert len(split.validation) == 0
        assert split.warning is not None

    def test_determinism(self):
        pairs = [make_pair(anchor=f"a{i}") for i in range(40)]
        one = split_corpus(pairs, ratio=0.85, seed=11)
        two = split_corpus(pairs, ratio=0.85, seed=11)
        assert one == two

    def test_different_seed_differs(self):
        pairs = [make_pair(anchor=f"a{i}") for i in range(40)]
        assert split_corpus(pairs, 0.85, 1) != split_corpus(pairs, 0.85, 2)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            split_corpus([], ratio=0.85, seed=0)

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            split_corpus([make_pair()], ratio=1.0, seed=0)

    @given(n=st.integers(1, 60), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, n, seed):
        pairs = [make_pair(anchor=f"a{i}") for i in range(n)]
        split = split_corpus(pairs, ratio=0.85, seed=seed)
        combined = sorted(
            [p.link.anchor_text for p in split.train]
            + [p.link.anchor_text for p in split.validation]
        )
        assert combined == sorted(p.link.anchor_text for p in pairs)

    def test_ratio_band_for_large_corpora(self):
        for n in (100, 137, 400):
            pairs = [make_pair(anchor=f"a{i}") for i in range(n)]
            split = split_corpus(pairs, ratio=0.85, seed=3)
            fraction = len(split.train) / n
            assert 0.84 <= fraction <= 0.86


FULL_PAIR = CorpusPair(
    link=HyperlinkContext(
        source_url="https://news.example/front",
        anchor_text="Read More",
        image_texts=(("alt", "Summer Sale"), ("ocr", "50% Off")),
        side_texts=(("Campus Life", 1), ("Headlines", 2)),
        link_kind=LinkKind.IMAGE,
    ),
    page=PageContent(
        target_url="https://news.example/story",
        http_status=200,
        title="Campus Life Weekly",
        headers=((1, "Top Stories"), (2, "Campus Life")),
        keywords=(("campus", 0.9), ("life", 0.7)),
        final_url="https://news.example/story?cached=1",
    ),
    label=Label.POSITIVE,
    collected_at=TS,
)


class TestCorpusIo:
    def test_round_trip_identity(self, tmp_path):
        pairs = [FULL_PAIR, make_pair(anchor="Plain"), make_pair(anchor="Третий")]
        path = tmp_path / "corpus.json"
        write_corpus(pairs, path)
        assert read_corpus(path) == pairs

    def test_schema_tag_present(self, tmp_path):
        path = tmp_path / "corpus.json"
        write_corpus([FULL_PAIR], path)
        document = json.loads(path.read_text())
        assert document["schema"] == "hwpps-v1"

    def test_wire_field_names(self, tmp_path):
        record = pair_to_json(FULL_PAIR)
        assert set(record) == {"link", "page", "label", "collected_at"}
        assert set(record["link"]) == {
            "url", "anchor_text", "link_kind", "side_texts", "image_texts",
        }
        assert set(record["page"]) == {
            "url", "http_status", "title", "headers", "keywords", "final_url",
        }
        assert record["link"]["side_texts"][0] == {"text": "Campus Life", "dom_distance": 1}
        assert record["page"]["keywords"][0] == {"term": "campus", "score": 0.9}

    def test_missing_required_field(self, tmp_path):
        document = {"schema": "hwpps-v1", "pairs": [pair_to_json(FULL_PAIR)]}
        del document["pairs"][0]["link"]["url"]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(document))
        with pytest.raises(SchemaViolation) as excinfo:
            read_corpus(path)
        assert "link.url" in excinfo.value.field

    def test_empty_pairs_array(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text('{"schema": "hwpps-v1", "pairs": []}')
        assert read_corpus(path) == []

    def test_wrong_schema_tag(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"schema": "hwpps-v0", "pairs": []}')
        with pytest.raises(SchemaViolation):
            read_corpus(path)

    def test_bad_label_value(self, tmp_path):
        document = {"schema": "hwpps-v1", "pairs": [pair_to_json(FULL_PAIR)]}
        document["pairs"][0]["label"] = "Maybe"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(document))
        with pytest.raises(SchemaViolation):
            read_corpus(path)

    def test_unknown_fields_preserved(self, tmp_path):
        document = {"schema": "hwpps-v1", "pairs": [pair_to_json(FULL_PAIR)]}
        document["pairs"][0]["provenance"] = {"run": 3}
        document["pairs"][0]["link"]["xpath"] = "/html/body/a[1]"
        document["pairs"][0]["page"]["language"] = "en"
        path = tmp_path / "extra.json"
        path.write_text(json.dumps(document))
        pairs = read_corpus(path)
        assert pairs[0].extra == {"provenance": {"run": 3}}
        assert pairs[0].link.extra == {"xpath": "/html/body/a[1]"}
        assert pairs[0].page.extra == {"language": "en"}
        out = tmp_path / "rewritten.json"
        write_corpus(pairs, out)
        rewritten = json.loads(out.read_text())
        assert rewritten["pairs"][0]["provenance"] == {"run": 3}
        assert rewritten["pairs"][0]["link"]["xpath"] == "/html/body/a[1]"
        assert rewritten["pairs"][0]["page"]["language"] == "en"

    def test_timestamp_round_trip_is_utc(self, tmp_path):
        path = tmp_path / "c.json"
        write_corpus([FULL_PAIR], path)
        raw = json.loads(path.read_text())
        assert raw["pairs"][0]["collected_at"].endswith("Z")
        assert read_corpus(path)[0].collected_at == TS

    def test_garbage_timestamp(self, tmp_path):
        document = {"schema": "hwpps-v1", "pairs": [pair_to_json(FULL_PAIR)]}
        document["pairs"][0]["collected_at"] = "yesterday"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(document))
        with pytest.raises(SchemaViolation):
            read_corpus(path)

    def test_truncated_document(self, tmp_path):
        path = tmp_path / "trunc.json"
        write_corpus([FULL_PAIR], path)
        path.write_text(path.read_text()[:50])
        with pytest.raises(SchemaViolation):
            read_corpus(path)
