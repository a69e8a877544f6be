"""Exact retrieval vs a brute-force oracle, persistence, truncation."""

import math

import numpy as np
import pytest

from tutorkit.corpus import ContentChunk, SourceKind, SourceLocator, approx_token_count
from tutorkit.embedding import EmbeddingVector
from tutorkit.errors import (
    CorruptIndexFile,
    DimensionMismatch,
    EmptyIndex,
    HeterogeneousVectors,
)
from tutorkit.vector_index import (
    IndexEntry,
    RetrievalRequest,
    build_index,
    load_index,
    save_index,
    truncate_to_budget,
)


def make_entry(i, kind, values, model="m"):
    if kind == SourceKind.TEXTBOOK:
        locator = SourceLocator(section_id=f"s{i}")
    elif kind == SourceKind.LECTURE_VIDEO:
        locator = SourceLocator(video_id=f"v{i}", start_seconds=i)
    else:
        locator = SourceLocator(assignment_id=f"a{i}")
    chunk = ContentChunk.create(kind, locator, f"chunk {i} body text")
    return IndexEntry(chunk=chunk, vector=EmbeddingVector.from_values(values, model))


def random_corpus(rng, n, dim, kinds=(SourceKind.TEXTBOOK, SourceKind.LECTURE_VIDEO)):
    entries = []
    for i in range(n):
        kind = kinds[int(rng.integers(len(kinds)))]
        entries.append(make_entry(i, kind, rng.standard_normal(dim)))
    return entries


def brute_force_top_k(entries, query, k, kind):
    """Oracle: full-scan cosine similarity, argsort, tie-break on chunk_id."""
    q = np.asarray(query, dtype=np.float64)
    q = q / np.linalg.norm(q)
    scored = []
    for e in entries:
        if e.chunk.kind != kind:
            continue
        v = np.asarray(e.vector.values, dtype=np.float64)
        score = float(np.dot(v / np.linalg.norm(v), q))
        scored.append((-score, e.chunk.chunk_id))
    scored.sort()
    return [chunk_id for _, chunk_id in scored[:k]]


class TestBuild:
    def test_entry_count_preserved(self):
        entries = [make_entry(i, SourceKind.TEXTBOOK, [1.0, float(i)]) for i in range(3)]
        assert len(build_index(entries)) == 3

    def test_heterogeneous_dims_rejected(self):
        entries = [
            make_entry(0, SourceKind.TEXTBOOK, [1.0] * 1536),
            make_entry(1, SourceKind.TEXTBOOK, [1.0] * 768),
        ]
        with pytest.raises(HeterogeneousVectors):
            build_index(entries)

    def test_heterogeneous_models_rejected(self):
        entries = [
            make_entry(0, SourceKind.TEXTBOOK, [1.0, 0.0], model="m1"),
            make_entry(1, SourceKind.TEXTBOOK, [1.0, 0.0], model="m2"),
        ]
        with pytest.raises(HeterogeneousVectors):
            build_index(entries)

    def test_empty_rejected(self):
        with pytest.raises(EmptyIndex):
            build_index([])


class TestRetrieve:
    def test_identical_vector_scores_one(self):
        entries = [
            make_entry(0, SourceKind.TEXTBOOK, [1.0, 0.0]),
            make_entry(1, SourceKind.TEXTBOOK, [0.0, 1.0]),
        ]
        index = build_index(entries)
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values([1.0, 0.0], "m"),
            k_video=0,
            k_textbook=1,
        )
        hits = index.retrieve(request)
        assert len(hits) == 1
        assert hits[0].chunk_id == entries[0].chunk.chunk_id
        assert hits[0].score == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        entries = random_corpus(rng, 200, dim=16)
        index = build_index(entries)
        for trial in range(5):
            query = rng.standard_normal(16)
            request = RetrievalRequest(
                query_vector=EmbeddingVector.from_values(query, "m"),
                k_video=2,
                k_textbook=2,
            )
            hits = index.retrieve(request)
            expected = brute_force_top_k(
                entries, query, 2, SourceKind.LECTURE_VIDEO
            ) + brute_force_top_k(entries, query, 2, SourceKind.TEXTBOOK)
            assert [h.chunk_id for h in hits] == expected

    def test_k_clamped_to_available(self):
        rng = np.random.default_rng(0)
        entries = [make_entry(i, SourceKind.LECTURE_VIDEO, rng.standard_normal(4)) for i in range(3)]
        entries += [make_entry(10 + i, SourceKind.TEXTBOOK, rng.standard_normal(4)) for i in range(2)]
        index = build_index(entries)
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values([1, 0, 0, 0], "m"),
            k_video=5,
            k_textbook=0,
        )
        hits = index.retrieve(request)
        assert len(hits) == 3
        assert all(h.kind == SourceKind.LECTURE_VIDEO for h in hits)

    def test_scores_non_increasing_within_kind(self):
        rng = np.random.default_rng(7)
        index = build_index(random_corpus(rng, 100, dim=8))
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values(rng.standard_normal(8), "m"),
            k_video=10,
            k_textbook=10,
        )
        hits = index.retrieve(request)
        for kind in (SourceKind.LECTURE_VIDEO, SourceKind.TEXTBOOK):
            scores = [h.score for h in hits if h.kind == kind]
            assert scores == sorted(scores, reverse=True)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        entries = random_corpus(rng, 50, dim=8)
        index = build_index(entries)
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values(rng.standard_normal(8), "m"),
            k_video=3,
            k_textbook=3,
        )
        assert index.retrieve(request) == index.retrieve(request)

    def test_tie_break_ascending_chunk_id(self):
        entries = [
            make_entry(i, SourceKind.TEXTBOOK, [1.0, 0.0]) for i in range(4)
        ]
        index = build_index(entries)
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values([2.0, 0.0], "m"),
            k_video=0,
            k_textbook=2,
        )
        hits = index.retrieve(request)
        expected = sorted(e.chunk.chunk_id for e in entries)[:2]
        assert [h.chunk_id for h in hits] == expected

    def test_dimension_mismatch(self):
        index = build_index([make_entry(0, SourceKind.TEXTBOOK, [1.0, 0.0])])
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values([1.0, 0.0, 0.0], "m")
        )
        with pytest.raises(DimensionMismatch):
            index.retrieve(request)

    def test_assignments_excluded_by_default(self):
        entries = [
            make_entry(0, SourceKind.CODING_ASSIGNMENT, [1.0, 0.0]),
            make_entry(1, SourceKind.TEXTBOOK, [0.9, 0.1]),
        ]
        index = build_index(entries)
        query = EmbeddingVector.from_values([1.0, 0.0], "m")
        hits = index.retrieve(RetrievalRequest(query_vector=query, k_video=2, k_textbook=2))
        assert all(h.kind != SourceKind.CODING_ASSIGNMENT for h in hits)
        # The grounding path re-enables them.
        search_hits = index.search(query, 2, include_assignments=True)
        assert any(h.kind == SourceKind.CODING_ASSIGNMENT for h in search_hits)

    def test_request_validation(self):
        query = EmbeddingVector.from_values([1.0], "m")
        with pytest.raises(ValueError):
            RetrievalRequest(query_vector=query, k_video=0, k_textbook=0)
        with pytest.raises(ValueError):
            RetrievalRequest(query_vector=query, k_video=-1, k_textbook=2)


class TestTruncation:
    def test_truncates_at_whitespace(self):
        text = " ".join(f"word{i}" for i in range(100))
        truncated = truncate_to_budget(text, 40)  # 30 words max
        assert truncated == " ".join(f"word{i}" for i in range(30))
        assert approx_token_count(truncated) <= 40

    def test_short_text_untouched(self):
        assert truncate_to_budget("a b c", 700) == "a b c"

    def test_hits_respect_content_budget(self):
        long_text = " ".join(f"tok{i}" for i in range(2000))
        chunk = ContentChunk.create(
            SourceKind.TEXTBOOK, SourceLocator(section_id="1.1"), long_text
        )
        entry = IndexEntry(
            chunk=chunk, vector=EmbeddingVector.from_values([1.0, 0.0], "m")
        )
        index = build_index([entry])
        request = RetrievalRequest(
            query_vector=EmbeddingVector.from_values([1.0, 0.0], "m"),
            k_video=0,
            k_textbook=1,
            max_tokens_per_content=100,
        )
        hits = index.retrieve(request)
        assert approx_token_count(hits[0].text) <= 100
        assert long_text.startswith(hits[0].text)


class TestPersistence:
    def test_roundtrip_retrieval_identical(self, tmp_path):
        rng = np.random.default_rng(11)
        entries = random_corpus(rng, 10, dim=6)
        index = build_index(entries)
        path = tmp_path / "course.idx"
        save_index(index, path)
        loaded = load_index(path)
        for _ in range(5):
            query = EmbeddingVector.from_values(rng.standard_normal(6), "m")
            request = RetrievalRequest(query_vector=query, k_video=3, k_textbook=3)
            assert loaded.retrieve(request) == index.retrieve(request)

    def test_truncated_file_detected(self, tmp_path):
        entries = [make_entry(i, SourceKind.TEXTBOOK, [1.0, float(i)]) for i in range(5)]
        path = tmp_path / "course.idx"
        save_index(build_index(entries), path)
        content = path.read_text().splitlines()
        path.write_text("\n".join(content[:-1]) + "\n")
        with pytest.raises(CorruptIndexFile):
            load_index(path)

    def test_tampered_entry_detected(self, tmp_path):
        entries = [make_entry(i, SourceKind.TEXTBOOK, [1.0, float(i)]) for i in range(3)]
        path = tmp_path / "course.idx"
        save_index(build_index(entries), path)
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace("chunk 0", "chunk X")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptIndexFile):
            load_index(path)

    def test_empty_path_rejected(self, tmp_path):
        entries = [make_entry(0, SourceKind.TEXTBOOK, [1.0, 0.0])]
        with pytest.raises(ValueError):
            save_index(build_index(entries), "")
        with pytest.raises(ValueError):
            load_index("")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorruptIndexFile):
            load_index(tmp_path / "nope.idx")
