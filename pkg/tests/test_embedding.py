"""Embedding cache behavior and cosine similarity (with property tests)."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tutorkit.embedding import (
    DeterministicEmbeddingProvider,
    Embedder,
    EmbeddingVector,
    cosine_similarity,
)
from tutorkit.errors import (
    DimensionMismatch,
    EmptyText,
    ModelMismatch,
    ZeroNormVector,
)


def vec(values, model="m"):
    return EmbeddingVector.from_values(values, model)


class CountingProvider:
    def __init__(self, response=None):
        self.calls = 0
        self.response = response or [3.0, 4.0]

    def embed_text(self, model, text):
        self.calls += 1
        return list(self.response) if not callable(self.response) else self.response(text)


class TestEmbedder:
    def test_cache_hit_skips_provider(self):
        provider = CountingProvider()
        embedder = Embedder(provider, "m")
        first = embedder.embed("x")
        second = embedder.embed("x")
        assert provider.calls == 1
        assert first == second

    def test_passthrough_vector(self):
        embedder = Embedder(CountingProvider([3, 4]), "m")
        vector = embedder.embed("x")
        assert vector.dim == 2
        assert vector.values == (3.0, 4.0)
        assert vector.model_id == "m"

    def test_inconsistent_dim_is_contract_violation(self):
        responses = iter([[1.0] * 5, [1.0] * 4])
        provider = CountingProvider(lambda text: next(responses))
        embedder = Embedder(provider, "m")
        embedder.embed("a")
        with pytest.raises(DimensionMismatch):
            embedder.embed("b")

    def test_empty_text_rejected(self):
        with pytest.raises(EmptyText):
            Embedder(CountingProvider(), "m").embed("")

    def test_cache_persists_across_instances(self, tmp_path):
        cache = tmp_path / "cache.jsonl"
        provider = CountingProvider()
        Embedder(provider, "m", cache).embed("hello")
        assert provider.calls == 1
        # Second embedder reads the same file: no provider call.
        second = Embedder(provider, "m", cache)
        vector = second.embed("hello")
        assert provider.calls == 1
        assert vector.values == (3.0, 4.0)

    def test_cache_keyed_by_text_bytes(self):
        provider = CountingProvider()
        embedder = Embedder(provider, "m")
        embedder.embed("a")
        embedder.embed("a ")  # different bytes -> new call
        assert provider.calls == 2


class TestHttpClient:
    def test_wire_format_and_passthrough(self, monkeypatch):
        from tutorkit.mocks import MockOpenAIServer
        from tutorkit.providers import OpenAIEmbeddingClient

        monkeypatch.setenv("OPENAI_API_KEY", "test-token")
        with MockOpenAIServer(embedding_dim=4) as server:
            client = OpenAIEmbeddingClient(endpoint_url=server.embeddings_url)
            values = client.embed_text("embed-model", "hello")
            assert len(values) == 4
            request = server.requests[0]
            assert request.body == {"model": "embed-model", "input": "hello"}
            assert request.headers.get("Authorization") == "Bearer test-token"

    def test_outage_becomes_provider_unavailable(self):
        from tutorkit.errors import ProviderUnavailable
        from tutorkit.mocks import MockOpenAIServer
        from tutorkit.providers import OpenAIEmbeddingClient, RetryPolicy

        with MockOpenAIServer() as server:
            server.fail_next(10)
            client = OpenAIEmbeddingClient(
                endpoint_url=server.embeddings_url,
                retry=RetryPolicy(max_retries=1, backoff_seconds=0.0),
            )
            with pytest.raises(ProviderUnavailable):
                client.embed_text("m", "x")
            assert server.request_count() == 2


class TestDeterministicProvider:
    def test_stable_across_instances(self):
        a = DeterministicEmbeddingProvider(dim=16).embed_text("m", "text")
        b = DeterministicEmbeddingProvider(dim=16).embed_text("m", "text")
        assert a == b

    def test_unit_norm(self):
        values = DeterministicEmbeddingProvider(dim=64).embed_text("m", "anything")
        assert math.isclose(float(np.linalg.norm(values)), 1.0, abs_tol=1e-9)

    def test_distinct_texts_distinct_vectors(self):
        provider = DeterministicEmbeddingProvider(dim=32)
        assert provider.embed_text("m", "a") != provider.embed_text("m", "b")


class TestCosineSimilarity:
    def test_identity(self):
        v = vec([1, 2, 3])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine_similarity(vec([1, 0]), vec([0, 1])) == pytest.approx(0.0)

    def test_forty_five_degrees(self):
        # High-precision direct evaluation of the definition as oracle:
        # (1*1 + 0*1) / (1 * sqrt(2)) = 0.7071067811865475...
        expected = 1.0 / math.sqrt(2.0)
        assert cosine_similarity(vec([1, 0]), vec([1, 1])) == pytest.approx(
            0.70710678, abs=1e-8
        )
        assert cosine_similarity(vec([1, 0]), vec([1, 1])) == pytest.approx(expected)

    def test_zero_norm_rejected(self):
        with pytest.raises(ZeroNormVector):
            cosine_similarity(vec([0, 0]), vec([1, 1]))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity(vec([1, 2]), vec([1, 2, 3]))

    def test_model_mismatch_rejected(self):
        with pytest.raises(ModelMismatch):
            cosine_similarity(vec([1, 2], "m1"), vec([1, 2], "m2"))

    def test_opposite_vectors_clamped(self):
        assert cosine_similarity(vec([1e-8, 0]), vec([-1e8, 0])) == -1.0


finite_components = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)
nonzero_vectors = st.lists(finite_components, min_size=3, max_size=3).filter(
    lambda v: any(abs(x) > 1e-6 for x in v)
)


@settings(max_examples=200, deadline=None)
@given(a=nonzero_vectors, b=nonzero_vectors)
def test_symmetry_and_bounds(a, b):
    va, vb = vec(a), vec(b)
    forward = cosine_similarity(va, vb)
    backward = cosine_similarity(vb, va)
    assert forward == backward  # exact symmetry
    assert -1.0 <= forward <= 1.0


@settings(max_examples=200, deadline=None)
@given(
    a=nonzero_vectors,
    b=nonzero_vectors,
    scale=st.floats(min_value=1e-3, max_value=1e3),
)
def test_positive_scale_invariance(a, b, scale):
    base = cosine_similarity(vec(a), vec(b))
    scaled = cosine_similarity(vec([scale * x for x in a]), vec(b))
    assert scaled == pytest.approx(base, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(a=nonzero_vectors)
def test_self_similarity_is_one(a):
    v = vec(a)
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)


def test_vector_validation():
    with pytest.raises(DimensionMismatch):
        EmbeddingVector(values=(1.0, 2.0), dim=3, model_id="m")
    with pytest.raises(ValueError):
        EmbeddingVector.from_values([float("nan")], "m")
