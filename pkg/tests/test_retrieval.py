import numpy as np
import pytest

from ark.backends import MockEmbedder
from ark.index import build_index
from ark.retrieval import (
    DegenerateQuery,
    extract_noun_phrases,
    mixed_query,
    retrieve_best,
    retrieve_topk,
)


class TestChunker:
    def test_extracts_expected_phrases(self):
        phrases = extract_noun_phrases("Cat sleeping in front of a powered on laptop computer")
        assert "cat" in phrases
        assert "laptop computer" in phrases

    def test_empty_text(self):
        assert extract_noun_phrases("") == []

    def test_stopwords_only(self):
        assert extract_noun_phrases("the the the") == []

    def test_deterministic(self):
        text = "A red bicycle leaning against the brick wall"
        assert extract_noun_phrases(text) == extract_noun_phrases(text)

    def test_lowercases_and_preserves_order(self):
        phrases = extract_noun_phrases("The Dog chased the Ball")
        assert phrases == ["dog", "ball"]


class TestMixedQuery:
    def test_symmetric_average(self):
        q = mixed_query(np.array([1.0, 0.0]), np.array([0.0, 1.0]), alpha=0.5)
        assert np.allclose(q, [2**-0.5, 2**-0.5])

    def test_pure_phrase_endpoint(self):
        q = mixed_query(np.array([0.0, 1.0]), np.array([5.0, -3.0]), alpha=1.0)
        assert np.allclose(q, [0.0, 1.0])

    def test_exact_cancellation(self):
        with pytest.raises(DegenerateQuery):
            mixed_query(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), alpha=0.5)

    def test_result_is_unit_norm(self):
        rng = np.random.default_rng(0)
        q = mixed_query(rng.standard_normal(8), rng.standard_normal(8), 0.3)
        assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)


class FixedEmbedder:
    """Maps known strings to fixed vectors; everything else far away."""

    identity = "fixed"

    def __init__(self, table, dim):
        self.table = table
        self.dim = dim

    def embed(self, text):
        if text in self.table:
            return np.asarray(self.table[text], dtype=np.float64)
        v = np.zeros(self.dim)
        v[-1] = 1.0
        return v


class TestRetrieve:
    def test_pool_of_one_returns_it(self, embedder):
        index = build_index([("only", embedder.embed("anything"))])
        stmt_id, _ = retrieve_best("completely unrelated words here", embedder.embed("img"), index, embedder)
        assert stmt_id == "only"

    def test_constructed_pool_brute_force(self):
        # Phrase "dog" is aligned with statement s2 by construction.
        dim = 4
        table = {
            "dog": [1.0, 0.0, 0.0, 0.0],
            "park": [0.0, 1.0, 0.0, 0.0],
        }
        embedder = FixedEmbedder(table, dim)
        visual = np.array([1.0, 0.0, 0.0, 0.0])
        rows = {
            "s1": np.array([0.0, 1.0, 0.0, 0.0]),
            "s2": np.array([1.0, 0.05, 0.0, 0.0]),
            "s3": np.array([0.0, 0.0, 1.0, 0.0]),
        }
        index = build_index(sorted(rows.items()))
        stmt_id, score = retrieve_best("dog running through park", visual, index, embedder)
        assert stmt_id == "s2"
        # Brute force over all (phrase, statement) cosines confirms the max.
        best = max(
            (float(np.dot(q / np.linalg.norm(q), r / np.linalg.norm(r))), sid)
            for phrase in ("dog", "park")
            for q in [0.5 * np.asarray(table.get(phrase, [0, 0, 0, 1.0])) + 0.5 * visual]
            for sid, r in rows.items()
        )
        assert score == pytest.approx(best[0], abs=1e-12)
        assert stmt_id == best[1]

    def test_topk_covers_pool_when_k_large(self, small_index, embedder):
        results = retrieve_topk("a cat and a computer", embedder.embed("img"), small_index, embedder, k=100)
        assert len(results) == len(small_index)
        scores = [s for _, s in results]
        assert scores == sorted(scores, reverse=True)

    def test_topk_one_equals_best(self, small_index, embedder):
        for text in ("cat on a computer", "sweetheart cake", "dog"):
            visual = embedder.embed("visual:" + text)
            best = retrieve_best(text, visual, small_index, embedder)
            assert retrieve_topk(text, visual, small_index, embedder, k=1) == [best]

    def test_merge_matches_brute_force(self, embedder):
        rng = np.random.default_rng(4)
        rows = [(f"s{i}", rng.standard_normal(32)) for i in range(5)]
        index = build_index(rows)
        text = "red bicycle near brick wall"
        visual = embedder.embed("photo")
        got = retrieve_topk(text, visual, index, embedder, k=3)
        # Oracle: recompute every (phrase, statement) cosine and merge by max.
        merged = {}
        for phrase in extract_noun_phrases(text):
            q = 0.5 * embedder.embed(phrase) + 0.5 * visual
            q = q / np.linalg.norm(q)
            for sid, r in rows:
                s = float(np.dot(q, r / np.linalg.norm(r)))
                merged[sid] = max(merged.get(sid, -2.0), s)
        expected = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))[:3]
        assert [g[0] for g in got] == [e[0] for e in expected]
        assert np.allclose([g[1] for g in got], [e[1] for e in expected], atol=1e-12)

    def test_fallback_to_whole_text_when_no_phrases(self, small_index, embedder):
        results = retrieve_topk("of the and", embedder.embed("img"), small_index, embedder, k=2)
        assert len(results) == 2

    def test_scaling_knowledge_or_query_preserves_order(self, embedder):
        rng = np.random.default_rng(9)
        rows = [(f"s{i}", rng.standard_normal(32)) for i in range(6)]
        scaled = [(sid, 3.0 * r) for sid, r in rows]
        text = "green turtle on a log"
        visual = embedder.embed("img")
        a = retrieve_topk(text, visual, build_index(rows), embedder, k=4)
        b = retrieve_topk(text, visual, build_index(scaled), embedder, k=4)
        assert [x[0] for x in a] == [x[0] for x in b]
