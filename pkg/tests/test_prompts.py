from pathlib import Path

import numpy as np
import pytest

from ark.backends import MockEmbedder, MockImageGenerator, MockTextGenerator
from ark.prompts import (
    MissingSlot,
    PromptError,
    PromptTemplate,
    render_qa_prompt,
    render_rewrite_prompt,
    render_scene_prompt,
)

GOLDENS = Path(__file__).parent / "goldens"


class TestQaPrompt:
    def test_matches_golden_byte_for_byte(self):
        rendered = render_qa_prompt("A dog runs.", "dog has property friendly")
        assert rendered.encode() == (GOLDENS / "qa_prompt.golden.txt").read_bytes()

    def test_empty_sentence_rejected(self):
        with pytest.raises(MissingSlot):
            render_qa_prompt("", "knowledge")

    def test_slots_appear_verbatim(self):
        rendered = render_qa_prompt("some sentence here", "some knowledge there")
        assert "some sentence here" in rendered
        assert "some knowledge there" in rendered


class TestRewritePrompt:
    def test_matches_golden_byte_for_byte(self):
        rendered = render_rewrite_prompt(
            "A group of people are skiing on the snow.",
            "What are the people doing?",
            "The people are skiing as a form of transport or recreation.",
        )
        assert rendered.encode() == (GOLDENS / "rewrite_prompt.golden.txt").read_bytes()

    def test_ends_with_new_sentence_marker(self):
        assert render_rewrite_prompt("s", "q?", "a").endswith("New Sentence:")

    def test_deterministic(self):
        args = ("sent", "q?", "ans")
        assert render_rewrite_prompt(*args) == render_rewrite_prompt(*args)


class TestScenePrompt:
    def test_fresh_generation_has_no_scene_section(self):
        rendered = render_scene_prompt("a cozy office")
        assert "Current scene:" not in rendered
        assert "a cozy office" in rendered

    def test_context_embedded_verbatim(self):
        context = '{"objects": [], "revision": 3}'
        rendered = render_scene_prompt("add a plant", scene_context=context)
        assert context in rendered
        assert "Current scene:" in rendered

    def test_grammar_stated(self):
        assert "OBJECT <label> POS" in render_scene_prompt("anything")


class TestPromptTemplate:
    def test_duplicate_slot_rejected(self):
        with pytest.raises(PromptError):
            PromptTemplate("bad", "{x} and {x}", frozenset({"x"}))

    def test_missing_slot_in_template_rejected(self):
        with pytest.raises(PromptError):
            PromptTemplate("bad", "no slots", frozenset({"x"}))

    def test_render_is_slot_free(self):
        t = PromptTemplate("t", "a {x} b {y}", frozenset({"x", "y"}))
        assert t.render(x="1", y="2") == "a 1 b 2"


class TestMockBackends:
    def test_embedder_purity(self):
        e = MockEmbedder(dim=32, seed=0)
        assert np.array_equal(e.embed("x"), e.embed("x"))

    def test_embedder_distinctness(self):
        e = MockEmbedder(dim=32, seed=0)
        a, b = e.embed("x"), e.embed("y")
        assert float(np.dot(a, b)) < 0.99

    def test_embedder_unit_norm(self):
        e = MockEmbedder(dim=32, seed=1)
        assert np.linalg.norm(e.embed("anything")) == pytest.approx(1.0, abs=1e-12)

    def test_seed_changes_embedding(self):
        a = MockEmbedder(dim=32, seed=0).embed("x")
        b = MockEmbedder(dim=32, seed=1).embed("x")
        assert not np.allclose(a, b)

    def test_image_generator_embedding_is_prompt_embedding(self):
        e = MockEmbedder(dim=32, seed=0)
        gen = MockImageGenerator(e)
        tag, emb = gen.generate("a prompt")
        assert np.array_equal(emb, e.embed("a prompt"))
        assert tag.startswith("img-")

    def test_text_generator_echo_and_rules(self):
        gen = MockTextGenerator([("hello", "hi there")])
        assert gen.generate("well hello world") == "hi there"
        assert gen.generate("unmatched") == "unmatched"
