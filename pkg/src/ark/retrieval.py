"""Inference-time knowledge retrieval.

Noun phrases are extracted from the input text with a deterministic
rule-based chunker, each phrase embedding is mixed with the visual embedding
(alpha-weighted average), and the mixed queries run against the knowledge
index. A provider interface lets callers swap in a real statistical parser;
the bundled chunker keeps the test suite free of model downloads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional

import numpy as np

from . import defaults
from .backends import Embedder
from .index import KnowledgeIndex, search_topk, normalize


class RetrievalError(Exception):
    pass


class DegenerateQuery(RetrievalError):
    pass


def _load_lexicon(name: str) -> frozenset[str]:
    text = resources.files("ark.lexicon").joinpath(name).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


_STOPWORDS = _load_lexicon("stopwords.txt")
_VERBS = _load_lexicon("verbs.txt")

# Type of any phrase extractor usable in place of the bundled chunker.
PhraseExtractor = Callable[[str], list[str]]


def _is_content_word(token: str) -> bool:
    if token in _STOPWORDS or token in _VERBS:
        return False
    # Suffix heuristic: long -ing/-ed forms are almost always verbal here.
    if len(token) > 4 and (token.endswith("ing") or token.endswith("ed")):
        return False
    return True


def extract_noun_phrases(text: str) -> list[str]:
    """Rule-based chunker: maximal runs of content words, lowercased, in
    order of appearance. Deterministic by construction."""
    tokens = re.findall(r"[a-zA-Z']+", text.lower())
    phrases: list[str] = []
    current: list[str] = []
    for tok in tokens:
        if _is_content_word(tok):
            current.append(tok)
        elif current:
            phrases.append(" ".join(current))
            current = []
    if current:
        phrases.append(" ".join(current))
    return phrases


@dataclass
class PhraseQuery:
    phrase: str
    phrase_embedding: np.ndarray
    visual_embedding: np.ndarray
    alpha: float = defaults.ALPHA

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise RetrievalError(f"alpha must be in [0, 1], got {self.alpha}")
        self.phrase_embedding = np.asarray(self.phrase_embedding, dtype=np.float64)
        self.visual_embedding = np.asarray(self.visual_embedding, dtype=np.float64)
        if self.phrase_embedding.shape != self.visual_embedding.shape:
            raise RetrievalError("phrase and visual embeddings must share dimension")


def mixed_query(phrase_embedding: np.ndarray, visual_embedding: np.ndarray, alpha: float = defaults.ALPHA) -> np.ndarray:
    """q = alpha * phrase + (1 - alpha) * visual, L2-normalized."""
    e = np.asarray(phrase_embedding, dtype=np.float64)
    v = np.asarray(visual_embedding, dtype=np.float64)
    if e.shape != v.shape:
        raise RetrievalError("phrase and visual embeddings must share dimension")
    q = alpha * e + (1.0 - alpha) * v
    if np.linalg.norm(q) == 0.0:
        raise DegenerateQuery("mixed query cancelled to the zero vector")
    return normalize(q)


def _phrase_queries(
    text: str,
    visual_embedding: np.ndarray,
    embedder: Embedder,
    alpha: float,
    extractor: Optional[PhraseExtractor],
) -> list[tuple[str, np.ndarray]]:
    extract = extractor or extract_noun_phrases
    phrases = extract(text)
    if not phrases:
        # No phrase survived filtering: query with the whole text instead.
        phrases = [text]
    return [(p, mixed_query(embedder.embed(p), visual_embedding, alpha)) for p in phrases]


def retrieve_best(
    text: str,
    visual_embedding: np.ndarray,
    index: KnowledgeIndex,
    embedder: Embedder,
    alpha: float = defaults.ALPHA,
    extractor: Optional[PhraseExtractor] = None,
) -> tuple[str, float]:
    """Top-1 knowledge id over all phrase queries, by cosine score."""
    best: Optional[tuple[str, float]] = None
    for _, q in _phrase_queries(text, visual_embedding, embedder, alpha, extractor):
        (stmt_id, score), = search_topk(index, q, 1)
        if best is None or score > best[1] or (score == best[1] and stmt_id < best[0]):
            best = (stmt_id, score)
    assert best is not None
    return best


def retrieve_topk(
    text: str,
    visual_embedding: np.ndarray,
    index: KnowledgeIndex,
    embedder: Embedder,
    k: int = defaults.RETRIEVE_TOP_K,
    alpha: float = defaults.ALPHA,
    extractor: Optional[PhraseExtractor] = None,
) -> list[tuple[str, float]]:
    """Merged top-k across all phrase queries, deduplicated by id keeping the
    max score, sorted by score descending with ties by ascending id."""
    merged: dict[str, float] = {}
    for _, q in _phrase_queries(text, visual_embedding, embedder, alpha, extractor):
        for stmt_id, score in search_topk(index, q, k):
            if stmt_id not in merged or score > merged[stmt_id]:
                merged[stmt_id] = score
    ranked = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]
