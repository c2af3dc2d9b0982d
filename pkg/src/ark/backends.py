"""Pluggable model-backend contracts and their deterministic mocks.

The generative models in the pipeline (text generator, image generator,
embedder) are frozen black boxes. Everything downstream talks to them through
the three protocols here; the mocks are pure functions of (input, seed), so
the whole pipeline is reproducible without network access. Live HTTP adapters
are optional and configured via environment variables.
"""

from __future__ import annotations

import hashlib
import os
from typing import Callable, Optional, Protocol, runtime_checkable

import numpy as np

from . import defaults


class BackendError(Exception):
    def __init__(self, stage: str, message: str, retriable: bool = False):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.retriable = retriable


@runtime_checkable
class Embedder(Protocol):
    identity: str

    def embed(self, text: str) -> np.ndarray: ...


@runtime_checkable
class TextGenerator(Protocol):
    identity: str

    def generate(self, prompt: str) -> str: ...


@runtime_checkable
class ImageGenerator(Protocol):
    identity: str

    def generate(self, prompt: str) -> tuple[str, np.ndarray]: ...


class MockEmbedder:
    """Deterministic hash embedder: input text maps to a seeded Gaussian
    vector, L2-normalized. Distinct inputs are near-orthogonal in expectation.
    """

    def __init__(self, dim: int = defaults.EMBED_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.identity = f"mock-embedder/d{dim}/s{seed}"

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)


class MockTextGenerator:
    """Rule-based text generator: first matching rule wins, else echo.

    Rules are (predicate-or-substring, responder) pairs; a responder is a
    string or a callable of the prompt.
    """

    def __init__(self, rules: Optional[list[tuple[object, object]]] = None):
        self.rules = rules or []
        self.identity = "mock-textgen"

    def add_rule(self, matcher, responder) -> "MockTextGenerator":
        self.rules.append((matcher, responder))
        return self

    def generate(self, prompt: str) -> str:
        for matcher, responder in self.rules:
            matched = matcher(prompt) if callable(matcher) else (matcher in prompt)
            if matched:
                return responder(prompt) if callable(responder) else responder
        return prompt


class MockImageGenerator:
    """Returns a tag plus the mock embedding of the prompt itself, standing in
    for generate-then-embed of a real diffusion backend."""

    def __init__(self, embedder: Optional[MockEmbedder] = None):
        self.embedder = embedder or MockEmbedder()
        self.identity = f"mock-imagegen({self.embedder.identity})"

    def generate(self, prompt: str) -> tuple[str, np.ndarray]:
        tag = "img-" + hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
        return tag, self.embedder.embed(prompt)


class EchoImageGenerator:
    """Test double that returns a fixed embedding regardless of prompt."""

    def __init__(self, embedding: np.ndarray, tag: str = "img-fixed"):
        self.embedding = np.asarray(embedding, dtype=np.float64)
        self.tag = tag
        self.identity = "echo-imagegen"

    def generate(self, prompt: str) -> tuple[str, np.ndarray]:
        return self.tag, self.embedding


class HttpTextGenerator:
    """Live adapter: POST {"prompt": ...} to ARK_TEXTGEN_URL, expects
    {"text": ...}. Optional; nothing in the test suite depends on it."""

    def __init__(self, url: Optional[str] = None, api_key: Optional[str] = None, timeout: float = 30.0):
        self.url = url or os.environ.get("ARK_TEXTGEN_URL", "")
        self.api_key = api_key or os.environ.get("ARK_TEXTGEN_KEY", "")
        self.timeout = timeout
        self.identity = f"http-textgen({self.url})"
        if not self.url:
            raise BackendError("text-generator", "ARK_TEXTGEN_URL not configured")

    def generate(self, prompt: str) -> str:
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(self.url, json={"prompt": prompt}, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendError("text-generator", str(exc), retriable=True) from exc
        return resp.json()["text"]


class HttpEmbedder:
    """Live adapter: POST {"text": ...} to ARK_EMBED_URL, expects
    {"embedding": [...]}."""

    def __init__(self, url: Optional[str] = None, api_key: Optional[str] = None, timeout: float = 30.0):
        self.url = url or os.environ.get("ARK_EMBED_URL", "")
        self.api_key = api_key or os.environ.get("ARK_EMBED_KEY", "")
        self.timeout = timeout
        self.identity = f"http-embedder({self.url})"
        if not self.url:
            raise BackendError("embedder", "ARK_EMBED_URL not configured")

    def embed(self, text: str) -> np.ndarray:
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(self.url, json={"text": text}, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendError("embedder", str(exc), retriable=True) from exc
        return np.asarray(resp.json()["embedding"], dtype=np.float64)


class HttpImageGenerator:
    """Live adapter: POST {"prompt": ...} to ARK_IMAGEGEN_URL, expects
    {"tag": ..., "embedding": [...]}."""

    def __init__(self, url: Optional[str] = None, api_key: Optional[str] = None, timeout: float = 30.0):
        self.url = url or os.environ.get("ARK_IMAGEGEN_URL", "")
        self.api_key = api_key or os.environ.get("ARK_IMAGEGEN_KEY", "")
        self.timeout = timeout
        self.identity = f"http-imagegen({self.url})"
        if not self.url:
            raise BackendError("image-generator", "ARK_IMAGEGEN_URL not configured")

    def generate(self, prompt: str) -> tuple[str, np.ndarray]:
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(self.url, json={"prompt": prompt}, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendError("image-generator", str(exc), retriable=True) from exc
        body = resp.json()
        return body["tag"], np.asarray(body["embedding"], dtype=np.float64)
