"""Exact inner-product / cosine nearest-neighbor index over knowledge
embeddings.

The index is a flat normalized matrix scanned exhaustively; every score it
returns equals the brute-force cosine, so downstream tests can rely on
exactness. Persistence is a small binary format with a bit-exact round-trip.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ARKIDX"
FORMAT_VERSION = 1


class IndexError_(Exception):
    pass


class EmptyPool(IndexError_):
    pass


class DimMismatch(IndexError_):
    pass


class ZeroVector(IndexError_):
    pass


class NonFiniteQuery(IndexError_):
    pass


def normalize(vec: np.ndarray) -> np.ndarray:
    """L2-normalize, rejecting zero and non-finite vectors."""
    vec = np.asarray(vec, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise NonFiniteQuery("vector has non-finite entries")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ZeroVector("cannot normalize a zero vector")
    return vec / norm


def cosine(a, b) -> float:
    """Cosine similarity of two vectors; raises on zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero vector")
    return float(np.dot(a, b) / (na * nb))


class KnowledgeIndex:
    """Immutable flat index: normalized rows plus a row -> statement-id map."""

    def __init__(self, matrix: np.ndarray, ids: list[str]):
        if matrix.shape[0] != len(ids):
            raise IndexError_("row count does not match id map size")
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.ids = list(ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def save(self, path: str | Path) -> None:
        rows = self.matrix.astype("<f4")
        id_blob = json.dumps(self.ids, ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<HII", FORMAT_VERSION, self.dim, len(self)))
            f.write(rows.tobytes(order="C"))
            f.write(struct.pack("<I", len(id_blob)))
            f.write(id_blob)

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeIndex":
        with open(path, "rb") as f:
            magic = f.read(len(MAGIC))
            if magic != MAGIC:
                raise IndexError_(f"bad magic in {path}")
            version, dim, n = struct.unpack("<HII", f.read(10))
            if version != FORMAT_VERSION:
                raise IndexError_(f"unsupported index version {version}")
            rows = np.frombuffer(f.read(4 * dim * n), dtype="<f4").reshape(n, dim)
            (id_len,) = struct.unpack("<I", f.read(4))
            ids = json.loads(f.read(id_len).decode("utf-8"))
        return cls(rows.astype(np.float64), ids)


def build_index(embeddings: list[tuple[str, np.ndarray]]) -> KnowledgeIndex:
    """Build a flat index. Rows are stored L2-normalized in input order."""
    if not embeddings:
        raise EmptyPool("cannot build an index over an empty pool")
    dim = np.asarray(embeddings[0][1]).shape[-1]
    rows = np.empty((len(embeddings), dim), dtype=np.float64)
    ids = []
    for i, (stmt_id, vec) in enumerate(embeddings):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (dim,):
            raise DimMismatch(f"row {stmt_id!r} has dimension {vec.shape[-1]}, expected {dim}")
        rows[i] = normalize(vec)
        ids.append(stmt_id)
    return KnowledgeIndex(rows, ids)


def search_topk(index: KnowledgeIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Top-k rows by cosine similarity, ties broken by ascending id.

    Equivalent to a full brute-force scan; returns min(k, pool size) results.
    """
    if k < 1:
        raise IndexError_(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimMismatch(f"query dimension {q.shape} does not match index dimension {index.dim}")
    q = normalize(q)
    scores = index.matrix @ q
    # Sort by score descending, then id ascending, over the full scan.
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.ids[i]))
    return [(index.ids[i], float(scores[i])) for i in order[: min(k, len(index))]]
