"""Three-way contrastive training of image/text projection heads.

Two linear heads map fixed base embeddings into the knowledge embedding
space; the knowledge tower is frozen (identity over pre-built index rows).
Four loss terms: symmetric in-batch InfoNCE between image and text, plus
multi-positive InfoNCE from each of image and text against retrieved
knowledge, where each pair's retrieved top-k are its positives and the other
pairs' positives serve as negatives. Gradients are closed-form and checked
against central finite differences in the test suite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import defaults
from .index import KnowledgeIndex, search_topk


class TrainingError(Exception):
    pass


class DivergenceError(TrainingError):
    pass


@dataclass
class ProjectionHeads:
    """Trainable linear maps, base dim -> shared embedding dim."""

    W_img: np.ndarray
    W_txt: np.ndarray

    def __post_init__(self):
        self.W_img = np.asarray(self.W_img, dtype=np.float64)
        self.W_txt = np.asarray(self.W_txt, dtype=np.float64)
        if self.W_img.shape != self.W_txt.shape:
            raise TrainingError("image and text heads must share shape")
        if not (np.all(np.isfinite(self.W_img)) and np.all(np.isfinite(self.W_txt))):
            raise TrainingError("non-finite head weights")

    @classmethod
    def identity_init(cls, d_base: int, d: int, noise: float = 0.0, seed: int = 0) -> "ProjectionHeads":
        rng = np.random.default_rng(seed)
        base = np.eye(d_base, d)
        return cls(
            base + noise * rng.standard_normal((d_base, d)),
            base + noise * rng.standard_normal((d_base, d)),
        )

    @classmethod
    def random_init(cls, d_base: int, d: int, scale: float = 0.1, seed: int = 0) -> "ProjectionHeads":
        rng = np.random.default_rng(seed)
        return cls(
            scale * rng.standard_normal((d_base, d)),
            scale * rng.standard_normal((d_base, d)),
        )

    def copy(self) -> "ProjectionHeads":
        return ProjectionHeads(self.W_img.copy(), self.W_txt.copy())


@dataclass
class LossWeights:
    """Weights (a, b, c, d) on the four contrastive terms."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise TrainingError("loss weights must be non-negative")
        if self.a + self.b + self.c + self.d <= 0:
            raise TrainingError("at least one loss weight must be positive")


@dataclass
class ContrastiveBatch:
    """A batch of image/text base-embedding pairs with per-pair positive
    knowledge rows (index row ids)."""

    image_base: np.ndarray  # (B, d_base)
    text_base: np.ndarray  # (B, d_base)
    pos_img: list[list[int]]
    pos_txt: list[list[int]]
    temperature: float = defaults.TEMPERATURE

    def __post_init__(self):
        self.image_base = np.asarray(self.image_base, dtype=np.float64)
        self.text_base = np.asarray(self.text_base, dtype=np.float64)
        B = self.image_base.shape[0]
        if B < 2:
            raise TrainingError(f"batch size must be >= 2, got {B}")
        if self.text_base.shape != self.image_base.shape:
            raise TrainingError("image and text base embeddings must share shape")
        if len(self.pos_img) != B or len(self.pos_txt) != B:
            raise TrainingError("positive sets must match batch size")
        if any(len(p) == 0 for p in self.pos_img + self.pos_txt):
            raise TrainingError("every positive set must be non-empty")
        if self.temperature <= 0:
            raise TrainingError("temperature must be positive")

    @property
    def size(self) -> int:
        return self.image_base.shape[0]


def project(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Project and L2-normalize rows of X."""
    P = X @ W
    norms = np.linalg.norm(P, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise TrainingError("projection produced a zero vector")
    return P / norms


def assign_positives(
    index: KnowledgeIndex,
    heads: ProjectionHeads,
    image_base: np.ndarray,
    text_base: np.ndarray,
    k_pos: int = defaults.K_POS,
    temperature: float = defaults.TEMPERATURE,
) -> ContrastiveBatch:
    """Label each pair's top-k_pos retrieved knowledge rows as positives,
    using the current projections as queries."""
    if len(index) == 0:
        raise TrainingError("cannot assign positives from an empty index")
    if k_pos < 1:
        raise TrainingError("k_pos must be >= 1")
    row_of = {stmt_id: row for row, stmt_id in enumerate(index.ids)}
    V = project(heads.W_img, np.asarray(image_base, dtype=np.float64))
    W = project(heads.W_txt, np.asarray(text_base, dtype=np.float64))
    pos_img = [[row_of[i] for i, _ in search_topk(index, v, k_pos)] for v in V]
    pos_txt = [[row_of[i] for i, _ in search_topk(index, w, k_pos)] for w in W]
    return ContrastiveBatch(image_base, text_base, pos_img, pos_txt, temperature)


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    return Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))


def _pair_terms(batch: ContrastiveBatch, heads: ProjectionHeads):
    V = project(heads.W_img, batch.image_base)
    W = project(heads.W_txt, batch.text_base)
    Z = (V @ W.T) / batch.temperature
    return V, W, Z


def loss_v2t(batch: ContrastiveBatch, heads: ProjectionHeads) -> float:
    """In-batch InfoNCE, image anchors against all text columns."""
    _, _, Z = _pair_terms(batch, heads)
    return float(-np.diag(_log_softmax(Z)).mean())


def loss_t2v(batch: ContrastiveBatch, heads: ProjectionHeads) -> float:
    """In-batch InfoNCE, text anchors against all image columns."""
    _, _, Z = _pair_terms(batch, heads)
    return float(-np.diag(_log_softmax(Z.T)).mean())


def _knowledge_loss(anchors: np.ndarray, pos_sets: list[list[int]], index: KnowledgeIndex, temperature: float) -> float:
    candidates = sorted({r for s in pos_sets for r in s})
    U = index.matrix[candidates]
    Z = (anchors @ U.T) / temperature
    col_of = {r: c for c, r in enumerate(candidates)}
    total = 0.0
    for i, pos in enumerate(pos_sets):
        z = Z[i] - Z[i].max()
        e = np.exp(z)
        pos_cols = [col_of[r] for r in set(pos)]
        total += -np.log(e[pos_cols].sum()) + np.log(e.sum())
    return total / len(pos_sets)


def loss_v2k(batch: ContrastiveBatch, index: KnowledgeIndex, heads: ProjectionHeads) -> float:
    """Multi-positive InfoNCE: image anchors against the union of the batch's
    positive knowledge rows; zero exactly when every candidate is positive."""
    V = project(heads.W_img, batch.image_base)
    return float(_knowledge_loss(V, batch.pos_img, index, batch.temperature))


def loss_t2k(batch: ContrastiveBatch, index: KnowledgeIndex, heads: ProjectionHeads) -> float:
    W = project(heads.W_txt, batch.text_base)
    return float(_knowledge_loss(W, batch.pos_txt, index, batch.temperature))


def loss_terms(batch: ContrastiveBatch, index: KnowledgeIndex, heads: ProjectionHeads) -> dict[str, float]:
    return {
        "v2t": loss_v2t(batch, heads),
        "t2v": loss_t2v(batch, heads),
        "v2k": loss_v2k(batch, index, heads),
        "t2k": loss_t2k(batch, index, heads),
    }


def total_loss(
    batch: ContrastiveBatch,
    index: KnowledgeIndex,
    heads: ProjectionHeads,
    weights: LossWeights,
) -> float:
    t = loss_terms(batch, index, heads)
    return weights.a * t["v2t"] + weights.b * t["t2v"] + weights.c * t["v2k"] + weights.d * t["t2k"]


def _normalize_backward(P: np.ndarray, V: np.ndarray, dV: np.ndarray) -> np.ndarray:
    # v = p/||p||  =>  dp = (dv - (v.dv) v)/||p||
    norms = np.linalg.norm(P, axis=1, keepdims=True)
    return (dV - (V * dV).sum(axis=1, keepdims=True) * V) / norms


def gradient(
    batch: ContrastiveBatch,
    index: KnowledgeIndex,
    heads: ProjectionHeads,
    weights: LossWeights,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form gradient of total_loss w.r.t. the two heads.

    Knowledge rows receive no gradient: the knowledge tower is frozen.
    """
    X, Y = batch.image_base, batch.text_base
    tau = batch.temperature
    B = batch.size

    P_img = X @ heads.W_img
    P_txt = Y @ heads.W_txt
    V = P_img / np.linalg.norm(P_img, axis=1, keepdims=True)
    W = P_txt / np.linalg.norm(P_txt, axis=1, keepdims=True)

    dV = np.zeros_like(V)
    dW = np.zeros_like(W)

    # v2t / t2v: cross-entropy on the (B, B) pair-similarity logits.
    Z = (V @ W.T) / tau
    S = np.exp(_log_softmax(Z))
    G = weights.a * (S - np.eye(B)) / (B * tau)
    dV += G @ W
    dW += G.T @ V

    St = np.exp(_log_softmax(Z.T))
    Gt = weights.b * (St - np.eye(B)) / (B * tau)
    dW += Gt @ V
    dV += Gt.T @ W

    # v2k / t2k: multi-positive InfoNCE against the frozen candidate rows.
    for anchors, pos_sets, weight, dA in (
        (V, batch.pos_img, weights.c, dV),
        (W, batch.pos_txt, weights.d, dW),
    ):
        if weight == 0:
            continue
        candidates = sorted({r for s in pos_sets for r in s})
        U = index.matrix[candidates]
        col_of = {r: c for c, r in enumerate(candidates)}
        Zk = (anchors @ U.T) / tau
        Sk = np.exp(_log_softmax(Zk))
        dZk = Sk.copy()
        for i, pos in enumerate(pos_sets):
            pos_cols = [col_of[r] for r in set(pos)]
            p = Sk[i, pos_cols]
            dZk[i, pos_cols] -= p / p.sum()
        dA += weight * (dZk @ U) / (B * tau)

    dP_img = _normalize_backward(P_img, V, dV)
    dP_txt = _normalize_backward(P_txt, W, dW)
    return X.T @ dP_img, Y.T @ dP_txt


@dataclass
class TrainConfig:
    steps: int = defaults.TRAIN_STEPS
    batch_size: int = defaults.BATCH_SIZE
    learning_rate: float = defaults.LEARNING_RATE
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    temperature: float = defaults.TEMPERATURE
    k_pos: int = defaults.K_POS
    momentum: float = 0.0
    optimizer: str = "sgd"  # "sgd" | "adam"
    # Adam settings mirror the paper-scale pretraining preset.
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-6


@dataclass
class TraceRow:
    step: int
    v2t: float
    t2v: float
    v2k: float
    t2k: float
    total: float


def write_trace_csv(trace: list[TraceRow], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "L_v2t", "L_t2v", "L_v2k", "L_t2k", "total"])
        for row in trace:
            writer.writerow([row.step, row.v2t, row.t2v, row.v2k, row.t2k, row.total])


def train(
    image_base: np.ndarray,
    text_base: np.ndarray,
    index: KnowledgeIndex,
    config: TrainConfig,
    heads: Optional[ProjectionHeads] = None,
) -> tuple[ProjectionHeads, list[TraceRow]]:
    """SGD over the weighted contrastive objective.

    Positives are re-assigned every step from the current projections, so
    early retrieval quality only needs to be good enough to bootstrap.
    Deterministic under a fixed seed.
    """
    image_base = np.asarray(image_base, dtype=np.float64)
    text_base = np.asarray(text_base, dtype=np.float64)
    n = image_base.shape[0]
    if n < config.batch_size:
        raise TrainingError(f"dataset has {n} pairs, need at least batch_size={config.batch_size}")

    rng = np.random.default_rng(config.seed)
    if heads is None:
        heads = ProjectionHeads.identity_init(image_base.shape[1], index.dim)
    else:
        heads = heads.copy()

    vel_img = np.zeros_like(heads.W_img)
    vel_txt = np.zeros_like(heads.W_txt)
    m_img = np.zeros_like(heads.W_img)
    m_txt = np.zeros_like(heads.W_txt)
    s_img = np.zeros_like(heads.W_img)
    s_txt = np.zeros_like(heads.W_txt)

    trace: list[TraceRow] = []
    for step in range(config.steps):
        idx = rng.choice(n, size=config.batch_size, replace=False)
        batch = assign_positives(
            index, heads, image_base[idx], text_base[idx], config.k_pos, config.temperature
        )
        terms = loss_terms(batch, index, heads)
        total = (
            config.weights.a * terms["v2t"]
            + config.weights.b * terms["t2v"]
            + config.weights.c * terms["v2k"]
            + config.weights.d * terms["t2k"]
        )
        if not np.isfinite(total):
            raise DivergenceError(f"non-finite loss {total} at step {step}")
        trace.append(TraceRow(step, terms["v2t"], terms["t2v"], terms["v2k"], terms["t2k"], total))

        g_img, g_txt = gradient(batch, index, heads, config.weights)
        if config.optimizer == "adam":
            t = step + 1
            m_img = config.adam_beta1 * m_img + (1 - config.adam_beta1) * g_img
            m_txt = config.adam_beta1 * m_txt + (1 - config.adam_beta1) * g_txt
            s_img = config.adam_beta2 * s_img + (1 - config.adam_beta2) * g_img**2
            s_txt = config.adam_beta2 * s_txt + (1 - config.adam_beta2) * g_txt**2
            mh_img = m_img / (1 - config.adam_beta1**t)
            mh_txt = m_txt / (1 - config.adam_beta1**t)
            sh_img = s_img / (1 - config.adam_beta2**t)
            sh_txt = s_txt / (1 - config.adam_beta2**t)
            heads.W_img -= config.learning_rate * mh_img / (np.sqrt(sh_img) + config.adam_eps)
            heads.W_txt -= config.learning_rate * mh_txt / (np.sqrt(sh_txt) + config.adam_eps)
        else:
            vel_img = config.momentum * vel_img - config.learning_rate * g_img
            vel_txt = config.momentum * vel_txt - config.learning_rate * g_txt
            heads.W_img += vel_img
            heads.W_txt += vel_txt

    return heads, trace
