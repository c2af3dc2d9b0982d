"""Knowledge-memory QA agent.

The policy is a linear-softmax scorer over candidate actions, where an
action pairs one retrieved knowledge statement with one question template.
An episode runs the frozen chain retrieve -> act -> rewrite -> regenerate
and receives a single terminal reward: the cosine similarity between the
original and regenerated image embeddings. Updates are REINFORCE with an
EMA baseline or PPO with the clipped surrogate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import defaults
from .backends import BackendError, Embedder, ImageGenerator, TextGenerator
from .index import KnowledgeIndex, cosine
from .prompts import render_rewrite_prompt
from .retrieval import retrieve_topk

POLICY_FORMAT_VERSION = 1

# Question templates the agent chooses between; {slot} is filled with the
# chosen knowledge statement's head entity.
QA_TEMPLATES = (
    "What is the {slot} in the image?",
    "Where is the {slot}?",
    "What is the {slot} used for?",
    "What does the {slot} look like?",
    "How many {slot} are in the image?",
    "What is near the {slot}?",
    "What is the {slot} made of?",
    "Why is the {slot} in the image?",
)


class AgentError(Exception):
    pass


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    knowledge_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.question or not self.answer:
            raise AgentError("question and answer must be non-empty")
        if not self.question.endswith("?"):
            raise AgentError(f"question must end with '?': {self.question!r}")


def parse_qa_output(text: str, knowledge_ids: Sequence[str] = ()) -> Optional[QAPair]:
    """Parse generator output into a QAPair.

    Accepts "Q:"/"A:" or "Question:"/"Answer:" markers, possibly on one
    line. Returns None when no well-formed pair is found.
    """
    question = answer = None
    normalized = text.replace("Question:", "Q:").replace("Answer:", "A:")
    # Split on markers so "Q: ...? A: ..." on one line works too.
    parts = normalized.replace("A:", "\nA:").replace("Q:", "\nQ:").splitlines()
    for part in parts:
        part = part.strip()
        if part.startswith("Q:"):
            question = part[2:].strip()
        elif part.startswith("A:"):
            answer = part[2:].strip()
    if not question or not answer:
        return None
    if not question.endswith("?"):
        question += "?"
    return QAPair(question, answer, tuple(knowledge_ids))


def augment_qa(
    sentence: str,
    knowledge: Sequence[tuple[str, str]],
    text_generator: TextGenerator,
    k: int = defaults.AUGMENT_K,
) -> list[QAPair]:
    """One generator call per knowledge statement (up to k), using the fixed
    QA prompt template. Unparseable outputs are dropped."""
    from .prompts import render_qa_prompt

    if not knowledge:
        raise AgentError("augment_qa requires a non-empty knowledge list")
    pairs = []
    for stmt_id, stmt_text in list(knowledge)[:k]:
        prompt = render_qa_prompt(sentence, stmt_text)
        try:
            raw = text_generator.generate(prompt)
        except Exception as exc:
            raise BackendError("qa-augmentation", f"generator failed on prompt: {prompt!r}: {exc}") from exc
        qa = parse_qa_output(raw, (stmt_id,))
        if qa is not None:
            pairs.append(qa)
    return pairs


@dataclass
class FeatureSpec:
    """Feature map for (state, action): one-hot knowledge slot, one-hot
    template, plus the retrieval score of the chosen knowledge."""

    n_knowledge_slots: int
    n_templates: int = len(QA_TEMPLATES)

    @property
    def dim(self) -> int:
        return self.n_knowledge_slots + self.n_templates + 1

    def features(self, scores: Sequence[float]) -> np.ndarray:
        """Feature matrix for all actions over `scores` knowledge candidates,
        row order: (slot 0, tmpl 0), (slot 0, tmpl 1), ..."""
        K = min(len(scores), self.n_knowledge_slots)
        if K == 0:
            raise AgentError("no candidate knowledge")
        rows = []
        for i in range(K):
            for t in range(self.n_templates):
                phi = np.zeros(self.dim)
                phi[i] = 1.0
                phi[self.n_knowledge_slots + t] = 1.0
                phi[-1] = scores[i]
                rows.append(phi)
        return np.array(rows)

    def decode(self, action_index: int) -> tuple[int, int]:
        return divmod(action_index, self.n_templates)

    def to_json(self) -> dict:
        return {"n_knowledge_slots": self.n_knowledge_slots, "n_templates": self.n_templates}

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSpec":
        return cls(obj["n_knowledge_slots"], obj["n_templates"])


@dataclass
class PolicySnapshot:
    theta: np.ndarray
    feature_spec: FeatureSpec

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.feature_spec.dim,):
            raise AgentError(
                f"theta dimension {self.theta.shape} does not match feature spec dim {self.feature_spec.dim}"
            )
        if not np.all(np.isfinite(self.theta)):
            raise AgentError("non-finite policy parameters")

    @classmethod
    def zeros(cls, feature_spec: FeatureSpec) -> "PolicySnapshot":
        return cls(np.zeros(feature_spec.dim), feature_spec)

    def distribution(self, features: np.ndarray) -> np.ndarray:
        logits = features @ self.theta
        logits = logits - logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def save(self, path: str | Path) -> None:
        blob = {
            "version": POLICY_FORMAT_VERSION,
            "theta": self.theta.tolist(),
            "feature_spec": self.feature_spec.to_json(),
        }
        Path(path).write_text(json.dumps(blob, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PolicySnapshot":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        if blob.get("version") != POLICY_FORMAT_VERSION:
            raise AgentError(f"unsupported policy version {blob.get('version')}")
        return cls(np.array(blob["theta"]), FeatureSpec.from_json(blob["feature_spec"]))


@dataclass
class Trajectory:
    """One episode: candidate action features, the chosen action, and the
    terminal reward. `advantage` is filled in by the baseline."""

    features: np.ndarray  # (A, D)
    action_index: int
    logprob_old: float
    reward: float
    advantage: float = 0.0
    knowledge_id: str = ""
    qa: Optional[QAPair] = None
    enhanced_text: str = ""

    def __post_init__(self):
        if self.logprob_old > 1e-12:
            raise AgentError(f"log-probability must be <= 0, got {self.logprob_old}")
        if not -1.0 - 1e-9 <= self.reward <= 1.0 + 1e-9:
            raise AgentError(f"reward must lie in [-1, 1], got {self.reward}")


def act(policy: PolicySnapshot, features: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    """Sample an action from softmax(theta . phi); returns (index, logprob)."""
    if features.shape[0] < 1:
        raise AgentError("need at least one candidate action")
    p = policy.distribution(features)
    action = int(rng.choice(len(p), p=p))
    return action, float(np.log(p[action]))


@dataclass
class RewardBaseline:
    """Exponential moving average of batch-mean rewards."""

    decay: float = defaults.BASELINE_DECAY
    value: Optional[float] = None

    def advantages(self, rewards: Sequence[float]) -> np.ndarray:
        rewards = np.asarray(rewards, dtype=np.float64)
        base = self.value if self.value is not None else float(rewards.mean())
        adv = rewards - base
        self.value = (
            self.decay * base + (1 - self.decay) * float(rewards.mean())
            if self.value is not None
            else float(rewards.mean())
        )
        return adv


def rollout(
    policy: PolicySnapshot,
    text: str,
    image_embedding: np.ndarray,
    index: KnowledgeIndex,
    pool_texts: dict[str, tuple[str, str]],
    embedder: Embedder,
    text_generator: TextGenerator,
    image_generator: ImageGenerator,
    rng: np.random.Generator,
) -> Trajectory:
    """Run one full episode of the reward chain.

    pool_texts maps statement id -> (head_entity, text). The reward is the
    cosine between the original and the regenerated image embedding,
    attached to the episode as a whole.
    """
    try:
        retrieved = retrieve_topk(
            text, image_embedding, index, embedder, k=policy.feature_spec.n_knowledge_slots
        )
    except Exception as exc:
        raise BackendError("retrieve", str(exc)) from exc
    if not retrieved:
        raise BackendError("retrieve", "no knowledge retrieved")

    features = policy.feature_spec.features([s for _, s in retrieved])
    action, logprob = act(policy, features, rng)
    slot, template_idx = policy.feature_spec.decode(action)
    stmt_id, _ = retrieved[slot]
    head, stmt_text = pool_texts[stmt_id]

    question = QA_TEMPLATES[template_idx].format(slot=head)
    qa = QAPair(question, stmt_text, (stmt_id,))

    try:
        enhanced = text_generator.generate(render_rewrite_prompt(text, qa.question, qa.answer))
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError("rewrite", str(exc)) from exc
    try:
        _, regen_embedding = image_generator.generate(enhanced)
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError("image-generation", str(exc)) from exc

    reward = cosine(image_embedding, regen_embedding)
    return Trajectory(
        features=features,
        action_index=action,
        logprob_old=logprob,
        reward=float(np.clip(reward, -1.0, 1.0)),
        knowledge_id=stmt_id,
        qa=qa,
        enhanced_text=enhanced,
    )


def _grad_logprob(policy: PolicySnapshot, features: np.ndarray, action: int) -> np.ndarray:
    p = policy.distribution(features)
    return features[action] - p @ features


def reinforce_update(
    policy: PolicySnapshot,
    trajectories: Sequence[Trajectory],
    learning_rate: float,
    baseline: RewardBaseline,
) -> PolicySnapshot:
    """theta += lr * mean[(R - baseline) * grad log pi(a|s)]."""
    if not trajectories:
        raise AgentError("need at least one trajectory")
    advantages = baseline.advantages([t.reward for t in trajectories])
    grad = np.zeros_like(policy.theta)
    for traj, adv in zip(trajectories, advantages):
        traj.advantage = float(adv)
        grad += adv * _grad_logprob(policy, traj.features, traj.action_index)
    grad /= len(trajectories)
    if not np.all(np.isfinite(grad)):
        raise AgentError("non-finite REINFORCE gradient")
    return PolicySnapshot(policy.theta + learning_rate * grad, policy.feature_spec)


def ppo_objective_term(ratio: float, advantage: float, epsilon: float = defaults.PPO_CLIP_EPSILON) -> float:
    """Per-sample clipped surrogate: min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    return min(ratio * advantage, float(np.clip(ratio, 1 - epsilon, 1 + epsilon)) * advantage)


@dataclass
class PPOResult:
    policy: PolicySnapshot
    first_epoch_ratios: list[float] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)


def ppo_update(
    policy: PolicySnapshot,
    trajectories: Sequence[Trajectory],
    epsilon: float = defaults.PPO_CLIP_EPSILON,
    epochs: int = 4,
    learning_rate: float = 0.5,
) -> PPOResult:
    """Several epochs of gradient ascent on the clipped surrogate over one
    batch. Trajectories must carry logprob_old and advantage."""
    if not trajectories:
        raise AgentError("need at least one trajectory")
    current = policy
    result = PPOResult(policy=policy)
    for epoch in range(epochs):
        grad = np.zeros_like(current.theta)
        objective = 0.0
        for traj in trajectories:
            p = current.distribution(traj.features)
            logprob_new = float(np.log(p[traj.action_index]))
            ratio = float(np.exp(logprob_new - traj.logprob_old))
            if epoch == 0:
                result.first_epoch_ratios.append(ratio)
            objective += ppo_objective_term(ratio, traj.advantage, epsilon)
            clipped = float(np.clip(ratio, 1 - epsilon, 1 + epsilon)) * traj.advantage
            if ratio * traj.advantage <= clipped:
                # Unclipped branch active: gradient flows.
                grad += traj.advantage * ratio * _grad_logprob(current, traj.features, traj.action_index)
        grad /= len(trajectories)
        if not np.all(np.isfinite(grad)):
            raise AgentError("non-finite PPO gradient")
        result.objective_trace.append(objective / len(trajectories))
        current = PolicySnapshot(current.theta + learning_rate * grad, current.feature_spec)
    result.policy = current
    return result


def supervised_warmstart(
    policy: PolicySnapshot,
    labeled: Sequence[tuple[np.ndarray, int]],
    learning_rate: float = 0.5,
    steps: int = 100,
) -> PolicySnapshot:
    """Full-batch cross-entropy on gold action choices."""
    if not labeled:
        raise AgentError("need at least one labeled example")
    for features, gold in labeled:
        if not 0 <= gold < features.shape[0]:
            raise AgentError(f"gold action {gold} out of range for {features.shape[0]} actions")
    theta = policy.theta.copy()
    for _ in range(steps):
        current = PolicySnapshot(theta, policy.feature_spec)
        grad = np.zeros_like(theta)
        for features, gold in labeled:
            grad += _grad_logprob(current, features, gold)
        theta = theta + learning_rate * grad / len(labeled)
    return PolicySnapshot(theta, policy.feature_spec)
