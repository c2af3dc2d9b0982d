"""Session store and turn pipeline.

Each session lives in its own directory: an append-only memory.jsonl of turn
records, a scenes/ directory with one JSON file per revision, and a meta
file. Turn records and scenes are written before the call returns, so a
process restart reloads identical state. Within a session, turns are
strictly serialized; a concurrent submit gets a conflict error.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import defaults
from ..backends import BackendError, MockEmbedder, MockImageGenerator
from ..index import KnowledgeIndex
from ..ingest import KnowledgePool
from ..retrieval import retrieve_topk
from ..rl import FeatureSpec, PolicySnapshot, rollout
from ..scene import AssetCandidate, SceneSpec, apply_edit, generate_scene
from .mockclients import PipelineMockTextGenerator


class GatewayError(Exception):
    def __init__(self, stage: str, message: str, retriable: bool = False, status: int = 500):
        super().__init__(message)
        self.stage = stage
        self.message = message
        self.retriable = retriable
        self.status = status


@dataclass
class GatewayConfig:
    data_dir: Path
    index_path: Path
    pool_path: Path
    policy_path: Optional[Path] = None
    catalog_path: Optional[Path] = None
    mode: str = "mock"  # live backends only by explicit configuration
    seed: int = 0
    embed_dim: int = defaults.EMBED_DIM
    retrieve_k: int = defaults.RETRIEVE_TOP_K

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        self.index_path = Path(self.index_path)
        self.pool_path = Path(self.pool_path)
        if self.policy_path is not None:
            self.policy_path = Path(self.policy_path)
        if self.catalog_path is not None:
            self.catalog_path = Path(self.catalog_path)

    @classmethod
    def from_file(cls, path: str | Path) -> "GatewayConfig":
        """JSON config with ARK_* environment overrides."""
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        overrides = {
            "data_dir": os.environ.get("ARK_DATA_DIR"),
            "index_path": os.environ.get("ARK_INDEX_PATH"),
            "pool_path": os.environ.get("ARK_POOL_PATH"),
        }
        for key, value in overrides.items():
            if value:
                blob[key] = value
        return cls(**blob)


def load_catalog(path: str | Path) -> list[AssetCandidate]:
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    return [AssetCandidate(e["asset_id"], e["label"], np.array(e["embedding"])) for e in entries]


@dataclass
class TurnRecord:
    turn: int
    status: str  # "ok" | "failed"
    user_text: str
    retrieved_knowledge: list[tuple[str, float]] = field(default_factory=list)
    qa: Optional[dict] = None
    enhanced_text: str = ""
    scene_revision: int = -1
    stage: str = ""
    backend_identities: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "turn": self.turn,
            "status": self.status,
            "user_text": self.user_text,
            "retrieved_knowledge": [[i, s] for i, s in self.retrieved_knowledge],
            "qa": self.qa,
            "enhanced_text": self.enhanced_text,
            "scene_revision": self.scene_revision,
            "stage": self.stage,
            "backend_identities": self.backend_identities,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TurnRecord":
        return cls(
            turn=obj["turn"],
            status=obj["status"],
            user_text=obj["user_text"],
            retrieved_knowledge=[(i, s) for i, s in obj["retrieved_knowledge"]],
            qa=obj.get("qa"),
            enhanced_text=obj.get("enhanced_text", ""),
            scene_revision=obj.get("scene_revision", -1),
            stage=obj.get("stage", ""),
            backend_identities=obj.get("backend_identities", {}),
        )


class Pipeline:
    """Loaded artifacts plus backend clients; shared across sessions."""

    def __init__(self, config: GatewayConfig):
        missing = [p for p in (config.index_path, config.pool_path) if not Path(p).exists()]
        if config.policy_path and not config.policy_path.exists():
            missing.append(config.policy_path)
        if config.catalog_path and not config.catalog_path.exists():
            missing.append(config.catalog_path)
        if missing:
            raise GatewayError(
                "startup", f"missing artifacts: {', '.join(str(m) for m in missing)}", status=500
            )
        self.config = config
        self.index = KnowledgeIndex.load(config.index_path)
        self.pool = KnowledgePool.load_jsonl(config.pool_path)
        self.pool_texts = {s.id: (s.head_entity, s.text) for s in self.pool.statements}
        if config.policy_path:
            self.policy = PolicySnapshot.load(config.policy_path)
        else:
            self.policy = PolicySnapshot.zeros(FeatureSpec(n_knowledge_slots=min(5, len(self.index))))
        self.catalog = load_catalog(config.catalog_path) if config.catalog_path else None
        if config.mode != "mock":
            raise GatewayError("startup", f"unsupported gateway mode {config.mode!r}; configure live adapters explicitly")
        self.embedder = MockEmbedder(dim=self.index.dim, seed=config.seed)
        self.text_generator = PipelineMockTextGenerator()
        self.image_generator = MockImageGenerator(self.embedder)

    @property
    def backend_identities(self) -> dict[str, str]:
        return {
            "embedder": self.embedder.identity,
            "text-generator": self.text_generator.identity,
            "image-generator": self.image_generator.identity,
        }


class Session:
    def __init__(self, session_id: str, directory: Path, seed: int, created_at: float):
        self.session_id = session_id
        self.directory = directory
        self.seed = seed
        self.created_at = created_at
        self.turns: list[TurnRecord] = []
        self.lock = threading.Lock()

    @property
    def memory_path(self) -> Path:
        return self.directory / "memory.jsonl"

    @property
    def scenes_dir(self) -> Path:
        return self.directory / "scenes"

    def scene_path(self, revision: int) -> Path:
        return self.scenes_dir / f"rev-{revision:04d}.json"

    def latest_scene_revision(self) -> Optional[int]:
        revisions = sorted(int(p.stem.split("-")[1]) for p in self.scenes_dir.glob("rev-*.json"))
        return revisions[-1] if revisions else None

    def append_turn(self, record: TurnRecord) -> None:
        with open(self.memory_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
        self.turns.append(record)


class SessionStore:
    def __init__(self, pipeline: Pipeline):
        self.pipeline = pipeline
        self.base_dir = Path(pipeline.config.data_dir) / "sessions"
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()

    def create_session(self, session_id: Optional[str] = None) -> str:
        sid = session_id or uuid.uuid4().hex
        directory = self.base_dir / sid
        if directory.exists():
            raise GatewayError("create-session", f"session {sid} already exists", status=409)
        directory.mkdir(parents=True)
        (directory / "scenes").mkdir()
        session = Session(sid, directory, self.pipeline.config.seed, time.time())
        (directory / "session.json").write_text(
            json.dumps({"session_id": sid, "seed": session.seed, "created_at": session.created_at}) + "\n",
            encoding="utf-8",
        )
        session.memory_path.touch()
        with self._store_lock:
            self._sessions[sid] = session
        return sid

    def _load_session(self, sid: str) -> Session:
        directory = self.base_dir / sid
        meta_path = directory / "session.json"
        if not meta_path.exists():
            raise GatewayError("session", f"unknown session {sid}", status=404)
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        session = Session(sid, directory, meta["seed"], meta["created_at"])
        if session.memory_path.exists():
            for line in session.memory_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    session.turns.append(TurnRecord.from_json(json.loads(line)))
        return session

    def get_session(self, sid: str) -> Session:
        with self._store_lock:
            if sid not in self._sessions:
                self._sessions[sid] = self._load_session(sid)
            return self._sessions[sid]

    def get_memory(self, sid: str) -> list[TurnRecord]:
        return list(self.get_session(sid).turns)

    def get_scene(self, sid: str, revision: Optional[int] = None) -> SceneSpec:
        session = self.get_session(sid)
        if revision is None:
            revision = session.latest_scene_revision()
            if revision is None:
                raise GatewayError("scene", "no scene generated yet", status=404)
        path = session.scene_path(revision)
        if not path.exists():
            raise GatewayError("scene", f"unknown scene revision {revision}", status=404)
        return SceneSpec.load(path)

    def submit_turn(self, sid: str, user_text: str) -> TurnRecord:
        session = self.get_session(sid)
        if not session.lock.acquire(blocking=False):
            raise GatewayError("turn", "a turn is already in progress for this session", status=409)
        try:
            return self._run_turn(session, user_text)
        finally:
            session.lock.release()

    def _run_turn(self, session: Session, user_text: str) -> TurnRecord:
        pipe = self.pipeline
        turn_no = len(session.turns)
        rng = np.random.default_rng([pipe.config.seed, session_turn_seed(session.session_id), turn_no])
        record = TurnRecord(
            turn=turn_no,
            status="failed",
            user_text=user_text,
            backend_identities=pipe.backend_identities,
        )
        try:
            stage = "retrieve"
            visual = pipe.embedder.embed(user_text)
            record.retrieved_knowledge = retrieve_topk(
                user_text, visual, pipe.index, pipe.embedder, k=pipe.config.retrieve_k
            )
            stage = "agent"
            traj = rollout(
                pipe.policy,
                user_text,
                visual,
                pipe.index,
                pipe.pool_texts,
                pipe.embedder,
                pipe.text_generator,
                pipe.image_generator,
                rng,
            )
            record.qa = {
                "question": traj.qa.question,
                "answer": traj.qa.answer,
                "knowledge_ids": list(traj.qa.knowledge_ids),
            }
            record.enhanced_text = traj.enhanced_text
            stage = "scene"
            latest = session.latest_scene_revision()
            if latest is None:
                scene = generate_scene(traj.enhanced_text, pipe.text_generator, pipe.catalog, pipe.embedder)
            else:
                current = SceneSpec.load(session.scene_path(latest))
                scene = apply_edit(current, user_text, pipe.text_generator, pipe.catalog, pipe.embedder)
            scene.save(session.scene_path(scene.revision))
            record.scene_revision = scene.revision
            record.status = "ok"
            session.append_turn(record)
            return record
        except GatewayError:
            session.append_turn(record)
            raise
        except BackendError as exc:
            record.stage = exc.stage
            session.append_turn(record)
            raise GatewayError(exc.stage, str(exc), retriable=exc.retriable) from exc
        except Exception as exc:
            record.stage = stage
            session.append_turn(record)
            raise GatewayError(stage, str(exc)) from exc


def session_turn_seed(session_id: str) -> int:
    # Stable per-session component of the turn RNG seed. Deliberately not
    # hash(): that is salted per process.
    import hashlib

    return int.from_bytes(hashlib.sha256(session_id.encode()).digest()[:4], "little")


def bootstrap_demo_artifacts(directory: str | Path, seed: int = 0, dim: int = defaults.EMBED_DIM) -> GatewayConfig:
    """Build a small self-contained artifact set (pool, index, policy,
    catalog) so the service can run out of the box in mock mode."""
    from ..index import build_index
    from ..ingest import build_pool

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    embedder = MockEmbedder(dim=dim, seed=seed)

    pool = build_pool(
        entity_records=[
            ("computer", "general-purpose device for performing arithmetic or logical operations"),
            ("laptop", "portable personal computer"),
            ("cat", "small domesticated carnivorous mammal"),
            ("whiteboard", "glossy surface for non-permanent markings"),
            ("desk", "table used for work"),
            ("chair", "seat for one person with a back"),
            ("lamp", "device that produces light"),
            ("sofa", "long upholstered seat"),
        ],
        triples=[
            ("dog", "HasProperty", "friendly"),
            ("wheel", "PartOf", "car"),
            ("whiteboard", "AtLocation", "office"),
            ("chair", "UsedFor", "sitting"),
            ("lamp", "MadeOf", "metal"),
        ],
    )
    pool_path = directory / "pool.jsonl"
    pool.save_jsonl(pool_path)

    index = build_index([(s.id, embedder.embed(s.text)) for s in pool.statements])
    index_path = directory / "knowledge.idx"
    index.save(index_path)

    policy = PolicySnapshot.zeros(FeatureSpec(n_knowledge_slots=5))
    policy_path = directory / "policy.json"
    policy.save(policy_path)

    labels = ["computer", "laptop", "cat", "whiteboard", "desk", "chair", "lamp", "sofa"]
    catalog = [
        {"asset_id": f"asset-{label}", "label": label, "embedding": embedder.embed(f"asset {label}").tolist()}
        for label in labels
    ]
    catalog_path = directory / "catalog.json"
    catalog_path.write_text(json.dumps(catalog) + "\n", encoding="utf-8")

    return GatewayConfig(
        data_dir=directory / "data",
        index_path=index_path,
        pool_path=pool_path,
        policy_path=policy_path,
        catalog_path=catalog_path,
        seed=seed,
        embed_dim=dim,
    )
