"""Scene composition: the line-oriented scene DSL, prompt-scored asset
selection, LLM-driven generation/editing, behavior-cloned edit policy, and
engine-code emission.

DSL grammar (authoritative for everything a text backend emits):

    OBJECT <label> POS x y z ROT rx ry rz SCALE sx sy sz

edit commands:

    ADD <label> POS x y z [ROT rx ry rz] [SCALE sx sy sz]
    REMOVE <label-or-asset-id>
    MOVE <label-or-asset-id> POS x y z
    REPLACE <label-or-asset-id> WITH <new-label>

Positions are meters, rotations Euler degrees, right-handed Y-up.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import defaults
from .backends import Embedder, TextGenerator
from .index import cosine

ASSET_PROMPT = "This is an image of {label} that refers to {text}"

EDIT_VERBS = ("AddObject", "RemoveObject", "MoveObject", "ReplaceObject")


class SceneError(Exception):
    pass


class DslParseError(SceneError):
    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class EmptyScene(SceneError):
    pass


class DuplicateId(SceneError):
    pass


class UnknownObject(SceneError):
    pass


def _vec3(values: Sequence[float], name: str) -> tuple[float, float, float]:
    vals = tuple(float(v) for v in values)
    if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
        raise SceneError(f"{name} must be a finite 3-vector, got {values!r}")
    return vals


@dataclass(frozen=True)
class SceneObject:
    asset_id: str
    label: str
    position: tuple[float, float, float]
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not self.label:
            raise SceneError("object label must be non-empty")
        if not self.asset_id or any(c.isspace() for c in self.asset_id):
            raise SceneError(f"asset id must be non-empty without whitespace: {self.asset_id!r}")
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "rotation", _vec3(self.rotation, "rotation"))
        object.__setattr__(self, "scale", _vec3(self.scale, "scale"))
        if any(s <= 0 for s in self.scale):
            raise SceneError(f"scale components must be > 0: {self.scale}")

    def to_json(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "label": self.label,
            "position": list(self.position),
            "rotation": list(self.rotation),
            "scale": list(self.scale),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneObject":
        return cls(
            obj["asset_id"],
            obj["label"],
            tuple(obj["position"]),
            tuple(obj["rotation"]),
            tuple(obj["scale"]),
        )


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple[SceneObject, ...] = ()
    environment: dict[str, str] = field(default_factory=dict)
    revision: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.asset_id for o in self.objects]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise DuplicateId(f"duplicate asset ids in scene: {sorted(dupes)}")

    def to_json(self) -> dict:
        return {
            "objects": [o.to_json() for o in self.objects],
            "environment": dict(self.environment),
            "revision": self.revision,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneSpec":
        return cls(
            tuple(SceneObject.from_json(o) for o in obj["objects"]),
            dict(obj.get("environment", {})),
            int(obj.get("revision", 0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SceneSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class AssetCandidate:
    asset_id: str
    label: str
    image_embedding: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "image_embedding", np.asarray(self.image_embedding, dtype=np.float64))


def select_asset(candidates: Sequence[AssetCandidate], text: str, embedder: Embedder) -> str:
    """Score each candidate by the cosine between its image embedding and the
    embedding of the filled asset prompt; argmax, ties by ascending id."""
    if not candidates:
        raise SceneError("no asset candidates")
    best: Optional[tuple[float, str]] = None
    for cand in candidates:
        prompt = ASSET_PROMPT.format(label=cand.label, text=text)
        score = cosine(cand.image_embedding, embedder.embed(prompt))
        key = (-score, cand.asset_id)
        if best is None or key < best:
            best = key
    return best[1]


# --- DSL parsing -----------------------------------------------------------

_SECTION_KEYS = ("POS", "ROT", "SCALE", "WITH")


def _split_fields(tokens: list[str], line: str) -> tuple[list[str], dict[str, list[str]]]:
    """Split a token stream into the leading name tokens and KEY-prefixed
    sections. Labels may contain spaces; section keys may not recur."""
    head: list[str] = []
    sections: dict[str, list[str]] = {}
    current: Optional[str] = None
    for tok in tokens:
        if tok.upper() in _SECTION_KEYS:
            key = tok.upper()
            if key in sections:
                raise DslParseError(f"duplicate {key} section", line)
            sections[key] = []
            current = key
        elif current is None:
            head.append(tok)
        else:
            sections[current].append(tok)
    return head, sections


def _floats3(section: list[str], key: str, line: str) -> tuple[float, float, float]:
    if len(section) != 3:
        raise DslParseError(f"{key} needs exactly 3 numbers", line)
    try:
        return tuple(float(v) for v in section)
    except ValueError as exc:
        raise DslParseError(f"bad number in {key}: {exc}", line) from exc


@dataclass(frozen=True)
class ParsedObject:
    label: str
    position: tuple[float, float, float]
    rotation: tuple[float, float, float]
    scale: tuple[float, float, float]


def parse_scene_dsl(text: str) -> list[ParsedObject]:
    """Parse OBJECT lines. Blank lines and non-command prose are rejected so
    malformed model output fails loudly."""
    objects = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0].upper() != "OBJECT":
            raise DslParseError(f"expected OBJECT command, got: {line!r}", text)
        head, sections = _split_fields(tokens[1:], line)
        if not head:
            raise DslParseError("OBJECT needs a label", line)
        if "POS" not in sections:
            raise DslParseError("OBJECT needs a POS section", line)
        objects.append(
            ParsedObject(
                label=" ".join(head),
                position=_floats3(sections["POS"], "POS", line),
                rotation=_floats3(sections["ROT"], "ROT", line) if "ROT" in sections else (0.0, 0.0, 0.0),
                scale=_floats3(sections["SCALE"], "SCALE", line) if "SCALE" in sections else (1.0, 1.0, 1.0),
            )
        )
    return objects


@dataclass(frozen=True)
class EditCommand:
    verb: str  # ADD | REMOVE | MOVE | REPLACE
    target: str
    position: Optional[tuple[float, float, float]] = None
    rotation: Optional[tuple[float, float, float]] = None
    scale: Optional[tuple[float, float, float]] = None
    replacement: Optional[str] = None


def parse_edit_dsl(text: str) -> list[EditCommand]:
    commands = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        verb = tokens[0].upper()
        head, sections = _split_fields(tokens[1:], line)
        target = " ".join(head)
        if not target:
            raise DslParseError(f"{verb} needs a target", line)
        if verb == "ADD":
            if "POS" not in sections:
                raise DslParseError("ADD needs a POS section", line)
            commands.append(
                EditCommand(
                    "ADD",
                    target,
                    position=_floats3(sections["POS"], "POS", line),
                    rotation=_floats3(sections["ROT"], "ROT", line) if "ROT" in sections else None,
                    scale=_floats3(sections["SCALE"], "SCALE", line) if "SCALE" in sections else None,
                )
            )
        elif verb == "REMOVE":
            commands.append(EditCommand("REMOVE", target))
        elif verb == "MOVE":
            if "POS" not in sections:
                raise DslParseError("MOVE needs a POS section", line)
            commands.append(EditCommand("MOVE", target, position=_floats3(sections["POS"], "POS", line)))
        elif verb == "REPLACE":
            if "WITH" not in sections or not sections["WITH"]:
                raise DslParseError("REPLACE needs a WITH section", line)
            commands.append(EditCommand("REPLACE", target, replacement=" ".join(sections["WITH"])))
        else:
            raise DslParseError(f"unknown edit verb {verb!r}", line)
    return commands


def _slug(label: str) -> str:
    return "-".join(label.lower().split())


def _resolve_asset(
    label: str,
    text: str,
    catalog: Optional[Sequence[AssetCandidate]],
    embedder: Optional[Embedder],
    used: Optional[set[str]] = None,
) -> str:
    if catalog and embedder is not None:
        matching = [c for c in catalog if c.label.lower() == label.lower()] or list(catalog)
        asset_id = select_asset(matching, text, embedder)
    else:
        asset_id = _slug(label)
    if used is not None:
        # Two distinct labels can score best against the same catalog asset;
        # fall back to the label slug before declaring a conflict.
        if asset_id in used and asset_id != _slug(label):
            asset_id = _slug(label)
        if asset_id in used:
            raise DuplicateId(f"duplicate asset id {asset_id!r} for label {label!r}")
        used.add(asset_id)
    return asset_id


def generate_scene(
    enhanced_text: str,
    text_generator: TextGenerator,
    asset_catalog: Optional[Sequence[AssetCandidate]] = None,
    embedder: Optional[Embedder] = None,
) -> SceneSpec:
    """Prompt the text backend for a fresh scene, parse and validate the DSL,
    and resolve labels to catalog assets. Revision starts at 0."""
    from .prompts import render_scene_prompt

    raw = text_generator.generate(render_scene_prompt(enhanced_text))
    if not raw.strip():
        raise EmptyScene("scene generator returned empty output")
    parsed = parse_scene_dsl(raw)
    if not parsed:
        raise EmptyScene("scene generator produced no objects")
    used: set[str] = set()
    objects = [
        SceneObject(
            asset_id=_resolve_asset(p.label, enhanced_text, asset_catalog, embedder, used),
            label=p.label,
            position=p.position,
            rotation=p.rotation,
            scale=p.scale,
        )
        for p in parsed
    ]
    return SceneSpec(tuple(objects), {}, revision=0)


def _find_object(objects: Sequence[SceneObject], target: str) -> int:
    for i, obj in enumerate(objects):
        if obj.asset_id == target or obj.label.lower() == target.lower():
            return i
    raise UnknownObject(f"no object matching {target!r}")


def apply_commands(scene: SceneSpec, commands: Sequence[EditCommand], instruction: str = "",
                   catalog: Optional[Sequence[AssetCandidate]] = None,
                   embedder: Optional[Embedder] = None) -> SceneSpec:
    """Apply an edit-command list transactionally; any failure leaves the
    input scene untouched (scenes are immutable values anyway)."""
    objects = list(scene.objects)
    used = {o.asset_id for o in objects}
    for cmd in commands:
        if cmd.verb == "ADD":
            objects.append(
                SceneObject(
                    asset_id=_resolve_asset(cmd.target, instruction, catalog, embedder, used),
                    label=cmd.target,
                    position=cmd.position,
                    rotation=cmd.rotation or (0.0, 0.0, 0.0),
                    scale=cmd.scale or (1.0, 1.0, 1.0),
                )
            )
        elif cmd.verb == "REMOVE":
            i = _find_object(objects, cmd.target)
            used.discard(objects[i].asset_id)
            del objects[i]
        elif cmd.verb == "MOVE":
            i = _find_object(objects, cmd.target)
            objects[i] = replace(objects[i], position=cmd.position)
        elif cmd.verb == "REPLACE":
            i = _find_object(objects, cmd.target)
            used.discard(objects[i].asset_id)
            objects[i] = replace(
                objects[i],
                label=cmd.replacement,
                asset_id=_resolve_asset(cmd.replacement, instruction, catalog, embedder, used),
            )
    return SceneSpec(tuple(objects), dict(scene.environment), revision=scene.revision + 1)


def apply_edit(
    scene: SceneSpec,
    instruction: str,
    text_generator: TextGenerator,
    catalog: Optional[Sequence[AssetCandidate]] = None,
    embedder: Optional[Embedder] = None,
) -> SceneSpec:
    """One dialogue edit: prompt with the serialized scene plus instruction,
    parse the returned diff, and apply it. Revision advances by exactly 1
    even for an empty diff."""
    from .prompts import render_scene_prompt

    context = json.dumps(scene.to_json(), sort_keys=True)
    raw = text_generator.generate(render_scene_prompt(instruction, scene_context=context))
    commands = parse_edit_dsl(raw)
    return apply_commands(scene, commands, instruction, catalog, embedder)


# --- Behavior cloning ------------------------------------------------------


@dataclass(frozen=True)
class EditAction:
    verb: str  # one of EDIT_VERBS
    target: str = ""
    position: Optional[tuple[float, float, float]] = None
    replacement: str = ""

    def __post_init__(self):
        if self.verb not in EDIT_VERBS:
            raise SceneError(f"unknown edit action verb {self.verb!r}")
        if self.position is not None:
            # Snap onto the configured grid so the action space stays finite.
            snapped = tuple(round(v / defaults.EDIT_GRID) * defaults.EDIT_GRID for v in self.position)
            object.__setattr__(self, "position", snapped)


@dataclass(frozen=True)
class EditDemo:
    scene: SceneSpec
    instruction: str
    action: EditAction


def _instruction_bucket(instruction: str, n_buckets: int) -> int:
    digest = hashlib.sha256(instruction.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") % n_buckets


def encode_demos(
    demos: Sequence[EditDemo], n_buckets: int = 32
) -> tuple[list[tuple[np.ndarray, int]], list[EditAction]]:
    """Tabular featurization: instruction hash bucket x action one-hot.

    Returns (encoded training set, action vocabulary). Each encoded item is
    the per-state feature matrix over the full action vocabulary plus the
    gold action index.
    """
    actions = sorted({d.action for d in demos}, key=repr)
    action_index = {a: i for i, a in enumerate(actions)}
    n_actions = len(actions)
    dim = n_buckets * n_actions
    encoded = []
    for demo in demos:
        bucket = _instruction_bucket(demo.instruction, n_buckets)
        features = np.zeros((n_actions, dim))
        for a in range(n_actions):
            features[a, bucket * n_actions + a] = 1.0
        encoded.append((features, action_index[demo.action]))
    return encoded, actions


@dataclass
class BCPolicy:
    theta: np.ndarray
    actions: list[EditAction]

    def distribution(self, features: np.ndarray) -> np.ndarray:
        logits = features @ self.theta
        logits = logits - logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def best_action(self, features: np.ndarray) -> int:
        return int(np.argmax(self.distribution(features)))


def bc_train(
    encoded: Sequence[tuple[np.ndarray, int]],
    actions: list[EditAction],
    learning_rate: float = 0.5,
    steps: int = 500,
) -> tuple[BCPolicy, list[float]]:
    """Full-batch gradient ascent on mean log-likelihood of the expert
    actions. Returns the policy and the per-step log-likelihood trace."""
    if not encoded:
        raise SceneError("need at least one demonstration")
    dim = encoded[0][0].shape[1]
    theta = np.zeros(dim)
    trace: list[float] = []
    for _ in range(steps):
        grad = np.zeros(dim)
        ll = 0.0
        for features, gold in encoded:
            logits = features @ theta
            logits = logits - logits.max()
            p = np.exp(logits)
            p = p / p.sum()
            ll += float(np.log(p[gold]))
            grad += features[gold] - p @ features
        ll /= len(encoded)
        if not math.isfinite(ll):
            raise SceneError("non-finite behavior-cloning loss")
        trace.append(ll)
        theta = theta + learning_rate * grad / len(encoded)
    return BCPolicy(theta, actions), trace


# --- Engine code emission --------------------------------------------------


def emit_engine_code(scene: SceneSpec, backend: str = "generic") -> str:
    """Emit instantiation code for the scene.

    The generic backend is parseable back into an identical SceneSpec; the
    unity-csharp backend is a one-way C# snippet.
    """
    if backend == "generic":
        lines = [f"SCENE REVISION {scene.revision}"]
        for key in sorted(scene.environment):
            lines.append(f"ENV {json.dumps(key)} {json.dumps(scene.environment[key])}")
        for obj in scene.objects:
            lines.append(
                f"INSTANTIATE {obj.asset_id} LABEL {json.dumps(obj.label)} "
                f"POS {obj.position[0]!r} {obj.position[1]!r} {obj.position[2]!r} "
                f"ROT {obj.rotation[0]!r} {obj.rotation[1]!r} {obj.rotation[2]!r} "
                f"SCALE {obj.scale[0]!r} {obj.scale[1]!r} {obj.scale[2]!r}"
            )
        lines.append("END")
        return "\n".join(lines) + "\n"
    if backend == "unity-csharp":
        lines = [
            "// Auto-generated scene instantiation",
            "using UnityEngine;",
            "",
            "public class GeneratedScene : MonoBehaviour {",
            "    void Start() {",
        ]
        for obj in scene.objects:
            px, py, pz = obj.position
            rx, ry, rz = obj.rotation
            sx, sy, sz = obj.scale
            var = obj.asset_id.replace("-", "_")
            lines += [
                f'        var {var} = Instantiate(Resources.Load<GameObject>("{obj.asset_id}"),',
                f"            new Vector3({px}f, {py}f, {pz}f), Quaternion.Euler({rx}f, {ry}f, {rz}f));",
                f"        {var}.transform.localScale = new Vector3({sx}f, {sy}f, {sz}f);",
            ]
        lines += ["    }", "}", ""]
        return "\n".join(lines)
    raise SceneError(f"unknown emission backend {backend!r}")


def parse_engine_code(text: str) -> SceneSpec:
    """Parse generic-backend output back into a SceneSpec (round-trip
    inverse of emit_engine_code)."""
    revision = 0
    environment: dict[str, str] = {}
    objects: list[SceneObject] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line == "END":
            continue
        if line.startswith("SCENE REVISION "):
            revision = int(line.split()[-1])
        elif line.startswith("ENV "):
            body = line[4:]
            decoder = json.JSONDecoder()
            key, end = decoder.raw_decode(body)
            value, _ = decoder.raw_decode(body[end:].lstrip())
            environment[key] = value
        elif line.startswith("INSTANTIATE "):
            tokens = line.split(None, 2)
            asset_id = tokens[1]
            rest = tokens[2]
            if not rest.startswith("LABEL "):
                raise DslParseError("INSTANTIATE needs a LABEL section", line)
            decoder = json.JSONDecoder()
            label, end = decoder.raw_decode(rest[6:])
            nums = rest[6 + end :].split()
            if nums[0] != "POS" or nums[4] != "ROT" or nums[8] != "SCALE":
                raise DslParseError("malformed INSTANTIATE sections", line)
            objects.append(
                SceneObject(
                    asset_id,
                    label,
                    tuple(float(v) for v in nums[1:4]),
                    tuple(float(v) for v in nums[5:8]),
                    tuple(float(v) for v in nums[9:12]),
                )
            )
        else:
            raise DslParseError(f"unknown engine-code line: {line!r}", line)
    return SceneSpec(tuple(objects), environment, revision)
