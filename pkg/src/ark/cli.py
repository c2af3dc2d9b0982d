"""`ark` command-line umbrella.

Offline subcommands (ingest, build-index, train-clip, train-rl, retrieve,
emit) operate on local artifact files; `serve` starts the REST gateway, and
`generate` is a thin client that can talk to a running gateway or spin up an
in-process one.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import defaults
from .backends import MockEmbedder, MockImageGenerator
from .contrastive import LossWeights, TrainConfig, train, write_trace_csv
from .gateway.mockclients import PipelineMockTextGenerator
from .gateway.sessions import GatewayConfig, Pipeline, SessionStore, bootstrap_demo_artifacts
from .index import KnowledgeIndex, build_index
from .ingest import KnowledgePool, build_pool, read_tsv_entities, read_tsv_triples
from .retrieval import retrieve_topk
from .rl import (
    FeatureSpec,
    PolicySnapshot,
    RewardBaseline,
    ppo_update,
    reinforce_update,
    rollout,
)
from .scene import SceneSpec, emit_engine_code


def load_kv_or_json_config(path: str) -> dict:
    """Config files are JSON or key=value lines."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    config = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        try:
            config[key.strip()] = json.loads(value.strip())
        except json.JSONDecodeError:
            config[key.strip()] = value.strip()
    return config


@click.group()
def main():
    """Knowledge-memory agent pipeline."""


@main.command()
@click.option("--wikidata", type=click.Path(exists=True), help="TSV: entity<TAB>description")
@click.option("--conceptnet", type=click.Path(exists=True), help="TSV: head<TAB>relation<TAB>tail")
@click.option("--out", required=True, type=click.Path())
@click.option("--no-language-filter", is_flag=True, default=False)
def ingest(wikidata, conceptnet, out, no_language_filter):
    """Parse raw knowledge sources into a deduplicated pool (JSONL)."""
    if not wikidata and not conceptnet:
        raise click.UsageError("provide at least one of --wikidata / --conceptnet")
    pool = build_pool(
        entity_records=read_tsv_entities(wikidata) if wikidata else (),
        triples=read_tsv_triples(conceptnet) if conceptnet else (),
        language_filter=not no_language_filter,
    )
    pool.save_jsonl(out)
    click.echo(f"wrote {len(pool)} statements to {out} (sources: {pool.source_manifest})")
    r = pool.rejects
    if r.empty_fields or r.non_english or r.duplicates:
        click.echo(
            f"rejected: {r.empty_fields} empty, {r.non_english} non-english, {r.duplicates} duplicates"
        )


@main.command("build-index")
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--dim", default=defaults.EMBED_DIM, show_default=True)
@click.option("--seed", default=0, show_default=True)
def build_index_cmd(pool_path, out, dim, seed):
    """Embed a pool with the mock embedder and build the exact index."""
    pool = KnowledgePool.load_jsonl(pool_path)
    embedder = MockEmbedder(dim=dim, seed=seed)
    index = build_index([(s.id, embedder.embed(s.text)) for s in pool.statements])
    index.save(out)
    click.echo(f"indexed {len(index)} statements (d={index.dim}) -> {out}")


@main.command("train-clip")
@click.option("--data", required=True, type=click.Path(exists=True), help=".npz with image_base, text_base")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--trace", "trace_path", type=click.Path())
def train_clip(data, index_path, config_path, out, trace_path):
    """Train the image/text projection heads with the contrastive objective."""
    arrays = np.load(data)
    index = KnowledgeIndex.load(index_path)
    raw = load_kv_or_json_config(config_path) if config_path else {}
    weights = LossWeights(*raw.pop("weights", defaults.LOSS_WEIGHTS))
    config = TrainConfig(weights=weights, **raw)
    heads, trace = train(arrays["image_base"], arrays["text_base"], index, config)
    np.savez(out, W_img=heads.W_img, W_txt=heads.W_txt)
    if trace_path:
        write_trace_csv(trace, trace_path)
    click.echo(f"trained {config.steps} steps; final loss {trace[-1].total:.4f} -> {out}")


@main.command("train-rl")
@click.option("--algo", type=click.Choice(["reinforce", "ppo"]), default="ppo", show_default=True)
@click.option("--episodes", default=200, show_default=True)
@click.option("--batch", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--clients", type=click.Choice(["mock"]), default="mock", show_default=True)
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--texts", "texts_path", type=click.Path(exists=True), help="one training sentence per line")
@click.option("--out", required=True, type=click.Path())
def train_rl(algo, episodes, batch, seed, clients, index_path, pool_path, texts_path, out):
    """Train the QA-selection policy against the mock reward chain."""
    index = KnowledgeIndex.load(index_path)
    pool = KnowledgePool.load_jsonl(pool_path)
    pool_texts = {s.id: (s.head_entity, s.text) for s in pool.statements}
    if texts_path:
        texts = [l for l in Path(texts_path).read_text(encoding="utf-8").splitlines() if l.strip()]
    else:
        texts = [s.text for s in pool.statements]
    embedder = MockEmbedder(dim=index.dim, seed=seed)
    text_generator = PipelineMockTextGenerator()
    image_generator = MockImageGenerator(embedder)
    rng = np.random.default_rng(seed)

    policy = PolicySnapshot.zeros(FeatureSpec(n_knowledge_slots=min(5, len(index))))
    baseline = RewardBaseline()
    for update in range(episodes):
        trajectories = []
        for _ in range(batch):
            text = texts[int(rng.integers(len(texts)))]
            trajectories.append(
                rollout(policy, text, embedder.embed(text), index, pool_texts,
                        embedder, text_generator, image_generator, rng)
            )
        if algo == "reinforce":
            policy = reinforce_update(policy, trajectories, learning_rate=0.5, baseline=baseline)
        else:
            advantages = baseline.advantages([t.reward for t in trajectories])
            for traj, adv in zip(trajectories, advantages):
                traj.advantage = float(adv)
            policy = ppo_update(policy, trajectories).policy
        if (update + 1) % 50 == 0:
            mean_r = float(np.mean([t.reward for t in trajectories]))
            click.echo(f"update {update + 1}/{episodes}: mean reward {mean_r:.4f}")
    policy.save(out)
    click.echo(f"saved policy -> {out}")


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--text", required=True)
@click.option("--image-emb", "image_emb_path", type=click.Path(exists=True), help=".npy visual embedding")
@click.option("--k", default=defaults.RETRIEVE_TOP_K, show_default=True)
@click.option("--alpha", default=defaults.ALPHA, show_default=True)
@click.option("--seed", default=0, show_default=True)
def retrieve(index_path, text, image_emb_path, k, alpha, seed):
    """Retrieve top-k knowledge for a text (and optional visual embedding)."""
    index = KnowledgeIndex.load(index_path)
    embedder = MockEmbedder(dim=index.dim, seed=seed)
    visual = np.load(image_emb_path) if image_emb_path else embedder.embed(text)
    results = retrieve_topk(text, visual, index, embedder, k=k, alpha=alpha)
    click.echo(json.dumps([{"id": i, "score": s} for i, s in results], indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--demo-dir", type=click.Path(), help="bootstrap demo artifacts here instead of --config")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(config_path, demo_dir, host, port):
    """Start the REST gateway."""
    import uvicorn

    from .gateway.service import create_app

    if config_path:
        config = GatewayConfig.from_file(config_path)
    elif demo_dir:
        config = bootstrap_demo_artifacts(demo_dir)
    else:
        raise click.UsageError("provide --config or --demo-dir")
    uvicorn.run(create_app(config), host=host, port=port)


@main.command()
@click.option("--text", required=True, multiple=True, help="user turn; repeat for a multi-turn session")
@click.option("--url", help="base URL of a running gateway; default runs in-process")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--demo-dir", type=click.Path())
@click.option("--out-scene", type=click.Path(), help="write the final scene JSON here")
def generate(text, url, config_path, demo_dir, out_scene):
    """Run a scene-generation session: one turn per --text."""
    if url:
        import httpx

        sid = httpx.post(f"{url}/sessions", json={}).json()["session_id"]
        for t in text:
            record = httpx.post(f"{url}/sessions/{sid}/turns", json={"user_text": t}).json()
            click.echo(json.dumps(record, indent=2))
        scene = httpx.get(f"{url}/sessions/{sid}/scene").json()
    else:
        if config_path:
            config = GatewayConfig.from_file(config_path)
        elif demo_dir:
            config = bootstrap_demo_artifacts(demo_dir)
        else:
            raise click.UsageError("provide --url, --config, or --demo-dir")
        store = SessionStore(Pipeline(config))
        sid = store.create_session()
        for t in text:
            record = store.submit_turn(sid, t)
            click.echo(json.dumps(record.to_json(), indent=2))
        scene = store.get_scene(sid).to_json()
    if out_scene:
        Path(out_scene).write_text(json.dumps(scene, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        click.echo(f"wrote scene -> {out_scene}")
    else:
        click.echo(json.dumps(scene, indent=2))


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--backend", type=click.Choice(["generic", "unity-csharp"]), default="generic", show_default=True)
def emit(scene_path, backend):
    """Emit engine code for a stored scene."""
    scene = SceneSpec.load(scene_path)
    sys.stdout.write(emit_engine_code(scene, backend=backend))


if __name__ == "__main__":
    main()
