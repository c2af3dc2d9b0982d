import json

import numpy as np
import pytest
from click.testing import CliRunner

from ark.cli import load_kv_or_json_config, main
from ark.index import KnowledgeIndex
from ark.ingest import KnowledgePool
from ark.rl import PolicySnapshot
from ark.scene import parse_engine_code


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def raw_sources(tmp_path):
    wikidata = tmp_path / "entities.tsv"
    wikidata.write_text(
        "computer\tgeneral-purpose device for performing operations\n"
        "cat\tsmall domesticated carnivorous mammal\n"
        "lamp\tdevice that produces light\n",
        encoding="utf-8",
    )
    conceptnet = tmp_path / "triples.tsv"
    conceptnet.write_text(
        "dog\tHasProperty\tfriendly\n"
        "wheel\tPartOf\tcar\n",
        encoding="utf-8",
    )
    return wikidata, conceptnet


class TestIngestAndIndex:
    def test_ingest_writes_pool(self, runner, raw_sources, tmp_path):
        wikidata, conceptnet = raw_sources
        out = tmp_path / "pool.jsonl"
        result = runner.invoke(
            main, ["ingest", "--wikidata", str(wikidata), "--conceptnet", str(conceptnet), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        pool = KnowledgePool.load_jsonl(out)
        assert len(pool) == 5
        assert "wrote 5 statements" in result.output

    def test_ingest_requires_a_source(self, runner, tmp_path):
        result = runner.invoke(main, ["ingest", "--out", str(tmp_path / "x.jsonl")])
        assert result.exit_code != 0

    def test_build_index_from_pool(self, runner, raw_sources, tmp_path):
        wikidata, conceptnet = raw_sources
        pool_path = tmp_path / "pool.jsonl"
        index_path = tmp_path / "knowledge.idx"
        runner.invoke(main, ["ingest", "--wikidata", str(wikidata), "--out", str(pool_path)])
        result = runner.invoke(
            main, ["build-index", "--pool", str(pool_path), "--out", str(index_path), "--dim", "32"]
        )
        assert result.exit_code == 0, result.output
        index = KnowledgeIndex.load(index_path)
        assert len(index) == 3
        assert index.dim == 32


class TestRetrieveCommand:
    def test_json_output_sorted(self, runner, raw_sources, tmp_path):
        wikidata, _ = raw_sources
        pool_path, index_path = tmp_path / "pool.jsonl", tmp_path / "k.idx"
        runner.invoke(main, ["ingest", "--wikidata", str(wikidata), "--out", str(pool_path)])
        runner.invoke(main, ["build-index", "--pool", str(pool_path), "--out", str(index_path), "--dim", "32"])
        result = runner.invoke(
            main, ["retrieve", "--index", str(index_path), "--text", "a cat next to a computer", "--k", "3"]
        )
        assert result.exit_code == 0, result.output
        rows = json.loads(result.output)
        assert len(rows) == 3
        scores = [r["score"] for r in rows]
        assert scores == sorted(scores, reverse=True)

    def test_visual_embedding_from_file(self, runner, raw_sources, tmp_path):
        wikidata, _ = raw_sources
        pool_path, index_path = tmp_path / "pool.jsonl", tmp_path / "k.idx"
        runner.invoke(main, ["ingest", "--wikidata", str(wikidata), "--out", str(pool_path)])
        runner.invoke(main, ["build-index", "--pool", str(pool_path), "--out", str(index_path), "--dim", "16"])
        emb_path = tmp_path / "visual.npy"
        rng = np.random.default_rng(0)
        np.save(emb_path, rng.standard_normal(16))
        result = runner.invoke(
            main,
            ["retrieve", "--index", str(index_path), "--text", "cat", "--image-emb", str(emb_path), "--k", "1"],
        )
        assert result.exit_code == 0, result.output
        assert len(json.loads(result.output)) == 1


class TestTrainClip:
    def test_trains_and_saves_heads(self, runner, raw_sources, tmp_path):
        wikidata, _ = raw_sources
        pool_path, index_path = tmp_path / "pool.jsonl", tmp_path / "k.idx"
        runner.invoke(main, ["ingest", "--wikidata", str(wikidata), "--out", str(pool_path)])
        runner.invoke(main, ["build-index", "--pool", str(pool_path), "--out", str(index_path), "--dim", "16"])
        rng = np.random.default_rng(0)
        data_path = tmp_path / "pairs.npz"
        np.savez(data_path, image_base=rng.standard_normal((12, 16)), text_base=rng.standard_normal((12, 16)))
        config_path = tmp_path / "train.cfg"
        config_path.write_text("steps = 5\nbatch_size = 6\nseed = 0\n")
        out_path = tmp_path / "heads.npz"
        trace_path = tmp_path / "trace.csv"
        result = runner.invoke(
            main,
            ["train-clip", "--data", str(data_path), "--index", str(index_path),
             "--config", str(config_path), "--out", str(out_path), "--trace", str(trace_path)],
        )
        assert result.exit_code == 0, result.output
        heads = np.load(out_path)
        assert heads["W_img"].shape == (16, 16)
        header, *rows = trace_path.read_text().splitlines()
        assert "total" in header
        assert len(rows) == 5


class TestTrainRl:
    def test_short_run_saves_policy(self, runner, raw_sources, tmp_path):
        wikidata, conceptnet = raw_sources
        pool_path, index_path = tmp_path / "pool.jsonl", tmp_path / "k.idx"
        runner.invoke(main, ["ingest", "--wikidata", str(wikidata), "--conceptnet", str(conceptnet), "--out", str(pool_path)])
        runner.invoke(main, ["build-index", "--pool", str(pool_path), "--out", str(index_path), "--dim", "16"])
        out_path = tmp_path / "policy.json"
        for algo in ("reinforce", "ppo"):
            result = runner.invoke(
                main,
                ["train-rl", "--algo", algo, "--episodes", "2", "--batch", "4",
                 "--index", str(index_path), "--pool", str(pool_path), "--out", str(out_path)],
            )
            assert result.exit_code == 0, result.output
            PolicySnapshot.load(out_path)


class TestGenerateAndEmit:
    def test_in_process_session_and_emit(self, runner, tmp_path):
        scene_path = tmp_path / "scene.json"
        result = runner.invoke(
            main,
            ["generate", "--demo-dir", str(tmp_path / "demo"),
             "--text", "a cat sleeping on a laptop",
             "--text", "please add a whiteboard",
             "--out-scene", str(scene_path)],
        )
        assert result.exit_code == 0, result.output
        scene = json.loads(scene_path.read_text())
        assert scene["revision"] == 1
        assert any(o["label"] == "whiteboard" for o in scene["objects"])

        emitted = runner.invoke(main, ["emit", "--scene", str(scene_path)])
        assert emitted.exit_code == 0, emitted.output
        assert parse_engine_code(emitted.output).revision == 1

        unity = runner.invoke(main, ["emit", "--scene", str(scene_path), "--backend", "unity-csharp"])
        assert unity.exit_code == 0
        assert "using UnityEngine;" in unity.output

    def test_generate_requires_target(self, runner):
        result = runner.invoke(main, ["generate", "--text", "anything"])
        assert result.exit_code != 0


class TestConfigParsing:
    def test_kv_format(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\nsteps = 10\nlearning_rate = 0.5\nname = adam\n")
        assert load_kv_or_json_config(str(p)) == {"steps": 10, "learning_rate": 0.5, "name": "adam"}

    def test_json_format(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"steps": 3}')
        assert load_kv_or_json_config(str(p)) == {"steps": 3}
