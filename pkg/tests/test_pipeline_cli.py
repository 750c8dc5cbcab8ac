import csv
import filecmp
import json
import os

import numpy as np
import pytest

from topicrefine import cli, fusion, pipeline
from topicrefine.errors import StalenessError

from conftest import FIXTURES, fixture_config


def read_json(directory, name):
    with open(os.path.join(directory, name), encoding="utf-8") as fh:
        return json.load(fh)


class TestConfigHash:
    def test_stable_under_key_order(self):
        a = {"run": {"seed": 1, "output_dir": "x"}}
        b = {"run": {"output_dir": "x", "seed": 1}}
        assert pipeline.config_hash(a) == pipeline.config_hash(b)

    def test_sensitive_to_values(self):
        a = fixture_config("/tmp/a")
        b = fixture_config("/tmp/a", seed=43)
        assert pipeline.config_hash(a) != pipeline.config_hash(b)

    def test_run_dir_uses_hash_prefix(self):
        cfg = fixture_config("/tmp/out")
        d = pipeline.run_dir(cfg)
        assert d == os.path.join(
            "/tmp/out", f"run-{pipeline.config_hash(cfg)[:12]}")


class TestFullRun:
    def test_expected_artifacts_exist(self, fixture_run):
        _, directory = fixture_run
        expected = [
            "corpus.json", "pool.json", "hybrids_docs.bin",
            "hybrids_topics.bin", "hybrids_words.bin", "wordvecs.bin",
            "sgs_weights.json", "sim_topics_relative.json",
            "sim_words_relative.json", "graph.json", "checkpoint.bin",
            "refined.bin", "losses.csv", "manifest.json", "sensitivity.csv",
        ]
        for source in ("refined", "original"):
            expected += [f"extraction_{source}.json", f"selection_{source}.json"]
            for m in ("coherence", "centroid", "connectivity"):
                expected += [f"topicset_{source}_{m}.json",
                             f"topicset_{source}_{m}.txt",
                             f"metrics_{source}_{m}.json"]
        for name in expected:
            assert os.path.exists(os.path.join(directory, name)), name

    def test_selection_is_argmax_of_composites(self, fixture_run):
        _, directory = fixture_run
        for source in ("refined", "original"):
            sel = read_json(directory, f"selection_{source}.json")
            composites = sel["composites"]
            assert composites[sel["selected_method"]] == max(composites.values())
            for method, value in composites.items():
                report = read_json(directory, f"metrics_{source}_{method}.json")
                assert report["composite"] == pytest.approx(value)

    def test_training_loss_curve(self, fixture_run):
        _, directory = fixture_run
        with open(os.path.join(directory, "losses.csv")) as fh:
            rows = list(csv.DictReader(fh))
        losses = [float(r["loss"]) for r in rows]
        assert len(losses) == 100
        assert losses[-1] < losses[0]

    def test_refined_embeddings_match_checkpoint_dims(self, fixture_run):
        _, directory = fixture_run
        ids, mat, d_s, d_b = fusion.load_hybrids(
            os.path.join(directory, "refined.bin"))
        _, orig, _, _ = fusion.load_hybrids(
            os.path.join(directory, "hybrids_topics.bin"))
        assert mat.shape == orig.shape
        assert not np.array_equal(mat, orig)

    def test_manifest_covers_all_stages(self, fixture_run):
        _, directory = fixture_run
        manifest = read_json(directory, "manifest.json")
        stages = {s["stage"] for s in manifest["stages"]}
        assert {"generate-topics", "embed", "similarity", "build-graph",
                "train", "extract-refined", "evaluate-refined",
                "extract-original", "evaluate-original",
                "sensitivity"} <= stages

    def test_sgs_weights_from_grid(self, fixture_run):
        _, directory = fixture_run
        payload = read_json(directory, "sgs_weights.json")
        assert round(payload["w_wmd"], 1) in [round(0.1 * i, 1)
                                              for i in range(1, 10)]
        assert len(payload["diagnostics"]["grid"]) == 9


class TestStaleness:
    def test_stale_artifact_detected(self, tmp_path):
        cfg = fixture_config(tmp_path)
        directory = pipeline.run_dir(cfg)
        os.makedirs(directory)
        manifest = pipeline.Manifest(directory, cfg)
        pipeline.stage_generate_topics(cfg, directory, manifest)
        # Corrupt an upstream artifact, keeping valid JSON.
        pool_path = os.path.join(directory, "pool.json")
        payload = read_json(directory, "pool.json")
        with open(pool_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        with pytest.raises(StalenessError):
            pipeline.stage_embed(cfg, directory, manifest)
        # --force lets the stage proceed with the modified input.
        pipeline.stage_embed(cfg, directory, manifest, force=True)

    def test_missing_upstream_stage(self, tmp_path):
        cfg = fixture_config(tmp_path)
        directory = pipeline.run_dir(cfg)
        os.makedirs(directory)
        manifest = pipeline.Manifest(directory, cfg)
        with pytest.raises(StalenessError):
            pipeline.stage_similarity(cfg, directory, manifest)

    def test_config_hash_mismatch_in_artifacts(self, tmp_path):
        cfg = fixture_config(tmp_path)
        directory = pipeline.run_dir(cfg)
        os.makedirs(directory)
        manifest = pipeline.Manifest(directory, cfg)
        pipeline.stage_generate_topics(cfg, directory, manifest)
        other = fixture_config(tmp_path, seed=99)
        with pytest.raises(StalenessError):
            pipeline._read_json(os.path.join(directory, "pool.json"), other)


class TestValidation:
    def test_validate_writes_tables(self, fixture_run, monkeypatch, tmp_path):
        cfg, directory = fixture_run
        manifest = pipeline.Manifest(directory, cfg)
        rng = np.random.default_rng(0)

        def fake_replicate(cfg, directory, n=5, base_seed=None):
            return {name: stats_module.ReplicationSet(
                        approach=name,
                        samples=list(rng.normal(0.5 + 0.05 * i, 0.01, size=n)),
                        seeds=list(range(n)))
                    for i, name in enumerate(pipeline.APPROACHES)}

        from topicrefine import stats as stats_module
        monkeypatch.setattr(pipeline, "replicate", fake_replicate)
        pipeline.stage_validate(cfg, directory, manifest, n=3)
        with open(os.path.join(directory, "validation_descriptive.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["approach"] for r in rows} == set(pipeline.APPROACHES)
        with open(os.path.join(directory, "validation_ttests.csv")) as fh:
            trows = list(csv.DictReader(fh))
        assert len(trows) == 5  # all approaches vs the baseline
        diffs = [float(r["mean_difference"]) for r in trows]
        assert diffs == sorted(diffs)
        with open(os.path.join(directory, "validation_anova.csv")) as fh:
            arows = list(csv.DictReader(fh))
        assert len(arows) == 1
        assert 0.0 <= float(arows[0]["eta_squared"]) <= 1.0

    def test_replicate_uses_distinct_seeds(self, fixture_run):
        cfg, directory = fixture_run
        reps = pipeline.replicate(cfg, directory, n=2, base_seed=7)
        assert set(reps) == set(pipeline.APPROACHES)
        for r in reps.values():
            assert r.seeds == [7, 8]
            assert len(r.samples) == 2

    def test_zero_variance_replications_rejected(self, fixture_run):
        # Every seed converges to the same clustering on the small fixture,
        # so per-approach samples are constant and inference must refuse.
        from topicrefine.errors import DomainError

        cfg, directory = fixture_run
        manifest = pipeline.Manifest(directory, cfg)
        with pytest.raises(DomainError):
            pipeline.stage_validate(cfg, directory, manifest, n=3)


class TestDeterminism:
    def test_two_runs_byte_identical(self, tmp_path):
        import shutil

        cfg = fixture_config(tmp_path / "out")
        first = pipeline.run_all(cfg, ablation="original")
        saved = tmp_path / "saved"
        shutil.move(first, saved)
        second = pipeline.run_all(cfg, ablation="original")
        names = sorted(os.listdir(saved))
        assert names == sorted(os.listdir(second))
        for name in names:
            assert filecmp.cmp(os.path.join(saved, name),
                               os.path.join(second, name),
                               shallow=False), name

    def test_seed_changes_artifacts(self, tmp_path):
        d1 = pipeline.run_all(fixture_config(tmp_path / "a", seed=42))
        d2 = pipeline.run_all(fixture_config(tmp_path / "b", seed=43))
        r1 = fusion.load_hybrids(os.path.join(d1, "refined.bin"))[1]
        r2 = fusion.load_hybrids(os.path.join(d2, "refined.bin"))[1]
        assert not np.array_equal(r1, r2)


def write_toml(tmp_path, **run_overrides):
    corpus = os.path.join(FIXTURES, "corpus_en.jsonl")
    backend = os.path.join(FIXTURES, "backend")
    out = run_overrides.pop("output_dir", str(tmp_path / "runs"))
    path = tmp_path / "config.toml"
    path.write_text(
        f'[dataset]\ncorpus = "{corpus}"\nlanguage = "en"\n'
        f'[backends]\nmode = "fixture"\nfixture_dir = "{backend}"\n'
        f'd_s = 8\nd_b = 8\n'
        f'[sgs]\noptimize = true\nk_max = 8\n'
        f'[gnn]\nhidden_dim = 16\nepochs = 100\n'
        f'[extraction]\nk = 8\n'
        f'[run]\nseed = 42\noutput_dir = "{out}"\n')
    return str(path)


class TestCli:
    def test_run_command(self, tmp_path, capsys):
        code = cli.main(["run", "--config", write_toml(tmp_path)])
        assert code == 0
        assert "run complete" in capsys.readouterr().out

    def test_bad_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[dataset]\ncorpus = "/does/not/exist.jsonl"\n')
        assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG

    def test_stage_out_of_order_exit_code(self, tmp_path):
        cfg_path = write_toml(tmp_path)
        assert cli.main(["train", "--config", cfg_path]) == cli.EXIT_STALE

    def test_invalid_command_rejected(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["bogus", "--config", "x"])
