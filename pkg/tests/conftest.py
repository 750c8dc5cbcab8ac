import os

import numpy as np
import pytest

from topicrefine import pipeline
from topicrefine.backends import WordVector
from topicrefine.corpus import TopicPhrase

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_config(output_dir, seed=42, **overrides):
    cfg = {
        "dataset": {"corpus": os.path.join(FIXTURES, "corpus_en.jsonl"),
                    "language": "en"},
        "backends": {"mode": "fixture",
                     "fixture_dir": os.path.join(FIXTURES, "backend"),
                     "d_s": 8, "d_b": 8, "batch_size": 20,
                     "model": "gpt-4o", "temperature": 0.0},
        "sgs": {"optimize": True, "k_max": 8},
        "graph": {"percentile": 0.9},
        "gnn": {"hidden_dim": 16, "epochs": 100},
        "extraction": {"k": 8},
        "run": {"seed": seed, "output_dir": str(output_dir)},
    }
    for dotted, value in overrides.items():
        section, key = dotted.split(".")
        cfg[section][key] = value
    return cfg


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """One full pipeline run (with ablation) shared by read-only tests."""
    out = tmp_path_factory.mktemp("run")
    cfg = fixture_config(out)
    directory = pipeline.run_all(cfg, ablation="original")
    return cfg, directory


def make_topic(idx, phrase):
    return TopicPhrase(id=idx, phrase=phrase, words=phrase.lower().split(),
                       assigned_docs={f"d{idx}"})


def make_word_vectors(words, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    out = {}
    for w in words:
        v = rng.normal(size=dim)
        out[w] = WordVector(word=w, vector=v / np.linalg.norm(v))
    return out
