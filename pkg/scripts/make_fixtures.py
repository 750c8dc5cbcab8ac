"""Regenerate the bundled test fixtures: a small English feedback corpus,
recorded LLM topic responses, and deterministic embedding files.

Embeddings are synthetic but structured: each vocabulary word gets a unit
vector near one of a few theme anchors, and sentence vectors are noisy means
of their token vectors, so similarity and clustering behave sensibly.

Run from the repo root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import hashlib
import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from topicrefine import backends, corpus  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "tests", "fixtures")
D_S = 8
D_B = 8

DOCS = [
    ("1", "Liked: the nurses were kind and attentive during my stay"),
    ("2", "Disliked: waiting times in the emergency room were far too long"),
    ("3", "Comment Title: visit Advice: parking near the hospital is a nightmare"),
    ("4", "N/A"),
    ("5", "the reception staff were rude and dismissive of my questions"),
    ("6", "long waiting times for appointments and poor communication about delays"),
    ("7", "the ward was dirty and the bathroom facilities were not cleaned"),
    ("8", "discharge paperwork took hours and nobody explained my medication"),
    ("9", "doctors seemed rushed and did not listen to my concerns"),
    ("10", "food quality was poor and meals arrived cold every day"),
    ("11", "parking fees are excessive and the car park is always full"),
    ("12", "kind nurses but the noise at night made sleeping impossible"),
    ("13", "Nothing"),
    ("14", "appointment was cancelled twice with no explanation or apology"),
]

# Per-document generated topics; includes a case-fold duplicate pair
# ("Rude Staff" / "rude staff") to exercise pool deduplication.
TOPICS_BY_DOC = {
    "1": [],
    "2": ["long waiting times", "emergency room delays"],
    "3": ["parking problems"],
    "5": ["rude staff", "poor communication"],
    "6": ["long waiting times", "poor communication", "appointment delays"],
    "7": ["dirty ward", "unclean facilities"],
    "8": ["slow discharge process", "medication confusion"],
    "9": ["Rude Staff", "doctors not listening"],
    "10": ["poor food quality", "cold meals"],
    "11": ["parking problems", "excessive parking fees"],
    "12": ["night noise", "sleep disruption"],
    "14": ["cancelled appointments", "appointment delays"],
}

SENTIMENTS = {doc_id: ("Positive" if doc_id == "1" else "Negative")
              for doc_id in TOPICS_BY_DOC}

# Theme anchors pull related words together in embedding space.
THEMES = {
    "waiting": ["waiting", "times", "long", "delays", "appointment",
                "appointments", "cancelled", "emergency", "room", "slow",
                "hours"],
    "staff": ["staff", "rude", "nurses", "doctors", "kind", "reception",
              "dismissive", "listening", "communication", "rushed"],
    "facility": ["parking", "fees", "car", "park", "dirty", "ward",
                 "facilities", "unclean", "noise", "night", "sleep",
                 "disruption", "bathroom"],
    "care": ["food", "quality", "meals", "cold", "poor", "discharge",
             "medication", "confusion", "paperwork", "process"],
}


def _rng_for(text: str) -> np.random.Generator:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _anchors():
    rng = np.random.default_rng(2024)
    anchors = {}
    for theme in THEMES:
        v = rng.normal(size=D_B)
        anchors[theme] = v / np.linalg.norm(v)
    return anchors


def word_vector(word: str, anchors) -> np.ndarray:
    theme = next((t for t, ws in THEMES.items() if word in ws), None)
    rng = _rng_for(f"word:{word}")
    if theme is None:
        v = rng.normal(size=D_B)
    else:
        v = 2.5 * anchors[theme] + 0.4 * rng.normal(size=D_B)
    return v / np.linalg.norm(v)


def text_bundle(text: str, anchors):
    tokens = [t.strip("\"'.,;:!?()") .lower() for t in text.split()]
    tokens = [t for t in tokens if t]
    vectors = np.vstack([word_vector(t, anchors) for t in tokens])
    noise = 0.15 * _rng_for(f"text:{text}").normal(size=D_S)
    sentence = vectors.mean(axis=0) + noise
    return sentence, tokens, vectors


def main():
    out = os.path.normpath(FIXTURES)
    backend_dir = os.path.join(out, "backend")
    os.makedirs(out, exist_ok=True)
    anchors = _anchors()

    corpus_path = os.path.join(out, "corpus_en.jsonl")
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for doc_id, text in DOCS:
            fh.write(json.dumps({"id": doc_id, "text": text}) + "\n")

    docs = corpus.ingest_documents(corpus_path, language="en")
    template = backends.PROMPT_TEMPLATES["en"]
    batch_size = 20
    for i in range(0, len(docs), batch_size):
        batch = docs[i:i + batch_size]
        prompt = backends.render_prompt(batch, template)
        request = backends.LlmRequest(prompt=prompt)
        records = [
            {"Comment": d.id, "Sentiment": SENTIMENTS.get(d.id, "Neutral"),
             "Topics": TOPICS_BY_DOC.get(d.id, [])}
            for d in batch
        ]
        response = "```json\n" + json.dumps(records, indent=1) + "\n```"
        backends.FixtureChatBackend.record(backend_dir, request, response)

    records = []
    for d in docs:
        for phrase in TOPICS_BY_DOC.get(d.id, []):
            records.append(corpus.GeneratedTopicRecord(
                doc_id=d.id, sentiment="Negative", topic_phrases=(phrase,)))
    topics, _ = corpus.build_topic_pool(records)
    vocab = corpus.vocabulary(topics)

    texts = [d.text for d in docs] + [t.phrase for t in topics] + list(vocab)
    for text in texts:
        sentence, tokens, vectors = text_bundle(text, anchors)
        backends.FixtureEmbeddingBackend.record_text(
            backend_dir, text, sentence, tokens, vectors)
    for word in vocab:
        backends.FixtureEmbeddingBackend.record_word(
            backend_dir, word, word_vector(word, anchors))

    config_path = os.path.join(out, "config.toml")
    with open(config_path, "w", encoding="utf-8") as fh:
        fh.write(f"""[dataset]
corpus = "{os.path.join('tests', 'fixtures', 'corpus_en.jsonl')}"
language = "en"

[backends]
mode = "fixture"
fixture_dir = "{os.path.join('tests', 'fixtures', 'backend')}"
d_s = {D_S}
d_b = {D_B}
batch_size = 20

[sgs]
optimize = true
k_max = 8

[graph]
percentile = 0.9

[gnn]
hidden_dim = 16
epochs = 100

[extraction]
k = 8

[run]
seed = 42
output_dir = "runs"
""")
    print(f"fixtures written under {out}")
    print(f"{len(docs)} documents, {len(topics)} topics, {len(vocab)} words")


if __name__ == "__main__":
    main()
