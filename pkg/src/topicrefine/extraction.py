"""Top-k topic extraction: cluster refined embeddings, score candidates per
cluster under three methods, and pick the best method by composite score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterResult, kmeans
from .errors import DomainError
from .graphnet import TOPIC, WORD, HeterogeneousGraph

METHODS = ("coherence", "centroid", "connectivity")


@dataclass(frozen=True)
class ScoredTopic:
    topic_id: int
    cluster: int
    score: float
    method: str


@dataclass
class TopicSet:
    method: str
    topics: list  # of (topic_id, phrase, cluster, score)

    def to_json(self):
        return {
            "method": self.method,
            "k": len(self.topics),
            "topics": [
                {"id": tid, "phrase": phrase, "cluster": cluster, "score": score}
                for tid, phrase, cluster, score in self.topics
            ],
        }

    def phrases(self):
        return [phrase for _, phrase, _, _ in self.topics]

    def to_text(self):
        return "\n".join(f"{i + 1}. {p}" for i, p in enumerate(self.phrases())) + "\n"


def _cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DomainError("zero vector in cosine similarity")
    return float(np.dot(a, b) / (na * nb))


def topic_word_neighbors(g: HeterogeneousGraph):
    """topic index -> list of word indices joined by word-in-topic edges."""
    neighbors = {i: [] for i in range(len(g.topic_ids))}
    for e in g.edges:
        if e.kind != "word_in_topic":
            continue
        t = e.a if e.a.kind == TOPIC else e.b
        w = e.a if e.a.kind == WORD else e.b
        neighbors[t.index].append(w.index)
    return neighbors


def score_coherence(topic_idx, neighbors, refined, word_hybrids):
    """Mean cosine between the topic embedding and its words' embeddings."""
    words = neighbors.get(topic_idx, [])
    if not words:
        return 0.0
    sims = [_cosine(refined[topic_idx], word_hybrids[w]) for w in words]
    return float(np.mean(sims))


def score_centroid(topic_idx, clusters: ClusterResult, refined):
    centroid = clusters.centroids[clusters.labels[topic_idx]]
    if np.linalg.norm(centroid) == 0:
        raise DomainError("zero centroid in centroid scoring")
    return _cosine(refined[topic_idx], centroid)


def score_connectivity(topic_idx, neighbors, refined, word_hybrids):
    """Word-edge count times the mean word-topic cosine similarity."""
    words = neighbors.get(topic_idx, [])
    if not words:
        return 0.0
    return len(words) * score_coherence(topic_idx, neighbors, refined, word_hybrids)


def score_all(g, clusters, refined, word_hybrids):
    """Per-method score for every topic index."""
    neighbors = topic_word_neighbors(g)
    n = refined.shape[0]
    scores = {m: [] for m in METHODS}
    for i in range(n):
        scores["coherence"].append(
            score_coherence(i, neighbors, refined, word_hybrids))
        scores["centroid"].append(score_centroid(i, clusters, refined))
        scores["connectivity"].append(
            score_connectivity(i, neighbors, refined, word_hybrids))
    return scores


def extract_top_k(clusters: ClusterResult, scores, phrases, method):
    """One topic per cluster: the highest score, ties to the smaller phrase."""
    n = len(scores)
    if n != len(clusters.labels):
        raise DomainError("scores do not cover all topics")
    chosen = {}
    for idx in range(n):
        c = int(clusters.labels[idx])
        cand = (scores[idx], phrases[idx], idx)
        if c not in chosen:
            chosen[c] = cand
            continue
        cur = chosen[c]
        if cand[0] > cur[0] or (cand[0] == cur[0] and cand[1] < cur[1]):
            chosen[c] = cand
    topics = [(idx, phrase, c, score)
              for c, (score, phrase, idx) in sorted(chosen.items())]
    return TopicSet(method=method, topics=topics)


def select_best_method(sets, composites):
    """Argmax composite; ties resolve coherence > centroid > connectivity."""
    if not sets:
        raise DomainError("no topic sets to select from")
    order = {m: i for i, m in enumerate(METHODS)}
    best = max(sets, key=lambda s: (composites[s.method], -order[s.method]))
    return best, composites


def run_extraction(g, embeddings, k, seed=0, n_init=10):
    """Cluster embeddings into k groups and build all three topic sets."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n = embeddings.shape[0]
    if k > n:
        raise DomainError(f"k={k} exceeds {n} topics")
    clusters = kmeans(embeddings, k, n_init=n_init, seed=seed)
    return clusters
