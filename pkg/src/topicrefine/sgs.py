"""Semantic-geometric similarity between topic phrases.

Combines a word-alignment similarity (optimal one-to-one matching of
IDF-weighted word vectors under cosine distance) with whole-phrase cosine
similarity, then standardizes the mix through a sigmoid centered on the
corpus mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import elbow_k, kmeans
from .errors import DomainError
from .metrics import silhouette as silhouette_score

W_WMD_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
DEFAULT_WEIGHTS = (0.9, 0.099)


class FilteredEmpty(Exception):
    """Raised when a phrase has no embeddable words left after filtering."""


@dataclass(frozen=True)
class IdfTable:
    n_topics: int
    scores: dict

    def get(self, word):
        return self.scores.get(word, 0.0)


@dataclass(frozen=True)
class SgsWeights:
    w_wmd: float
    w_idf: float

    def __post_init__(self):
        if not 0.0 <= self.w_wmd <= 1.0:
            raise DomainError(f"w_wmd={self.w_wmd} outside [0,1]")
        if self.w_idf < 0:
            raise DomainError(f"w_idf={self.w_idf} negative")
        if abs(self.w_wmd + self.w_idf - 1.0) > 0.01:
            raise DomainError("weights must approximately sum to 1")


@dataclass(frozen=True)
class RelativeTransformParams:
    mu: float
    sigma: float


@dataclass
class SimilarityMatrix:
    n: int
    values: np.ndarray
    stage: str  # wmd | cosine | hybrid | relative

    def to_json(self):
        return {"n": self.n, "stage": self.stage,
                "values": [float(v) for v in self.values.reshape(-1)]}

    @staticmethod
    def from_json(obj):
        n = obj["n"]
        values = np.asarray(obj["values"], dtype=np.float64).reshape(n, n)
        return SimilarityMatrix(n=n, values=values, stage=obj["stage"])


@dataclass(frozen=True)
class Assignment:
    rows: tuple
    cols: tuple
    total_cost: float


def compute_idf(topics):
    """Natural-log IDF over the topic pool; a topic's word *set* counts once."""
    if not topics:
        raise DomainError("empty topic list")
    n = len(topics)
    counts = {}
    for t in topics:
        for w in set(t.words):
            counts[w] = counts.get(w, 0) + 1
    scores = {w: math.log(n / c) for w, c in counts.items()}
    return IdfTable(n_topics=n, scores=scores)


def hungarian(cost):
    """Minimal one-to-one matching of size min(m, n) on a rectangular matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        raise DomainError("empty cost matrix")
    if not np.isfinite(cost).all():
        raise DomainError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    return Assignment(rows=tuple(int(r) for r in rows),
                      cols=tuple(int(c) for c in cols),
                      total_cost=float(cost[rows, cols].sum()))


def _cosine_distance_matrix(a, b):
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    if np.any(na == 0) or np.any(nb == 0):
        raise DomainError("zero vector in cosine distance")
    return 1.0 - (a / na) @ (b / nb).T


def _weighted_word_matrix(words, vectors, idf, w_idf):
    rows = []
    for w in words:
        if w in vectors:
            rows.append(vectors[w].vector * (1.0 + w_idf * idf.get(w)))
    if not rows:
        raise FilteredEmpty
    return np.vstack(rows)


def wmd_similarity(t1, t2, vectors, idf, w_idf):
    """Alignment similarity: 1 - total_dist / (2 * max(len1, len2)).

    Lengths are the raw phrase word counts, before vocabulary filtering.
    """
    emb1 = _weighted_word_matrix(t1.words, vectors, idf, w_idf)
    emb2 = _weighted_word_matrix(t2.words, vectors, idf, w_idf)
    dist = np.clip(_cosine_distance_matrix(emb1, emb2), 0.0, 2.0)
    assignment = hungarian(dist)
    denom = 2.0 * max(len(t1.words), len(t2.words))
    return 1.0 - assignment.total_cost / denom


def cosine_topic_similarity(e1, e2):
    """Cosine similarity of phrase embeddings, clamped to [0,1]."""
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if n1 == 0 or n2 == 0:
        raise DomainError("zero vector in topic cosine similarity")
    return float(np.clip(np.dot(e1, e2) / (n1 * n2), 0.0, 1.0))


def hybrid_matrix(topics, embeddings, vectors, idf, weights: SgsWeights):
    """Symmetric matrix of w_wmd * alignment-sim + (1 - w_wmd) * cosine-sim."""
    n = len(topics)
    if n < 1:
        raise DomainError("empty topic list")
    values = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            try:
                s_wmd = wmd_similarity(topics[i], topics[j], vectors, idf,
                                       weights.w_idf)
            except FilteredEmpty:
                s_wmd = 0.0
            s_cos = cosine_topic_similarity(embeddings[i], embeddings[j])
            s = weights.w_wmd * s_wmd + (1.0 - weights.w_wmd) * s_cos
            values[i, j] = values[j, i] = s
    return SimilarityMatrix(n=n, values=values, stage="hybrid")


def relative_transform(m: SimilarityMatrix):
    """Sigmoid-standardize off-diagonal entries around the corpus mean.

    Mean and (population) std are taken over the strict upper triangle; the
    scale is half the std, so the mean maps to 0.5 and contrasts sharpen.
    """
    if m.n < 2:
        raise DomainError("relative transform needs n >= 2")
    iu = np.triu_indices(m.n, k=1)
    upper = m.values[iu]
    mu = float(upper.mean())
    sigma = float(upper.std())
    out = np.ones((m.n, m.n))
    if sigma == 0.0:
        off = np.full(upper.shape, 0.5)
    else:
        z = (upper - mu) / (sigma / 2.0)
        off = 1.0 / (1.0 + np.exp(-z))
    out[iu] = off
    out[(iu[1], iu[0])] = off
    return (SimilarityMatrix(n=m.n, values=out, stage="relative"),
            RelativeTransformParams(mu=mu, sigma=sigma))


def grid_w_idf(w_wmd):
    # Complementary weights; reproduces the (0.9, 0.099) operating point.
    return (1.0 - w_wmd) * 0.99


def sgs_matrix(topics, embeddings, vectors, idf, weights):
    hyb = hybrid_matrix(topics, embeddings, vectors, idf, weights)
    rel, params = relative_transform(hyb)
    return hyb, rel, params


def word_topics(words, vectors):
    """Wrap each word as a one-word phrase so the same pipeline scores words."""
    from .corpus import TopicPhrase

    topics = [TopicPhrase(id=i, phrase=w, words=[w], assigned_docs=set())
              for i, w in enumerate(words)]
    embeddings = [vectors[w].vector for w in words]
    return topics, embeddings


def optimize_weights(topics, embeddings, vectors, idf, k_max=10, seed=0):
    """Grid search w_wmd in {0.1..0.9} scored by clustering silhouette.

    Each topic is represented by its row of relative similarities; k is picked
    by the elbow rule on the inertia curve. Ties favor the larger w_wmd.
    """
    n = len(topics)
    if n < 4:
        raise DomainError("weight optimization needs >= 4 topics")
    diagnostics = {"grid": [], "degenerate": False}
    candidates = []
    for w_wmd in W_WMD_GRID:
        weights = SgsWeights(w_wmd=w_wmd, w_idf=grid_w_idf(w_wmd))
        _, rel, _ = sgs_matrix(topics, embeddings, vectors, idf, weights)
        X = rel.values
        ks = list(range(2, min(k_max, n - 1) + 1)) or [2]
        inertias = [kmeans(X, k, n_init=10, seed=seed).inertia for k in ks]
        k = elbow_k(inertias, ks)
        result = kmeans(X, k, n_init=10, seed=seed)
        score = None
        if len(np.unique(result.labels)) >= 2:
            try:
                score = silhouette_score(X, result.labels)
            except DomainError:
                score = None
        diagnostics["grid"].append({"w_wmd": w_wmd, "k": k, "silhouette": score})
        if score is not None:
            candidates.append((score, w_wmd, weights, k))
    if not candidates:
        diagnostics["degenerate"] = True
        return SgsWeights(*DEFAULT_WEIGHTS), diagnostics
    # argmax silhouette; exact ties fall to the larger w_wmd.
    best = max(candidates, key=lambda c: (c[0], c[1]))
    diagnostics["selected_k"] = best[3]
    return best[2], diagnostics
