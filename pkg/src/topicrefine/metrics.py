"""Evaluation metrics: diversity, Jaccard overlap, coherence mean,
silhouette, Davies-Bouldin, and the weighted composite score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class CompositeWeights:
    w_td: float = 0.4
    w_j: float = 0.15
    w_coh: float = 0.2
    w_sil: float = 0.2
    w_db: float = 0.05

    def as_dict(self):
        return {"w_td": self.w_td, "w_j": self.w_j, "w_coh": self.w_coh,
                "w_sil": self.w_sil, "w_db": self.w_db}

    def validate(self):
        total = sum(self.as_dict().values())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"composite weights sum to {total}, expected 1")


@dataclass
class MetricsReport:
    topic_diversity: float
    jaccard_mean: float
    coherence_mean: float
    silhouette: float
    davies_bouldin: float
    normalized: dict
    composite: float

    def to_json(self):
        return {
            "topic_diversity": self.topic_diversity,
            "jaccard_mean": self.jaccard_mean,
            "coherence_mean": self.coherence_mean,
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "normalized": self.normalized,
            "composite": self.composite,
        }


def topic_diversity(word_lists):
    """Unique words over total word count, across all topic phrases."""
    if not word_lists:
        raise DomainError("empty topic set")
    total = sum(len(ws) for ws in word_lists)
    unique = len({w for ws in word_lists for w in ws})
    return unique / total


def mean_pairwise_jaccard(word_lists):
    if len(word_lists) < 2:
        raise DomainError("need >= 2 topics for pairwise Jaccard")
    sets = [set(ws) for ws in word_lists]
    total, pairs = 0.0, 0
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            union = sets[i] | sets[j]
            total += len(sets[i] & sets[j]) / len(union)
            pairs += 1
    return total / pairs


def coherence_mean(scores):
    scores = list(scores)
    if not scores:
        return 0.0
    return float(np.mean(scores))


def silhouette(embs, labels):
    """Mean silhouette with Euclidean distance; singletons contribute 0."""
    embs = np.asarray(embs, dtype=np.float64)
    labels = np.asarray(labels)
    n = embs.shape[0]
    uniq = np.unique(labels)
    if len(uniq) < 2 or n < 2:
        raise DomainError("silhouette needs >= 2 clusters and >= 2 points")
    diff = embs[:, None, :] - embs[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    values = np.zeros(n)
    counts = {c: int((labels == c).sum()) for c in uniq}
    for i in range(n):
        c = labels[i]
        if counts[c] == 1:
            continue
        a = dist[i, labels == c].sum() / (counts[c] - 1)
        b = min(dist[i, labels == other].mean() for other in uniq if other != c)
        denom = max(a, b)
        values[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(values.mean())


def davies_bouldin(embs, labels):
    embs = np.asarray(embs, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise DomainError("davies_bouldin needs >= 2 clusters")
    centroids = np.array([embs[labels == c].mean(axis=0) for c in uniq])
    sigma = np.array([
        np.linalg.norm(embs[labels == c] - centroids[i], axis=1).mean()
        for i, c in enumerate(uniq)
    ])
    k = len(uniq)
    worst = np.zeros(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            d = np.linalg.norm(centroids[i] - centroids[j])
            if d == 0:
                raise DomainError("coincident centroids in davies_bouldin")
            ratios.append((sigma[i] + sigma[j]) / d)
        worst[i] = max(ratios)
    return float(worst.mean())


def normalize_components(td, jaccard, coherence, sil, db):
    """Map every raw metric to [0,1] with higher-is-better orientation."""
    return {
        "topic_diversity": td,
        "jaccard": 1.0 - jaccard,
        "coherence": (coherence + 1.0) / 2.0,
        "silhouette": (sil + 1.0) / 2.0,
        "davies_bouldin": 1.0 / (1.0 + db),
    }


def composite(td, jaccard, coherence, sil, db, weights=None):
    weights = weights or CompositeWeights()
    weights.validate()
    norm = normalize_components(td, jaccard, coherence, sil, db)
    score = (weights.w_td * norm["topic_diversity"]
             + weights.w_j * norm["jaccard"]
             + weights.w_coh * norm["coherence"]
             + weights.w_sil * norm["silhouette"]
             + weights.w_db * norm["davies_bouldin"])
    return score, norm


def build_report(td, jaccard, coherence, sil, db, weights=None):
    score, norm = composite(td, jaccard, coherence, sil, db, weights)
    return MetricsReport(
        topic_diversity=td, jaccard_mean=jaccard, coherence_mean=coherence,
        silhouette=sil, davies_bouldin=db, normalized=norm, composite=score,
    )


_WEIGHT_NAMES = ("w_td", "w_j", "w_coh", "w_sil", "w_db")


def sensitivity(td, jaccard, coherence, sil, db, weights=None, deltas=(0.01, 0.05)):
    """Perturb one weight at a time (+/- delta), rescale the rest to sum 1."""
    weights = weights or CompositeWeights()
    base = weights.as_dict()
    rows = []
    for name in _WEIGHT_NAMES:
        for delta in deltas:
            for signed in ((delta,) if delta == 0 else (-delta, delta)):
                if signed == 0:
                    score, _ = composite(td, jaccard, coherence, sil, db, weights)
                    rows.append((name, 0.0, score))
                    continue
                perturbed = dict(base)
                perturbed[name] = base[name] + signed
                if perturbed[name] < 0:
                    raise DomainError(f"delta {signed} drives {name} negative")
                rest = 1.0 - perturbed[name]
                others_total = sum(base[k] for k in _WEIGHT_NAMES if k != name)
                for k in _WEIGHT_NAMES:
                    if k != name:
                        perturbed[k] = base[k] * rest / others_total
                score, _ = composite(td, jaccard, coherence, sil, db,
                                     CompositeWeights(**perturbed))
                rows.append((name, signed, score))
    return rows
