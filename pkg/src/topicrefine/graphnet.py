"""Heterogeneous graph over documents, topics, and words.

Similarity edges connect topic pairs (and word pairs) whose standardized
similarity is strictly above the 90th percentile of all pair values;
assignment and membership edges carry weight 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DOC, TOPIC, WORD = "document", "topic", "word"
EDGE_KINDS = ("topic_assignment", "similar_topics", "similar_words", "word_in_topic")


@dataclass(frozen=True)
class NodeRef:
    kind: str
    index: int


@dataclass(frozen=True)
class Edge:
    a: NodeRef
    b: NodeRef
    kind: str
    weight: float


_ENDPOINTS = {
    "topic_assignment": {TOPIC, DOC},
    "similar_topics": {TOPIC},
    "similar_words": {WORD},
    "word_in_topic": {WORD, TOPIC},
}


def _check_edge(e: Edge):
    kinds = {e.a.kind, e.b.kind}
    if kinds != _ENDPOINTS[e.kind]:
        raise DomainError(f"edge kind {e.kind} cannot join {e.a.kind}-{e.b.kind}")
    if e.a == e.b:
        raise DomainError("self-loop")
    if not 0.0 <= e.weight <= 1.0:
        raise DomainError(f"edge weight {e.weight} outside [0,1]")


@dataclass
class HeterogeneousGraph:
    doc_ids: list
    topic_ids: list
    word_ids: list
    doc_features: np.ndarray
    topic_features: np.ndarray
    word_features: np.ndarray
    edges: list
    thresholds: dict = field(default_factory=dict)

    def node_counts(self):
        return {DOC: len(self.doc_ids), TOPIC: len(self.topic_ids),
                WORD: len(self.word_ids)}

    def edge_counts(self):
        counts = {k: 0 for k in EDGE_KINDS}
        for e in self.edges:
            counts[e.kind] += 1
        return counts

    def global_index(self, ref: NodeRef) -> int:
        if ref.kind == DOC:
            return ref.index
        if ref.kind == TOPIC:
            return len(self.doc_ids) + ref.index
        return len(self.doc_ids) + len(self.topic_ids) + ref.index

    @property
    def n_nodes(self):
        return len(self.doc_ids) + len(self.topic_ids) + len(self.word_ids)


def percentile_threshold(values, p=0.90):
    """Nearest-rank percentile: sorted ascending, element ceil(p*n) - 1."""
    values = list(values)
    if not values:
        raise DomainError("empty value list for percentile")
    if not 0.0 < p < 1.0:
        raise DomainError(f"percentile p={p} outside (0,1)")
    ordered = sorted(values)
    idx = math.ceil(p * len(ordered)) - 1
    return float(ordered[idx])


def edge_feature(e: Edge) -> np.ndarray:
    """One-hot edge kind concatenated with the scalar weight."""
    vec = np.zeros(5)
    vec[EDGE_KINDS.index(e.kind)] = 1.0
    vec[4] = e.weight
    return vec


def _canonical(a: NodeRef, b: NodeRef) -> tuple:
    # Stable undirected storage order within a kind pair.
    if (a.kind, a.index) <= (b.kind, b.index):
        return a, b
    return b, a


def build_graph(doc_ids, topics, words, assignments, topic_rel, word_rel,
                doc_hybrids, topic_hybrids, word_vectors, p=0.90):
    """Assemble nodes, features, and the four edge families."""
    if not topics:
        raise DomainError("empty topic set")
    topic_hybrids = np.asarray(topic_hybrids, dtype=np.float64)
    # Documents with no topic assignments stay out of the graph.
    kept_docs = [d for d in doc_ids if assignments.get(d)]
    doc_pos = {d: i for i, d in enumerate(kept_docs)}
    topic_pos = {t.id: i for i, t in enumerate(topics)}
    word_pos = {w: i for i, w in enumerate(words)}

    doc_features = (np.vstack([doc_hybrids[d] for d in kept_docs])
                    if kept_docs else np.zeros((0, topic_hybrids.shape[1])))
    word_features = (np.vstack([word_vectors[w].vector for w in words])
                     if words else np.zeros((0, 0)))

    edges = []
    seen = set()

    def add(a, b, kind, weight):
        a, b = _canonical(a, b)
        key = (a, b, kind)
        if key in seen:
            return
        seen.add(key)
        e = Edge(a=a, b=b, kind=kind, weight=weight)
        _check_edge(e)
        edges.append(e)

    for doc_id, topic_ids in sorted(assignments.items()):
        if doc_id not in doc_pos:
            continue
        for tid in topic_ids:
            add(NodeRef(TOPIC, topic_pos[tid]), NodeRef(DOC, doc_pos[doc_id]),
                "topic_assignment", 1.0)

    thresholds = {}
    n_t = len(topics)
    iu = np.triu_indices(n_t, k=1)
    if iu[0].size:
        vals = topic_rel.values[iu]
        thresholds["topic"] = percentile_threshold(vals, p)
        for i, j, s in zip(iu[0], iu[1], vals):
            if s > thresholds["topic"]:
                add(NodeRef(TOPIC, int(i)), NodeRef(TOPIC, int(j)),
                    "similar_topics", float(s))

    n_w = len(words)
    iw = np.triu_indices(n_w, k=1)
    if iw[0].size:
        vals = word_rel.values[iw]
        thresholds["word"] = percentile_threshold(vals, p)
        for i, j, s in zip(iw[0], iw[1], vals):
            if s > thresholds["word"]:
                add(NodeRef(WORD, int(i)), NodeRef(WORD, int(j)),
                    "similar_words", float(s))

    for t in topics:
        for w in t.words:
            if w in word_pos:
                add(NodeRef(WORD, word_pos[w]), NodeRef(TOPIC, topic_pos[t.id]),
                    "word_in_topic", 1.0)

    return HeterogeneousGraph(
        doc_ids=list(kept_docs), topic_ids=[t.id for t in topics],
        word_ids=list(words), doc_features=doc_features,
        topic_features=np.asarray(topic_hybrids, dtype=np.float64),
        word_features=np.asarray(word_features, dtype=np.float64),
        edges=edges, thresholds=thresholds,
    )


def adjacency(g: HeterogeneousGraph):
    """Per-node neighbor lists over global indices, with edge references."""
    neighbors = [[] for _ in range(g.n_nodes)]
    for ei, e in enumerate(g.edges):
        ia, ib = g.global_index(e.a), g.global_index(e.b)
        neighbors[ia].append((ib, ei))
        neighbors[ib].append((ia, ei))
    return neighbors


def export_graph(g: HeterogeneousGraph, path):
    payload = {
        "nodes": {
            "documents": g.doc_ids,
            "topics": g.topic_ids,
            "words": g.word_ids,
        },
        "features": {
            "documents": g.doc_features.tolist(),
            "topics": g.topic_features.tolist(),
            "words": g.word_features.tolist(),
        },
        "edges": [
            {"kind": e.kind, "a": [e.a.kind, e.a.index], "b": [e.b.kind, e.b.index],
             "weight": e.weight}
            for e in g.edges
        ],
        "thresholds": g.thresholds,
        "counts": {"nodes": g.node_counts(), "edges": g.edge_counts(),
                   "total_nodes": g.n_nodes, "total_edges": len(g.edges)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def import_graph(path) -> HeterogeneousGraph:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    edges = [
        Edge(a=NodeRef(e["a"][0], e["a"][1]), b=NodeRef(e["b"][0], e["b"][1]),
             kind=e["kind"], weight=e["weight"])
        for e in payload["edges"]
    ]
    feats = payload["features"]
    return HeterogeneousGraph(
        doc_ids=payload["nodes"]["documents"],
        topic_ids=payload["nodes"]["topics"],
        word_ids=payload["nodes"]["words"],
        doc_features=np.asarray(feats["documents"], dtype=np.float64),
        topic_features=np.asarray(feats["topics"], dtype=np.float64),
        word_features=np.asarray(feats["words"], dtype=np.float64),
        edges=edges,
        thresholds=payload["thresholds"],
    )
