"""End-to-end pipeline stages and the evaluation/replication harness.

Each stage reads and writes artifacts in a per-run directory keyed by the
config hash, so stages are resumable and runs are reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

from . import backends, corpus, extraction, fusion, graphnet, metrics, sgs, stats
from .clustering import elbow_k, kmeans
from .errors import ConfigError, DomainError, StalenessError
from .gnn import GnnConfig, load_checkpoint, save_checkpoint, train

APPROACHES = [f"{src}-{m}" for src in ("original", "refined")
              for m in extraction.METHODS]


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def run_dir(cfg: dict) -> str:
    return os.path.join(cfg["run"]["output_dir"], f"run-{config_hash(cfg)[:12]}")


def _write_json(path, payload, cfg):
    payload = dict(payload)
    payload["config_hash"] = config_hash(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _read_json(path, cfg=None):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if cfg is not None and payload.get("config_hash") != config_hash(cfg):
        raise StalenessError(f"{path} was produced by a different config")
    return payload


def _file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Stage log with artifact checksums; no wall-clock state, so identical
    runs produce identical manifests."""

    def __init__(self, directory, cfg):
        self.path = os.path.join(directory, "manifest.json")
        self.cfg_hash = config_hash(cfg)
        if os.path.exists(self.path):
            with open(self.path, encoding="utf-8") as fh:
                self.data = json.load(fh)
            if self.data.get("config_hash") != self.cfg_hash:
                raise StalenessError("manifest belongs to a different config")
        else:
            self.data = {"config_hash": self.cfg_hash, "stages": []}

    def record(self, stage, artifacts):
        directory = os.path.dirname(self.path)
        entry = {
            "stage": stage,
            "artifacts": {name: _file_hash(os.path.join(directory, name))
                          for name in artifacts},
        }
        self.data["stages"] = [s for s in self.data["stages"]
                               if s["stage"] != stage]
        self.data["stages"].append(entry)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    def check_fresh(self, stage, force=False):
        directory = os.path.dirname(self.path)
        for entry in self.data["stages"]:
            if entry["stage"] != stage:
                continue
            for name, digest in entry["artifacts"].items():
                path = os.path.join(directory, name)
                if not os.path.exists(path) or _file_hash(path) != digest:
                    if force:
                        return
                    raise StalenessError(
                        f"artifact {name} from stage {stage} is stale; rerun "
                        f"the stage or pass --force")

    def require(self, stage, force=False):
        if not any(s["stage"] == stage for s in self.data["stages"]):
            raise StalenessError(f"stage {stage} has not been run yet")
        self.check_fresh(stage, force=force)


def make_backends(cfg):
    b = cfg["backends"]
    d_s, d_b = b["d_s"], b["d_b"]
    if b["mode"] == "fixture":
        chat = backends.FixtureChatBackend(b["fixture_dir"])
        embed = backends.FixtureEmbeddingBackend(b["fixture_dir"], d_s, d_b)
    elif b["mode"] == "http":
        chat = backends.HttpChatBackend(b["chat_endpoint"], b["cache_dir"])
        embed = backends.HttpEmbeddingBackend(b["embed_endpoint"], d_s, d_b)
    else:
        raise ConfigError(f"unknown backend mode {b['mode']!r}")
    return chat, embed


def stage_generate_topics(cfg, directory, manifest):
    lang = cfg["dataset"]["language"]
    docs = corpus.ingest_documents(cfg["dataset"]["corpus"], language=lang)
    chat, _ = make_backends(cfg)
    template = backends.PROMPT_TEMPLATES[lang]
    batch_size = cfg["backends"].get("batch_size", 20)
    records = []
    for i in range(0, len(docs), batch_size):
        batch = docs[i:i + batch_size]
        prompt = backends.render_prompt(batch, template)
        request = backends.LlmRequest(
            prompt=prompt, model=cfg["backends"].get("model", "gpt-4o"),
            temperature=cfg["backends"].get("temperature", 0.0))
        raw = chat.chat_complete(request)
        records.extend(corpus.parse_topic_response(raw, schema=lang))
    topics, assignments = corpus.build_topic_pool(records)
    corpus.require_nonempty_pool(topics)
    _write_json(os.path.join(directory, "corpus.json"),
                {"documents": [{"id": d.id, "text": d.text, "language": d.language}
                               for d in docs]}, cfg)
    _write_json(os.path.join(directory, "pool.json"),
                corpus.pool_to_json(topics, assignments), cfg)
    manifest.record("generate-topics", ["corpus.json", "pool.json"])


def _load_pool(cfg, directory):
    docs = [corpus.Document(id=d["id"], text=d["text"], language=d["language"])
            for d in _read_json(os.path.join(directory, "corpus.json"),
                                cfg)["documents"]]
    topics, assignments = corpus.pool_from_json(
        _read_json(os.path.join(directory, "pool.json"), cfg))
    return docs, topics, assignments


def stage_embed(cfg, directory, manifest, force=False):
    manifest.require("generate-topics", force)
    docs, topics, _ = _load_pool(cfg, directory)
    _, embed = make_backends(cfg)
    d_s, d_b = cfg["backends"]["d_s"], cfg["backends"]["d_b"]
    attn = fusion.init_attention(d_s, d_b, cfg["run"]["seed"])

    doc_ids = [d.id for d in docs]
    doc_mat = np.vstack([fusion.fuse_hybrid(embed.embed_text(d.text), attn)
                         for d in docs])
    topic_mat = np.vstack([fusion.fuse_hybrid(embed.embed_text(t.phrase), attn)
                           for t in topics])
    vocab = corpus.vocabulary(topics)
    # Vocabulary filtering: keep only words the embedding backend knows.
    words, word_vecs, word_hyb = [], [], []
    for w in vocab:
        try:
            wv = embed.embed_word(w)
        except backends.MissingEmbeddingError:
            continue
        words.append(w)
        word_vecs.append(wv.vector)
        word_hyb.append(fusion.fuse_hybrid(embed.embed_text(w), attn))
    fusion.save_hybrids(os.path.join(directory, "hybrids_docs.bin"),
                        doc_ids, doc_mat, d_s, d_b)
    fusion.save_hybrids(os.path.join(directory, "hybrids_topics.bin"),
                        [str(t.id) for t in topics], topic_mat, d_s, d_b)
    fusion.save_hybrids(os.path.join(directory, "hybrids_words.bin"),
                        words, np.vstack(word_hyb) if words else
                        np.zeros((0, d_s + d_b)), d_s, d_b)
    fusion.save_hybrids(os.path.join(directory, "wordvecs.bin"),
                        words, np.vstack(word_vecs) if words else
                        np.zeros((0, d_b)), 0, d_b)
    manifest.record("embed", ["hybrids_docs.bin", "hybrids_topics.bin",
                              "hybrids_words.bin", "wordvecs.bin"])


def _load_embeddings(directory):
    doc_ids, doc_mat, _, _ = fusion.load_hybrids(
        os.path.join(directory, "hybrids_docs.bin"))
    topic_ids, topic_mat, _, _ = fusion.load_hybrids(
        os.path.join(directory, "hybrids_topics.bin"))
    words, word_hyb, _, _ = fusion.load_hybrids(
        os.path.join(directory, "hybrids_words.bin"))
    words2, word_vec_mat, _, _ = fusion.load_hybrids(
        os.path.join(directory, "wordvecs.bin"))
    assert words == words2
    word_vectors = {w: backends.WordVector(word=w, vector=word_vec_mat[i])
                    for i, w in enumerate(words)}
    return (doc_ids, doc_mat, topic_ids, topic_mat, words, word_hyb,
            word_vectors)


def stage_similarity(cfg, directory, manifest, force=False):
    manifest.require("embed", force)
    _, topics, _ = _load_pool(cfg, directory)
    (_, _, _, topic_mat, words, _, word_vectors) = _load_embeddings(directory)
    idf = sgs.compute_idf(topics)
    scfg = cfg["sgs"]
    if scfg.get("optimize", True):
        weights, diagnostics = sgs.optimize_weights(
            topics, list(topic_mat), word_vectors, idf,
            k_max=scfg.get("k_max", 10), seed=cfg["run"]["seed"])
    else:
        weights = sgs.SgsWeights(w_wmd=scfg["w_wmd"], w_idf=scfg["w_idf"])
        diagnostics = {"grid": [], "degenerate": False, "pinned": True}
    _, topic_rel, topic_params = sgs.sgs_matrix(
        topics, list(topic_mat), word_vectors, idf, weights)
    word_phrases, word_embs = sgs.word_topics(words, word_vectors)
    _, word_rel, word_params = sgs.sgs_matrix(
        word_phrases, word_embs, word_vectors, idf, weights)
    _write_json(os.path.join(directory, "sgs_weights.json"),
                {"w_wmd": weights.w_wmd, "w_idf": weights.w_idf,
                 "diagnostics": diagnostics,
                 "topic_transform": {"mu": topic_params.mu,
                                     "sigma": topic_params.sigma},
                 "word_transform": {"mu": word_params.mu,
                                    "sigma": word_params.sigma}}, cfg)
    _write_json(os.path.join(directory, "sim_topics_relative.json"),
                topic_rel.to_json(), cfg)
    _write_json(os.path.join(directory, "sim_words_relative.json"),
                word_rel.to_json(), cfg)
    manifest.record("similarity", ["sgs_weights.json", "sim_topics_relative.json",
                                   "sim_words_relative.json"])


def stage_build_graph(cfg, directory, manifest, force=False):
    manifest.require("similarity", force)
    docs, topics, assignments = _load_pool(cfg, directory)
    (doc_ids, doc_mat, _, topic_mat, words, _, word_vectors) = \
        _load_embeddings(directory)
    topic_rel = sgs.SimilarityMatrix.from_json(
        _read_json(os.path.join(directory, "sim_topics_relative.json"), cfg))
    word_rel = sgs.SimilarityMatrix.from_json(
        _read_json(os.path.join(directory, "sim_words_relative.json"), cfg))
    doc_hybrids = {d: doc_mat[i] for i, d in enumerate(doc_ids)}
    g = graphnet.build_graph(
        [d.id for d in docs], topics, words, assignments, topic_rel, word_rel,
        doc_hybrids, topic_mat, word_vectors,
        p=cfg["graph"].get("percentile", 0.90))
    graphnet.export_graph(g, os.path.join(directory, "graph.json"))
    manifest.record("build-graph", ["graph.json"])


def stage_train(cfg, directory, manifest, force=False):
    manifest.require("build-graph", force)
    g = graphnet.import_graph(os.path.join(directory, "graph.json"))
    gcfg = GnnConfig(seed=cfg["run"]["seed"], **cfg.get("gnn", {}))
    params, refined, report = train(g, gcfg)
    save_checkpoint(os.path.join(directory, "checkpoint.bin"), params, gcfg)
    d_s, d_b = cfg["backends"]["d_s"], cfg["backends"]["d_b"]
    fusion.save_hybrids(os.path.join(directory, "refined.bin"),
                        [str(t) for t in g.topic_ids], refined, d_s, d_b)
    with open(os.path.join(directory, "losses.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, loss in enumerate(report.loss_per_epoch):
            writer.writerow([i, repr(loss)])
    manifest.record("train", ["checkpoint.bin", "refined.bin", "losses.csv"])
    return report


def _embeddings_for(source, directory):
    if source == "refined":
        _, mat, _, _ = fusion.load_hybrids(os.path.join(directory, "refined.bin"))
        return mat
    _, mat, _, _ = fusion.load_hybrids(
        os.path.join(directory, "hybrids_topics.bin"))
    return mat


def stage_extract(cfg, directory, manifest, source="refined", force=False):
    manifest.require("build-graph", force)
    if source == "refined":
        manifest.require("train", force)
    _, topics, _ = _load_pool(cfg, directory)
    g = graphnet.import_graph(os.path.join(directory, "graph.json"))
    embs = _embeddings_for(source, directory)
    _, word_hyb, _, _ = fusion.load_hybrids(
        os.path.join(directory, "hybrids_words.bin"))
    k = cfg["extraction"]["k"]
    clusters = extraction.run_extraction(g, embs, k, seed=cfg["run"]["seed"])
    scores = extraction.score_all(g, clusters, embs, word_hyb)
    phrases = [t.phrase for t in topics]
    artifacts = []
    for method in extraction.METHODS:
        tset = extraction.extract_top_k(clusters, scores[method], phrases, method)
        name = f"topicset_{source}_{method}.json"
        _write_json(os.path.join(directory, name), tset.to_json(), cfg)
        txt = f"topicset_{source}_{method}.txt"
        with open(os.path.join(directory, txt), "w", encoding="utf-8") as fh:
            fh.write(tset.to_text())
        artifacts += [name, txt]
    name = f"extraction_{source}.json"
    _write_json(os.path.join(directory, name),
                {"k": k, "labels": [int(x) for x in clusters.labels],
                 "inertia": clusters.inertia,
                 "scores": {m: list(map(float, s)) for m, s in scores.items()}},
                cfg)
    artifacts.append(name)
    manifest.record(f"extract-{source}", artifacts)


def evaluate_topic_set(tset, topics_by_id, coherence_scores, embeddings,
                       weights=None, seed=0):
    """Metrics for one extracted set; silhouette/DB re-cluster the k chosen
    embeddings with k' picked by the elbow rule."""
    ids = [tid for tid, _, _, _ in tset.topics]
    word_lists = [topics_by_id[tid].words for tid in ids]
    td = metrics.topic_diversity(word_lists)
    jac = metrics.mean_pairwise_jaccard(word_lists)
    coh = metrics.coherence_mean([coherence_scores[tid] for tid in ids])
    sel = np.asarray([embeddings[tid] for tid in ids])
    ks = list(range(2, min(10, len(ids) - 1) + 1))
    if not ks:
        raise DomainError("too few topics to evaluate clustering metrics")
    inertias = [kmeans(sel, k, n_init=10, seed=seed).inertia for k in ks]
    kp = elbow_k(inertias, ks)
    clusters = kmeans(sel, kp, n_init=10, seed=seed)
    sil = metrics.silhouette(sel, clusters.labels)
    db = metrics.davies_bouldin(sel, clusters.labels)
    return metrics.build_report(td, jac, coh, sil, db, weights)


def _composite_weights(cfg):
    if "composite" in cfg:
        return metrics.CompositeWeights(**cfg["composite"])
    return metrics.CompositeWeights()


def stage_evaluate(cfg, directory, manifest, source="refined", force=False):
    manifest.require(f"extract-{source}", force)
    _, topics, _ = _load_pool(cfg, directory)
    topics_by_id = {t.id: t for t in topics}
    embs = _embeddings_for(source, directory)
    ext = _read_json(os.path.join(directory, f"extraction_{source}.json"), cfg)
    weights = _composite_weights(cfg)
    composites = {}
    sets = []
    artifacts = []
    for method in extraction.METHODS:
        payload = _read_json(
            os.path.join(directory, f"topicset_{source}_{method}.json"), cfg)
        tset = extraction.TopicSet(
            method=method,
            topics=[(t["id"], t["phrase"], t["cluster"], t["score"])
                    for t in payload["topics"]])
        report = evaluate_topic_set(tset, topics_by_id,
                                    ext["scores"]["coherence"], embs,
                                    weights, seed=cfg["run"]["seed"])
        name = f"metrics_{source}_{method}.json"
        _write_json(os.path.join(directory, name), report.to_json(), cfg)
        artifacts.append(name)
        composites[method] = report.composite
        sets.append(tset)
    best, _ = extraction.select_best_method(sets, composites)
    name = f"selection_{source}.json"
    _write_json(os.path.join(directory, name),
                {"selected_method": best.method, "composites": composites}, cfg)
    artifacts.append(name)
    manifest.record(f"evaluate-{source}", artifacts)
    return best.method, composites


def replicate(cfg, directory, n=5, base_seed=None):
    """Run extraction+evaluation n times per approach with distinct seeds."""
    _, topics, _ = _load_pool(cfg, directory)
    topics_by_id = {t.id: t for t in topics}
    g = graphnet.import_graph(os.path.join(directory, "graph.json"))
    _, word_hyb, _, _ = fusion.load_hybrids(
        os.path.join(directory, "hybrids_words.bin"))
    phrases = [t.phrase for t in topics]
    weights = _composite_weights(cfg)
    k = cfg["extraction"]["k"]
    if base_seed is None:
        base_seed = cfg["run"]["seed"]
    if n < 1:
        raise DomainError("need at least one replication")
    replications = {}
    partial = {}
    try:
        for source in ("original", "refined"):
            embs = _embeddings_for(source, directory)
            for method in extraction.METHODS:
                name = f"{source}-{method}"
                samples, seeds = [], []
                for seed in range(base_seed, base_seed + n):
                    clusters = extraction.run_extraction(g, embs, k, seed=seed)
                    scores = extraction.score_all(g, clusters, embs, word_hyb)
                    tset = extraction.extract_top_k(clusters, scores[method],
                                                    phrases, method)
                    report = evaluate_topic_set(tset, topics_by_id,
                                                scores["coherence"], embs,
                                                weights, seed=seed)
                    samples.append(report.composite)
                    seeds.append(seed)
                rep = stats.ReplicationSet(approach=name, samples=samples,
                                           seeds=seeds)
                replications[name] = rep
                partial[name] = rep
    except Exception:
        if partial:
            _write_partial_validation(directory, partial)
        raise
    return replications


def _write_partial_validation(directory, partial):
    path = os.path.join(directory, "validation_partial.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({name: r.samples for name, r in partial.items()}, fh,
                  sort_keys=True)
        fh.write("\n")


def stage_validate(cfg, directory, manifest, n=5, force=False):
    manifest.require("train", force)
    replications = replicate(cfg, directory, n=n)
    desc, ttests, aov = stats.replication_tables(replications)
    with open(os.path.join(directory, "validation_descriptive.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["approach", "mean", "std", "min", "max",
                    "ci_low", "ci_high"])
        for name in sorted(desc):
            d = desc[name]
            w.writerow([name, repr(d.mean), repr(d.std), repr(d.min),
                        repr(d.max), repr(d.ci_low), repr(d.ci_high)])
    with open(os.path.join(directory, "validation_ttests.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["approach", "mean_difference", "t_statistic", "p_value",
                    "significant"])
        for name, r in ttests:
            w.writerow([name, repr(r.mean_difference), repr(r.t_statistic),
                        repr(r.p_value), r.significant])
    with open(os.path.join(directory, "validation_anova.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_statistic", "p_value", "eta_squared"])
        w.writerow([repr(aov.f_statistic), repr(aov.p_value),
                    repr(aov.eta_squared)])
    manifest.record("validate", ["validation_descriptive.csv",
                                 "validation_ttests.csv",
                                 "validation_anova.csv"])


def stage_sensitivity(cfg, directory, manifest, deltas=(0.01, 0.05),
                      source="refined", force=False):
    manifest.require(f"evaluate-{source}", force)
    selection = _read_json(os.path.join(directory, f"selection_{source}.json"),
                           cfg)
    method = selection["selected_method"]
    report = _read_json(
        os.path.join(directory, f"metrics_{source}_{method}.json"), cfg)
    rows = metrics.sensitivity(
        report["topic_diversity"], report["jaccard_mean"],
        report["coherence_mean"], report["silhouette"],
        report["davies_bouldin"], _composite_weights(cfg), deltas)
    with open(os.path.join(directory, "sensitivity.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["weight", "delta", "composite"])
        for name, delta, score in rows:
            w.writerow([name, repr(delta), repr(score)])
    manifest.record("sensitivity", ["sensitivity.csv"])


def run_all(cfg, ablation="refined", replications=None, deltas=None):
    """Execute the full stage sequence; returns the run directory."""
    directory = run_dir(cfg)
    os.makedirs(directory, exist_ok=True)
    manifest = Manifest(directory, cfg)
    stage_generate_topics(cfg, directory, manifest)
    stage_embed(cfg, directory, manifest)
    stage_similarity(cfg, directory, manifest)
    stage_build_graph(cfg, directory, manifest)
    stage_train(cfg, directory, manifest)
    sources = ["refined"]
    if ablation == "original":
        sources.append("original")
    for source in sources:
        stage_extract(cfg, directory, manifest, source=source)
        stage_evaluate(cfg, directory, manifest, source=source)
    if replications:
        stage_validate(cfg, directory, manifest, n=replications)
    stage_sensitivity(cfg, directory, manifest,
                      deltas=deltas or (0.01, 0.05))
    return directory
