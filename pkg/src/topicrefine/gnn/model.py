"""Edge-conditioned graph network that refines topic embeddings.

Per layer, an MLP turns each edge's feature vector into a dense weight
matrix; messages are mean-pooled, layer-normalized, passed through ReLU and
dropout, with residual connections from the second layer on. The output head
maps topic activations back to the input embedding dimension, trained with
an MSE reconstruction loss and Adam.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NumericError
from ..graphnet import DOC, TOPIC, WORD, HeterogeneousGraph, edge_feature
from .kernels import aggregate_backward, aggregate_forward

_LN_EPS = 1e-5
_CKPT_MAGIC = b"TRCK"


@dataclass(frozen=True)
class GnnConfig:
    hidden_dim: int = 64
    n_layers: int = 3
    dropout: float = 0.2
    lr: float = 0.001
    epochs: int = 100
    edge_mlp_hidden: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise DomainError("hidden_dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise DomainError("dropout must be in [0,1)")
        if self.lr <= 0:
            raise DomainError("lr must be positive")


@dataclass
class TrainReport:
    loss_per_epoch: list
    final_loss: float
    seed: int


def _xavier(rng, fan_in, fan_out, shape=None):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape or (fan_in, fan_out))


def param_names(cfg: GnnConfig):
    names = []
    for kind in (DOC, TOPIC, WORD):
        names += [f"proj_{kind}_W", f"proj_{kind}_b"]
    for l in range(cfg.n_layers):
        names += [f"l{l}_mlp_W1", f"l{l}_mlp_b1", f"l{l}_mlp_W2", f"l{l}_mlp_b2",
                  f"l{l}_ln_g", f"l{l}_ln_b"]
    names += ["head_W", "head_b"]
    return names


def init_params(g: HeterogeneousGraph, cfg: GnnConfig):
    rng = np.random.default_rng(cfg.seed)
    h = cfg.hidden_dim
    m = cfg.edge_mlp_hidden
    dims = {DOC: g.doc_features.shape[1] if g.doc_features.size else g.topic_features.shape[1],
            TOPIC: g.topic_features.shape[1],
            WORD: g.word_features.shape[1] if g.word_features.size else 1}
    params = {}
    for kind in (DOC, TOPIC, WORD):
        params[f"proj_{kind}_W"] = _xavier(rng, dims[kind], h)
        params[f"proj_{kind}_b"] = np.zeros(h)
    for l in range(cfg.n_layers):
        params[f"l{l}_mlp_W1"] = _xavier(rng, 5, m)
        params[f"l{l}_mlp_b1"] = np.zeros(m)
        params[f"l{l}_mlp_W2"] = _xavier(rng, m, h * h)
        params[f"l{l}_mlp_b2"] = np.zeros(h * h)
        params[f"l{l}_ln_g"] = np.ones(h)
        params[f"l{l}_ln_b"] = np.zeros(h)
    out_dim = g.topic_features.shape[1]
    params["head_W"] = _xavier(rng, h, out_dim)
    params["head_b"] = np.zeros(out_dim)
    return params


@dataclass
class GraphTensors:
    """Directed-edge arrays precomputed from the undirected graph."""

    src: np.ndarray
    dst: np.ndarray
    edge_feats: np.ndarray
    inv_deg: np.ndarray
    n_nodes: int
    topic_slice: slice
    counts: dict = field(default_factory=dict)


def prepare(g: HeterogeneousGraph) -> GraphTensors:
    n = g.n_nodes
    src, dst, feats = [], [], []
    for e in g.edges:
        ia, ib = g.global_index(e.a), g.global_index(e.b)
        f = edge_feature(e)
        src += [ia, ib]
        dst += [ib, ia]
        feats += [f, f]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    feats = np.asarray(feats, dtype=np.float64) if feats else np.zeros((0, 5))
    deg = np.bincount(dst, minlength=n).astype(np.float64) if len(dst) else np.zeros(n)
    inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    nd, nt = len(g.doc_ids), len(g.topic_ids)
    return GraphTensors(src=src, dst=dst, edge_feats=feats, inv_deg=inv_deg,
                        n_nodes=n, topic_slice=slice(nd, nd + nt),
                        counts=g.node_counts())


def _project_inputs(g: HeterogeneousGraph, params):
    rows = []
    for kind, feats in ((DOC, g.doc_features), (TOPIC, g.topic_features),
                        (WORD, g.word_features)):
        if feats.shape[0]:
            rows.append(feats @ params[f"proj_{kind}_W"] + params[f"proj_{kind}_b"])
    h0 = np.vstack(rows)
    return h0


def forward(g, params, cfg, mode="eval", rng=None, tensors=None, masks=None):
    """Run the network; returns (refined topic matrix, cache for backward)."""
    train = mode == "train"
    if train and rng is None and masks is None:
        raise DomainError("train mode needs an rng or explicit dropout masks")
    t = tensors or prepare(g)
    h_cur = _project_inputs(g, params)
    cache = {"tensors": t, "h0": h_cur, "layers": [], "masks": [], "mode": mode}
    keep = 1.0 - cfg.dropout
    for l in range(cfg.n_layers):
        F = t.edge_feats
        a1 = np.maximum(F @ params[f"l{l}_mlp_W1"] + params[f"l{l}_mlp_b1"], 0.0)
        Wflat = a1 @ params[f"l{l}_mlp_W2"] + params[f"l{l}_mlp_b2"]
        W = Wflat.reshape(-1, cfg.hidden_dim, cfg.hidden_dim)
        agg = aggregate_forward(W, h_cur, t.src, t.dst, t.inv_deg)
        pre = agg + h_cur if l >= 1 else agg  # residual from the second layer
        mu = pre.mean(axis=1, keepdims=True)
        var = pre.var(axis=1, keepdims=True)
        istd = 1.0 / np.sqrt(var + _LN_EPS)
        xhat = (pre - mu) * istd
        y = xhat * params[f"l{l}_ln_g"] + params[f"l{l}_ln_b"]
        r = np.maximum(y, 0.0)
        if train and cfg.dropout > 0.0:
            if masks is not None:
                mask = masks[l]
            else:
                mask = rng.random(r.shape) >= cfg.dropout
            h_next = r * mask / keep
        else:
            mask = None
            h_next = r
        if not np.isfinite(h_next).all():
            raise NumericError(f"non-finite activations at layer {l}")
        cache["layers"].append({"a1": a1, "W": W, "h_prev": h_cur, "xhat": xhat,
                                "istd": istd, "y": y, "r": r})
        cache["masks"].append(mask)
        h_cur = h_next
    cache["h_final"] = h_cur
    topics_h = h_cur[t.topic_slice]
    refined = topics_h @ params["head_W"] + params["head_b"]
    if not np.isfinite(refined).all():
        raise NumericError("non-finite refined embeddings")
    return refined, cache


def mse_loss(refined, original):
    refined = np.asarray(refined)
    original = np.asarray(original)
    if refined.shape != original.shape:
        raise DomainError(f"shape mismatch {refined.shape} vs {original.shape}")
    diff = refined - original
    return float((diff ** 2).sum() / refined.shape[0])


def backward(g, params, cfg, cache, refined, original):
    """Exact gradients of mse_loss with respect to every parameter."""
    t = cache["tensors"]
    n_topics = refined.shape[0]
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    g_ref = 2.0 * (refined - original) / n_topics

    topics_h = cache["h_final"][t.topic_slice]
    grads["head_W"] = topics_h.T @ g_ref
    grads["head_b"] = g_ref.sum(axis=0)
    g_h = np.zeros((t.n_nodes, cfg.hidden_dim))
    g_h[t.topic_slice] = g_ref @ params["head_W"].T

    keep = 1.0 - cfg.dropout
    train = cache["mode"] == "train"
    for l in reversed(range(cfg.n_layers)):
        lc = cache["layers"][l]
        mask = cache["masks"][l]
        if train and mask is not None:
            g_h = g_h * mask / keep
        g_y = g_h * (lc["y"] > 0)
        grads[f"l{l}_ln_g"] = (g_y * lc["xhat"]).sum(axis=0)
        grads[f"l{l}_ln_b"] = g_y.sum(axis=0)
        g_xhat = g_y * params[f"l{l}_ln_g"]
        mean_gx = g_xhat.mean(axis=1, keepdims=True)
        mean_gxx = (g_xhat * lc["xhat"]).mean(axis=1, keepdims=True)
        g_pre = lc["istd"] * (g_xhat - mean_gx - lc["xhat"] * mean_gxx)

        g_W, g_hprev = aggregate_backward(lc["W"], lc["h_prev"], t.src, t.dst,
                                          t.inv_deg, g_pre)
        if l >= 1:
            g_hprev = g_hprev + g_pre  # residual path

        gz = g_W.reshape(g_W.shape[0], -1)
        grads[f"l{l}_mlp_W2"] = lc["a1"].T @ gz
        grads[f"l{l}_mlp_b2"] = gz.sum(axis=0)
        ga1 = (gz @ params[f"l{l}_mlp_W2"].T) * (lc["a1"] > 0)
        grads[f"l{l}_mlp_W1"] = t.edge_feats.T @ ga1
        grads[f"l{l}_mlp_b1"] = ga1.sum(axis=0)
        g_h = g_hprev

    # Split the input gradient back into the per-kind projections.
    offset = 0
    for kind, feats in ((DOC, g.doc_features), (TOPIC, g.topic_features),
                        (WORD, g.word_features)):
        n_k = feats.shape[0]
        if n_k:
            g_k = g_h[offset:offset + n_k]
            grads[f"proj_{kind}_W"] = feats.T @ g_k
            grads[f"proj_{kind}_b"] = g_k.sum(axis=0)
            offset += n_k
    return grads


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @staticmethod
    def init(params):
        return AdamState(m={k: np.zeros_like(v) for k, v in params.items()},
                         v={k: np.zeros_like(v) for k, v in params.items()})


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    out = {}
    for k, p in params.items():
        gk = grads[k]
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * gk
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * gk * gk
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        out[k] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return out, state


def train(g: HeterogeneousGraph, cfg: GnnConfig):
    """Full-batch training; final refined embeddings come from an eval pass."""
    tensors = prepare(g)
    params = init_params(g, cfg)
    state = AdamState.init(params)
    rng = np.random.default_rng(cfg.seed + 1)  # dropout stream
    original = g.topic_features
    losses = []
    for epoch in range(cfg.epochs):
        try:
            refined, cache = forward(g, params, cfg, mode="train", rng=rng,
                                     tensors=tensors)
            loss = mse_loss(refined, original)
            grads = backward(g, params, cfg, cache, refined, original)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from exc
        losses.append(loss)
        params, state = adam_step(params, grads, state, cfg.lr)
    refined, _ = forward(g, params, cfg, mode="eval", tensors=tensors)
    report = TrainReport(loss_per_epoch=losses,
                         final_loss=losses[-1] if losses else float("nan"),
                         seed=cfg.seed)
    return params, refined, report


def save_checkpoint(path, params, cfg: GnnConfig):
    order = sorted(params)
    header = {
        "config": {"hidden_dim": cfg.hidden_dim, "n_layers": cfg.n_layers,
                   "dropout": cfg.dropout, "lr": cfg.lr, "epochs": cfg.epochs,
                   "edge_mlp_hidden": cfg.edge_mlp_hidden, "seed": cfg.seed},
        "shapes": {k: list(params[k].shape) for k in order},
        "order": order,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for k in order:
            fh.write(np.ascontiguousarray(params[k], dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _CKPT_MAGIC:
            raise DomainError(f"not a checkpoint file: {path}")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode("utf-8"))
        params = {}
        for k in header["order"]:
            shape = tuple(header["shapes"][k])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            params[k] = arr.copy()
    cfg = GnnConfig(**header["config"])
    return params, cfg
