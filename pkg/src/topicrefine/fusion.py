"""Sentence/token embedding fusion via a fixed attention layer.

The sentence-level vector is projected onto the token space, scores against
each token vector give softmax weights, and the attended token mix is
concatenated onto the sentence vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .backends import EmbeddingBundle
from .errors import DomainError

_MAGIC = b"TRHV"
_VERSION = 1


@dataclass(frozen=True)
class AttentionParams:
    weight: np.ndarray  # d_s x d_b
    bias: np.ndarray    # d_b
    seed: int


def init_attention(d_s, d_b, seed):
    """Xavier-uniform weight, zero bias; deterministic in the seed."""
    if d_s < 1 or d_b < 1:
        raise DomainError("embedding dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    a = np.sqrt(6.0 / (d_s + d_b))
    weight = rng.uniform(-a, a, size=(d_s, d_b))
    return AttentionParams(weight=weight, bias=np.zeros(d_b), seed=seed)


def softmax(x):
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / e.sum()


def fuse_hybrid(bundle: EmbeddingBundle, params: AttentionParams) -> np.ndarray:
    """Concatenate the sentence vector with the attention-weighted token mix."""
    tokens = bundle.token_matrix
    if tokens.shape[0] == 0:
        raise DomainError("cannot fuse an empty token matrix")
    query = bundle.sentence_vector @ params.weight + params.bias
    scores = tokens @ query
    weights = softmax(scores)
    attended = weights @ tokens
    return np.concatenate([bundle.sentence_vector, attended])


def save_hybrids(path, ids, matrix, d_s, d_b):
    """Binary cache: header + (id-length, id-bytes, float64 vector) records."""
    matrix = np.asarray(matrix, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", _VERSION, d_s, d_b, len(ids)))
        for ident, row in zip(ids, matrix):
            raw = ident.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(row.tobytes())


def load_hybrids(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise DomainError(f"not a hybrid cache file: {path}")
        version, d_s, d_b, count = struct.unpack("<IIII", fh.read(16))
        if version != _VERSION:
            raise DomainError(f"unsupported hybrid cache version {version}")
        dim = d_s + d_b
        ids, rows = [], []
        for _ in range(count):
            (n,) = struct.unpack("<I", fh.read(4))
            ids.append(fh.read(n).decode("utf-8"))
            rows.append(np.frombuffer(fh.read(8 * dim), dtype="<f8"))
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    return ids, matrix, d_s, d_b
