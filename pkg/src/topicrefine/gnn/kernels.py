"""Message-passing kernels: compiled extension when available, numpy fallback.

Set TOPICREFINE_KERNELS=python to force the fallback (used by the benchmark
and by tests that compare the two implementations).
"""

from __future__ import annotations

import os

import numpy as np


def _aggregate_forward_np(W, h_prev, src, dst, inv_deg):
    msg = np.einsum("eij,ej->ei", W, h_prev[src])
    agg = np.zeros((h_prev.shape[0], W.shape[1]))
    np.add.at(agg, dst, msg)
    agg *= inv_deg[:, None]
    return agg


def _aggregate_backward_np(W, h_prev, src, dst, inv_deg, g_agg):
    g_msg = g_agg[dst] * inv_deg[dst][:, None]
    g_W = np.einsum("ei,ej->eij", g_msg, h_prev[src])
    g_h = np.zeros_like(h_prev)
    np.add.at(g_h, src, np.einsum("eij,ei->ej", W, g_msg))
    return g_W, g_h


def _load():
    if os.environ.get("TOPICREFINE_KERNELS", "").lower() == "python":
        return _aggregate_forward_np, _aggregate_backward_np, "python"
    try:
        from . import _kernels

        return _kernels.aggregate_forward, _kernels.aggregate_backward, "cython"
    except ImportError:
        return _aggregate_forward_np, _aggregate_backward_np, "python"


aggregate_forward, aggregate_backward, BACKEND = _load()

numpy_aggregate_forward = _aggregate_forward_np
numpy_aggregate_backward = _aggregate_backward_np
