"""K-means (k-means++ seeding, Lloyd iterations) and the elbow rule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass
class ClusterResult:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list = field(default_factory=list)


def _kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    dist_sq = np.sum((X - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = dist_sq.sum()
        if total <= 0:
            # All remaining points coincide with a centroid; pick any.
            idx = rng.integers(n)
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(dist_sq), r))
            idx = min(idx, n - 1)
        centroids[i] = X[idx]
        dist_sq = np.minimum(dist_sq, np.sum((X - centroids[i]) ** 2, axis=1))
    return centroids


def _assign(X, centroids):
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia = d2[np.arange(X.shape[0]), labels].sum()
    return labels, float(inertia), d2


def _repair_empty(X, labels, centroids, d2):
    """Reassign the point farthest from its centroid to each empty cluster."""
    k = centroids.shape[0]
    for c in range(k):
        if np.any(labels == c):
            continue
        own = d2[np.arange(X.shape[0]), labels]
        # Don't steal from singleton clusters.
        counts = np.bincount(labels, minlength=k)
        candidates = np.where(counts[labels] > 1)[0]
        if candidates.size == 0:
            continue
        far = candidates[np.argmax(own[candidates])]
        labels[far] = c
        centroids[c] = X[far]
    return labels, centroids


def _lloyd(X, k, rng, tol, max_iter):
    centroids = _kmeans_pp_init(X, k, rng)
    history = []
    labels, inertia, d2 = _assign(X, centroids)
    labels, centroids = _repair_empty(X, labels, centroids, d2)
    for _ in range(max_iter):
        for c in range(k):
            mask = labels == c
            if mask.any():
                centroids[c] = X[mask].mean(axis=0)
        labels, new_inertia, d2 = _assign(X, centroids)
        labels, centroids = _repair_empty(X, labels, centroids, d2)
        labels, new_inertia, d2 = _assign(X, centroids)
        history.append(new_inertia)
        if inertia - new_inertia <= tol:
            inertia = new_inertia
            break
        inertia = new_inertia
    return ClusterResult(k=k, labels=labels, centroids=centroids,
                         inertia=inertia, inertia_history=history)


def kmeans(X, k, n_init=10, seed=0, tol=1e-6, max_iter=300):
    """Best-of-n_init k-means; runs are seeded seed+run for determinism."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DomainError("kmeans expects a non-empty 2-D matrix")
    n = X.shape[0]
    if k > n or k < 1:
        raise DomainError(f"k={k} out of range for n={n} points")
    best = None
    for run in range(n_init):
        rng = np.random.default_rng(seed + run)
        result = _lloyd(X, k, rng, tol, max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def elbow_k(inertias, ks):
    """Pick k at the maximum second difference of the inertia curve."""
    if len(ks) == 1:
        return ks[0]
    if len(ks) == 2:
        return ks[0] if inertias[0] <= inertias[1] else ks[1]
    curv = [inertias[i - 1] - 2 * inertias[i] + inertias[i + 1]
            for i in range(1, len(ks) - 1)]
    return ks[1 + int(np.argmax(curv))]
