"""Seeded, deterministic K-means used for acoustic units and the lexicon."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .corpus_io import DataError


class InsufficientPointsError(ValueError):
    """Fewer points than clusters requested."""


@dataclass(frozen=True)
class KMeansConfig:
    K: int
    max_iters: int = 100
    seed: int = 0
    tol: float = 1e-6  # relative inertia improvement threshold
    init: str = "kmeans++"  # or "forgy"
    restarts: int = 5

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.init not in ("kmeans++", "forgy"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class Codebook:
    """K centroids over a D-dimensional feature space."""

    centroids: np.ndarray  # (K, D) float64

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1:
            raise DataError("centroids must be a K x D matrix with K >= 1")
        if not np.all(np.isfinite(c)):
            raise DataError("non-finite centroid values")
        object.__setattr__(self, "centroids", c)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """All pairwise squared distances, (N, K)."""
    # computed exactly (no ||a||^2 - 2ab + ||b||^2 shortcut) to keep
    # tie-breaking and zero distances robust
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _init_centroids(points: np.ndarray, K: int, rng: np.random.Generator, init: str) -> np.ndarray:
    n = points.shape[0]
    if init == "forgy":
        idx = rng.choice(n, size=K, replace=False)
        return points[idx].copy()
    # k-means++
    centroids = np.empty((K, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    d2 = _sq_dists(points, centroids[:1]).min(axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            centroids[k] = points[rng.integers(n)]
        else:
            centroids[k] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, _sq_dists(points, centroids[k : k + 1])[:, 0])
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray, cfg: KMeansConfig):
    """Lloyd iterations from the given initialization.

    Returns (centroids, inertia, inertia_trace). Empty clusters are reseeded
    with the point farthest from its assigned centroid.
    """
    n = points.shape[0]
    prev_inertia = np.inf
    trace = []
    for _ in range(cfg.max_iters):
        d2 = _sq_dists(points, centroids)
        assign = d2.argmin(axis=1)  # argmin already breaks ties toward smallest k
        min_d2 = d2[np.arange(n), assign]
        inertia = float(min_d2.sum())
        trace.append(inertia)

        new_centroids = centroids.copy()
        counts = np.bincount(assign, minlength=cfg.K)
        for k in range(cfg.K):
            if counts[k] > 0:
                new_centroids[k] = points[assign == k].mean(axis=0)
        # reseed empties with the currently worst-explained point
        for k in np.flatnonzero(counts == 0):
            far = int(min_d2.argmax())
            new_centroids[k] = points[far]
            min_d2 = min_d2.copy()
            min_d2[far] = 0.0
        centroids = new_centroids

        if prev_inertia < np.inf:
            rel = (prev_inertia - inertia) / prev_inertia if prev_inertia > 0 else 0.0
            if rel < cfg.tol:
                break
        prev_inertia = inertia
    d2 = _sq_dists(points, centroids)
    inertia = float(d2.min(axis=1).sum())
    trace.append(inertia)
    return centroids, inertia, trace


def fit_kmeans(points: np.ndarray, cfg: KMeansConfig) -> Codebook:
    """Fit K-means with seeded restarts; returns the lowest-inertia codebook.

    Deterministic given (points order, cfg). Raises InsufficientPointsError
    when N < K.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DataError("points must be an N x D matrix")
    if not np.all(np.isfinite(points)):
        raise DataError("non-finite input points")
    if points.shape[0] < cfg.K:
        raise InsufficientPointsError(
            f"need at least K={cfg.K} points, got {points.shape[0]}"
        )
    best = None
    best_inertia = np.inf
    for r in range(cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, r]))
        centroids = _init_centroids(points, cfg.K, rng, cfg.init)
        centroids, inertia, trace = _lloyd(points, centroids, cfg)
        for a, b in zip(trace, trace[1:]):
            assert b <= a + 1e-9 * max(1.0, abs(a)), "inertia increased"
        if inertia < best_inertia:
            best_inertia = inertia
            best = centroids
    return Codebook(centroids=best)


def assign(cb: Codebook, v: np.ndarray) -> Tuple[int, float]:
    """Nearest centroid index and its squared distance; ties -> smallest k."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (cb.dim,):
        raise ValueError(f"expected vector of dim {cb.dim}, got shape {v.shape}")
    diff = cb.centroids - v
    d2 = np.einsum("kd,kd->k", diff, diff)
    k = int(d2.argmin())
    return k, float(d2[k])


def assign_batch(cb: Codebook, vs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized assign over rows of vs."""
    vs = np.asarray(vs, dtype=np.float64)
    d2 = _sq_dists(vs, cb.centroids)
    idx = d2.argmin(axis=1)
    return idx, d2[np.arange(vs.shape[0]), idx]
