"""Shared brute-force oracles used by unit tests and the acceptance suite."""
import itertools
import math

import numpy as np
import pytest

from dpdpseg.codebook import Codebook
from dpdpseg.corpus_io import FeatureSequence
from dpdpseg.seq_autoencoder import forward_nll
from dpdpseg.unit_segmenter import span_cost


def naive_span_cost(frames, a, b, centroids):
    """Double-loop span cost: independent of the prefix-sum implementation."""
    best_k, best = 0, math.inf
    for k, e in enumerate(centroids):
        total = 0.0
        for t in range(a, b + 1):
            diff = np.asarray(frames[t], dtype=np.float64) - np.asarray(e, dtype=np.float64)
            total += float(diff @ diff)
        if total < best:
            best_k, best = k, total
    return best_k, best


def all_segmentations(n):
    """Every contiguous cover of n items as a list of (a, b) inclusive spans."""
    for mask in itertools.product([0, 1], repeat=n - 1):
        bounds = [0] + [i + 1 for i, m in enumerate(mask) if m] + [n]
        yield [(a, b - 1) for a, b in zip(bounds, bounds[1:])]


def _brute_force_from_table(n, cost, lam, max_len, penalty):
    best = math.inf
    for spans in all_segmentations(n):
        if any(b - a + 1 > max_len for a, b in spans):
            continue
        obj = 0.0
        for a, b in spans:
            c = cost[(a, b)]
            obj += c - lam * (b - a) if penalty == "duration" else c + lam
        best = min(best, obj)
    return best


def brute_force_units(x: FeatureSequence, cb: Codebook, lam, max_len, penalty="duration"):
    """Exhaustive minimum of the unit-stage objective."""
    n = x.num_frames
    cost = {
        (a, b): span_cost(x, a, b, cb)[1] for a in range(n) for b in range(a, n)
    }
    return _brute_force_from_table(n, cost, lam, max_len, penalty)


def brute_force_words(codes, model, lam, max_len, penalty="duration"):
    """Exhaustive minimum of the word-stage objective."""
    n = len(codes)
    cost = {
        (a, b): forward_nll(model, codes[a : b + 1])
        for a in range(n)
        for b in range(a, n)
    }
    return _brute_force_from_table(n, cost, lam, max_len, penalty)


def brute_force_kmeans_1d(points, K):
    """Optimal K-means inertia in 1-D by enumerating contiguous partitions.

    In 1-D the optimal clusters are contiguous in sorted order.
    """
    pts = np.sort(np.asarray(points, dtype=np.float64))
    n = len(pts)

    def block_inertia(lo, hi):
        seg = pts[lo:hi]
        return float(((seg - seg.mean()) ** 2).sum())

    best = math.inf
    for cuts in itertools.combinations(range(1, n), K - 1):
        bounds = [0, *cuts, n]
        inertia = sum(block_inertia(a, b) for a, b in zip(bounds, bounds[1:]))
        best = min(best, inertia)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
