"""Stage (a): duration-penalised DP over frames with codebook span costs.

Jointly segments a feature sequence into contiguous spans and assigns each
span the codebook unit minimizing its summed squared distance, with a
duration penalty encouraging longer spans.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .codebook import Codebook
from .corpus_io import FeatureSequence


@dataclass(frozen=True)
class UnitSegment:
    a: int  # start frame, inclusive
    b: int  # end frame, inclusive
    z: int  # code index


@dataclass(frozen=True)
class UnitSegmentation:
    utt_id: str
    segments: List[UnitSegment]
    objective: float


@dataclass(frozen=True)
class DpdpUnitConfig:
    lam: float = 2.0
    max_len: int = 25
    penalty: str = "duration"  # or "count"; identical argmin, see dp module

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


class _SpanCosts:
    """Prefix-sum span costs: sum_{t=a}^{b} ||x_t - e_k||^2 in O(K) per span.

    sum ||x_t - e||^2 = sum ||x_t||^2 - 2 e . sum x_t + n ||e||^2
    """

    def __init__(self, frames: np.ndarray, cb: Codebook):
        x = np.asarray(frames, dtype=np.float64)
        self.sum_x = np.zeros((x.shape[0] + 1, x.shape[1]))
        np.cumsum(x, axis=0, out=self.sum_x[1:])
        self.sum_sq = np.zeros(x.shape[0] + 1)
        np.cumsum(np.einsum("td,td->t", x, x), out=self.sum_sq[1:])
        self.centroids = cb.centroids
        self.cent_sq = np.einsum("kd,kd->k", cb.centroids, cb.centroids)

    def best_code(self, a: int, b: int) -> Tuple[int, float]:
        """argmin_k and min of the span cost; ties -> smallest k."""
        n = b - a + 1
        s = self.sum_x[b + 1] - self.sum_x[a]
        q = self.sum_sq[b + 1] - self.sum_sq[a]
        costs = q - 2.0 * (self.centroids @ s) + n * self.cent_sq
        k = int(costs.argmin())
        return k, float(costs[k])

    def all_starts(self, b: int, max_len: int) -> Tuple[np.ndarray, np.ndarray]:
        """Best codes/costs for all spans (a, b) with b-a+1 in 1..max_len.

        Returns (codes, costs) indexed by length-1, length ascending.
        """
        lo = max(0, b - max_len + 1)
        starts = np.arange(b, lo - 1, -1)  # lengths 1..L ascending
        lens = b - starts + 1
        s = self.sum_x[b + 1] - self.sum_x[starts]  # (L, D)
        q = self.sum_sq[b + 1] - self.sum_sq[starts]  # (L,)
        costs = q[:, None] - 2.0 * (s @ self.centroids.T) + lens[:, None] * self.cent_sq
        codes = costs.argmin(axis=1)
        return codes, costs[np.arange(len(starts)), codes]


def span_cost(x: FeatureSequence, a: int, b: int, cb: Codebook) -> Tuple[int, float]:
    """Best code and minimal summed squared distance for frames a..b inclusive."""
    if not (0 <= a <= b < x.num_frames):
        raise IndexError(f"span ({a}, {b}) out of range for T={x.num_frames}")
    return _SpanCosts(x.frames, cb).best_code(a, b)


def dpdp_units(x: FeatureSequence, cb: Codebook, cfg: DpdpUnitConfig) -> UnitSegmentation:
    """Globally optimal duration-penalised segmentation of x into coded units."""
    T = x.num_frames
    costs = _SpanCosts(x.frames, cb)

    alpha = np.full(T + 1, math.inf)
    alpha[0] = 0.0
    back_len = np.zeros(T + 1, dtype=np.int64)
    back_code = np.zeros(T + 1, dtype=np.int64)
    for t in range(1, T + 1):
        b = t - 1
        codes, span = costs.all_starts(b, cfg.max_len)
        lens = np.arange(1, len(span) + 1)
        if cfg.penalty == "duration":
            values = alpha[t - lens] + span - cfg.lam * (lens - 1)
        else:
            values = alpha[t - lens] + span + cfg.lam
        best = int(values.argmin())  # first occurrence = shortest span on ties
        alpha[t] = values[best]
        back_len[t] = best + 1
        back_code[t] = codes[best]

    segments = []
    t = T
    while t > 0:
        length = int(back_len[t])
        segments.append(UnitSegment(a=t - length, b=t - 1, z=int(back_code[t])))
        t -= length
    segments.reverse()
    return UnitSegmentation(utt_id=x.utt_id, segments=segments, objective=float(alpha[T]))
