"""Exact DP over contiguous segmentations with a duration or count penalty.

Both penalty forms have identical argmins over full covers: the total span
duration is fixed, so rewarding long segments (duration form) is the same as
charging per segment (count form) up to a constant.
"""
from __future__ import annotations

import math
from typing import Callable, List, Tuple


def dpdp_segment(
    num_items: int,
    span_cost: Callable[[int, int], float],
    lam: float,
    max_len: int,
    penalty: str = "duration",
) -> Tuple[List[Tuple[int, int]], float]:
    """Minimize sum of span costs plus penalty over contiguous covers.

    span_cost(a, b) scores the inclusive span a..b. The duration form adds
    -lam*(b - a) per span; the count form adds +lam per span. Ties between
    equal-scoring candidates go to the shorter final span. Returns the list
    of (a, b) inclusive spans and the achieved objective.
    """
    if num_items < 1:
        raise ValueError("need at least one item")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if penalty not in ("duration", "count"):
        raise ValueError(f"unknown penalty form {penalty!r}")

    alpha = [math.inf] * (num_items + 1)
    alpha[0] = 0.0
    back = [0] * (num_items + 1)
    for t in range(1, num_items + 1):
        best = math.inf
        best_len = 0
        # ascending length + strict '<' keeps the shortest final span on ties
        for length in range(1, min(max_len, t) + 1):
            cost = span_cost(t - length, t - 1)
            if penalty == "duration":
                value = alpha[t - length] + cost - lam * (length - 1)
            else:
                value = alpha[t - length] + cost + lam
            if value < best:
                best = value
                best_len = length
        alpha[t] = best
        back[t] = best_len

    spans = []
    t = num_items
    while t > 0:
        length = back[t]
        spans.append((t - length, t - 1))
        t -= length
    spans.reverse()
    return spans, alpha[num_items]
