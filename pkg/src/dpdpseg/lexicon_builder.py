"""Stages (c)+(d): average-pooled acoustic word embeddings, K-means lexicon."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .codebook import Codebook, InsufficientPointsError, KMeansConfig, assign_batch, fit_kmeans
from .corpus_io import FeatureSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AcousticWordEmbedding:
    utt_id: str
    span_index: int
    vector: np.ndarray


@dataclass(frozen=True)
class Lexicon:
    codebook: Codebook
    assignments: Dict[Tuple[str, int], int]  # (utt_id, span_index) -> cluster id


def embed_span(
    features_b: FeatureSequence, frame_a: int, frame_b: int, normalize: bool = False
) -> np.ndarray:
    """Mean of feature rows frame_a..=frame_b; out-of-range frames are clamped.

    Clamping only triggers when the two feature streams disagree on length;
    they should be frame-synchronous by construction.
    """
    if frame_a < 0 or frame_a > frame_b:
        raise IndexError(f"bad span ({frame_a}, {frame_b})")
    t_max = features_b.num_frames - 1
    if frame_b > t_max:
        logger.warning(
            "%s: span end %d clamped to %d (stream-b shorter than stream-a)",
            features_b.utt_id, frame_b, t_max,
        )
        frame_b = t_max
        frame_a = min(frame_a, t_max)
    vec = features_b.frames[frame_a : frame_b + 1].astype(np.float64).mean(axis=0)
    if normalize:
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec = vec / norm
    return vec


def build_lexicon(
    awes: List[AcousticWordEmbedding], lexicon_size: int, cfg: KMeansConfig
) -> Lexicon:
    """Cluster all embeddings into lexicon_size clusters and assign every span."""
    if len(awes) < lexicon_size:
        raise InsufficientPointsError(
            f"{len(awes)} word spans < lexicon size {lexicon_size}; "
            f"use --lexicon-size <= {len(awes)}"
        )
    if cfg.K != lexicon_size:
        cfg = KMeansConfig(
            K=lexicon_size, max_iters=cfg.max_iters, seed=cfg.seed,
            tol=cfg.tol, init=cfg.init, restarts=cfg.restarts,
        )
    points = np.stack([a.vector for a in awes])
    cb = fit_kmeans(points, cfg)
    ids, _ = assign_batch(cb, points)
    assignments = {(a.utt_id, a.span_index): int(k) for a, k in zip(awes, ids)}
    return Lexicon(codebook=cb, assignments=assignments)
