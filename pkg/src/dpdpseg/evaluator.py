"""Segmentation and lexicon scoring: boundary F1, token F1, NED."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .corpus_io import AlignmentTrack, SegmentationOutput

BOUNDARY_MERGE_EPS = 1e-9
# slack on tolerance comparisons so times like |0.52 - 0.5| == 0.02 match
TOLERANCE_EPS = 1e-9


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    tolerance: float = 0.02  # seconds of boundary slack
    overlap_frac: float = 0.5  # phone included if overlap >= frac * phone dur
    overlap_abs: float = 0.03  # ... or overlap >= this many seconds
    exclude_edges: bool = True

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if not 0 < self.overlap_frac <= 1:
            raise ValueError("overlap_frac must be in (0, 1]")
        if self.overlap_abs < 0:
            raise ValueError("overlap_abs must be >= 0")


def _prf(matches: int, num_hyp: int, num_ref: int) -> Tuple[float, float, float]:
    precision = matches / num_hyp if num_hyp else 0.0
    recall = matches / num_ref if num_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _track_boundaries(times: List[float], exclude_edges: bool) -> List[float]:
    """Sorted unique boundary points, optionally without the utterance edges."""
    times = sorted(times)
    uniq: List[float] = []
    for t in times:
        if not uniq or t - uniq[-1] > BOUNDARY_MERGE_EPS:
            uniq.append(t)
    if exclude_edges:
        uniq = uniq[1:-1]
    return uniq


def _ref_boundary_times(track: AlignmentTrack) -> List[float]:
    times = []
    for tok in track.tokens:
        times.append(tok.start)
        times.append(tok.end)
    return times


def _hyp_boundary_times(seg: SegmentationOutput) -> List[float]:
    times = [seg.segments[0].start]
    times.extend(s.end for s in seg.segments)
    return times


def _greedy_boundary_matches(hyp: List[float], ref: List[float], tolerance: float) -> int:
    """Each hyp boundary, ascending, takes the nearest unmatched ref in range."""
    used = [False] * len(ref)
    matches = 0
    for h in hyp:
        best = -1
        best_dist = tolerance + 1.0
        for i, r in enumerate(ref):
            if used[i]:
                continue
            d = abs(h - r)
            if d < best_dist or (d == best_dist and best == -1):
                best = i
                best_dist = d
        if best >= 0 and best_dist <= tolerance + TOLERANCE_EPS:
            used[best] = True
            matches += 1
    return matches


def _check_utterances(ref: Dict[str, AlignmentTrack], hyp: Dict[str, SegmentationOutput]):
    missing = sorted(set(hyp) - set(ref))
    if missing:
        raise EvaluationError(f"utterances missing from reference: {missing[:5]}")


def boundary_f1(
    ref: Dict[str, AlignmentTrack],
    hyp: Dict[str, SegmentationOutput],
    cfg: EvalConfig,
) -> Tuple[float, float, float]:
    """Precision/recall/F1 of boundary time points within the tolerance."""
    _check_utterances(ref, hyp)
    matches = num_hyp = num_ref = 0
    for utt_id in sorted(hyp):
        h = _track_boundaries(_hyp_boundary_times(hyp[utt_id]), cfg.exclude_edges)
        r = _track_boundaries(_ref_boundary_times(ref[utt_id]), cfg.exclude_edges)
        matches += _greedy_boundary_matches(h, r, cfg.tolerance)
        num_hyp += len(h)
        num_ref += len(r)
    return _prf(matches, num_hyp, num_ref)


def token_f1(
    ref: Dict[str, AlignmentTrack],
    hyp: Dict[str, SegmentationOutput],
    cfg: EvalConfig,
) -> Tuple[float, float, float]:
    """Token-level F1; a match needs both boundaries within the tolerance."""
    _check_utterances(ref, hyp)
    matches = num_hyp = num_ref = 0
    for utt_id in sorted(hyp):
        hyp_tokens = [(s.start, s.end) for s in hyp[utt_id].segments]
        ref_tokens = [(t.start, t.end) for t in ref[utt_id].tokens]
        used = [False] * len(ref_tokens)
        for hs, he in hyp_tokens:
            for i, (rs, re) in enumerate(ref_tokens):
                if used[i]:
                    continue
                if (
                    abs(hs - rs) <= cfg.tolerance + TOLERANCE_EPS
                    and abs(he - re) <= cfg.tolerance + TOLERANCE_EPS
                ):
                    used[i] = True
                    matches += 1
                    break
        num_hyp += len(hyp_tokens)
        num_ref += len(ref_tokens)
    return _prf(matches, num_hyp, num_ref)


def token_phonemes(
    token: Tuple[float, float], phones: AlignmentTrack, cfg: EvalConfig
) -> List[str]:
    """Phone labels overlapping the token per the fraction/absolute rule."""
    start, end = token
    labels = []
    for p in phones.tokens:
        overlap = min(end, p.end) - max(start, p.start)
        if overlap >= cfg.overlap_frac * (p.end - p.start) or overlap >= cfg.overlap_abs:
            labels.append(p.label)
    return labels


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost edit distance over label sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[len(b)]


def ned(
    clusters: Dict[int, List[List[str]]],
    pair_cap: int = 0,
    seed: int = 0,
) -> float:
    """Mean normalised edit distance over same-cluster token pairs, pooled.

    Pairs where both sequences are empty score 0; exactly one empty scores 1.
    pair_cap > 0 subsamples pairs per cluster (seeded) for very large clusters.
    """
    import itertools
    import random

    total = 0.0
    count = 0
    rng = random.Random(seed)
    for cluster_id in sorted(clusters):
        seqs = clusters[cluster_id]
        if len(seqs) < 2:
            continue
        pairs = list(itertools.combinations(range(len(seqs)), 2))
        if pair_cap and len(pairs) > pair_cap:
            pairs = rng.sample(pairs, pair_cap)
        for i, j in pairs:
            a, b = seqs[i], seqs[j]
            if not a and not b:
                d = 0.0
            elif not a or not b:
                d = 1.0
            else:
                d = levenshtein(a, b) / max(len(a), len(b))
            total += d
            count += 1
    if count == 0:
        raise EvaluationError("no cluster holds two or more tokens; NED undefined")
    return total / count


def cluster_phonemes(
    hyp: Dict[str, SegmentationOutput],
    phones: Dict[str, AlignmentTrack],
    cfg: EvalConfig,
) -> Dict[int, List[List[str]]]:
    """Map every clustered hypothesis token to its overlapping phone sequence."""
    clusters: Dict[int, List[List[str]]] = {}
    for utt_id in sorted(hyp):
        if utt_id not in phones:
            raise EvaluationError(f"no phone alignments for {utt_id!r}")
        for seg in hyp[utt_id].segments:
            if seg.cluster_id is None:
                raise EvaluationError(f"{utt_id}: segment lacks a cluster id")
            seq = token_phonemes((seg.start, seg.end), phones[utt_id], cfg)
            clusters.setdefault(int(seg.cluster_id), []).append(seq)
    return clusters
