"""Stage (b): DP over the unit-code sequence with AE-RNN NLL span costs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

from .corpus_io import OutputSegment, SegmentationOutput
from .dp import dpdp_segment
from .seq_autoencoder import AeRnnModel, CodeSequence, forward_nll


@dataclass(frozen=True)
class WordSpan:
    i: int  # unit index, inclusive
    j: int  # unit index, inclusive
    frame_a: int
    frame_b: int
    nll: float


@dataclass(frozen=True)
class DpdpWordConfig:
    lam: float = 5.0
    max_len: int = 50  # in units
    penalty: str = "duration"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


class SpanScorer:
    """Memoized per-utterance AE-RNN span scores; discard after segmenting."""

    def __init__(self, m: AeRnnModel, codes: List[int]):
        self.model = m
        self.codes = list(codes)
        self._memo: Dict[Tuple[int, int], float] = {}

    def __call__(self, i: int, j: int) -> float:
        if not (0 <= i <= j < len(self.codes)):
            raise IndexError(f"span ({i}, {j}) out of range for N={len(self.codes)}")
        key = (i, j)
        if key not in self._memo:
            self._memo[key] = forward_nll(self.model, self.codes[i : j + 1])
        return self._memo[key]


def score_span(m: AeRnnModel, codes: List[int], i: int, j: int) -> float:
    """Reconstruction NLL of codes[i..=j] (unmemoized convenience path)."""
    if not (0 <= i <= j < len(codes)):
        raise IndexError(f"span ({i}, {j}) out of range for N={len(codes)}")
    return forward_nll(m, codes[i : j + 1])


def dpdp_words(codes: CodeSequence, m: AeRnnModel, cfg: DpdpWordConfig) -> List[WordSpan]:
    """Optimal duration-penalised cover of the code sequence into word spans."""
    n = len(codes.codes)
    if n < 1:
        raise ValueError("empty code sequence")
    if len(codes.frame_spans) != n:
        raise ValueError("frame_spans must align 1:1 with codes")
    scorer = SpanScorer(m, codes.codes)
    spans, _objective = dpdp_segment(n, scorer, cfg.lam, cfg.max_len, cfg.penalty)
    return [
        WordSpan(
            i=i,
            j=j,
            frame_a=codes.frame_spans[i][0],
            frame_b=codes.frame_spans[j][1],
            nll=scorer(i, j),
        )
        for i, j in spans
    ]


def to_output(utt_id: str, spans: List[WordSpan], frame_rate: float) -> SegmentationOutput:
    """Map word spans to second-valued segments; cluster ids stay unset."""
    if not spans:
        raise ValueError("no spans")
    for prev, cur in zip(spans, spans[1:]):
        if cur.frame_a != prev.frame_b + 1:
            raise ValueError(
                f"{utt_id}: non-contiguous spans at frames {prev.frame_b} -> {cur.frame_a}"
            )
    segments = [
        OutputSegment(start=s.frame_a / frame_rate, end=(s.frame_b + 1) / frame_rate)
        for s in spans
    ]
    return SegmentationOutput(utt_id=utt_id, segments=segments)
