"""On-disk artifacts: feature files, manifests, alignments, segmentation outputs.

Feature files are binary (magic ``FTRS``); everything else is UTF-8 text,
either JSON lines or tab-separated columns.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

FTRS_MAGIC = b"FTRS"
FTRS_VERSION = 1

# Serialized times are rounded to 0.1 ms; evaluation uses unrounded values.
TIME_DECIMALS = 4
COVERAGE_EPS = 1e-9


class FormatError(ValueError):
    """File does not conform to the expected on-disk format."""


class DataError(ValueError):
    """File parses but carries invalid values (NaN/Inf, bad ranges)."""


class ManifestError(ValueError):
    """Corpus manifest is malformed."""


class AlignmentError(ValueError):
    """Alignment file is malformed."""


@dataclass(frozen=True)
class FeatureSequence:
    """Per-utterance matrix of frame vectors at a fixed frame rate.

    Frame t covers the half-open interval [t/frame_rate, (t+1)/frame_rate)
    seconds, t zero-based.
    """

    utt_id: str
    frames: np.ndarray  # (T, D) float32
    frame_rate: float

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise DataError(f"{self.utt_id}: frames must be a T x D matrix with T,D >= 1")
        if not np.all(np.isfinite(frames)):
            raise DataError(f"{self.utt_id}: non-finite feature values")
        if not self.frame_rate > 0:
            raise DataError(f"{self.utt_id}: frame_rate must be > 0")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def duration(self) -> float:
        return self.num_frames / self.frame_rate


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    features_a: str
    features_b: str


@dataclass(frozen=True)
class CorpusManifest:
    entries: List[ManifestEntry]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class AlignmentToken:
    start: float
    end: float
    label: str


@dataclass(frozen=True)
class AlignmentTrack:
    utt_id: str
    tokens: List[AlignmentToken]


@dataclass(frozen=True)
class OutputSegment:
    start: float
    end: float
    cluster_id: Optional[int] = None


@dataclass(frozen=True)
class SegmentationOutput:
    """Full-coverage segmentation of one utterance, in seconds."""

    utt_id: str
    segments: List[OutputSegment] = field(default_factory=list)

    def validate_coverage(self, duration: Optional[float] = None) -> None:
        if not self.segments:
            raise DataError(f"{self.utt_id}: empty segmentation")
        if abs(self.segments[0].start) > COVERAGE_EPS:
            raise DataError(f"{self.utt_id}: first segment does not start at 0")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if abs(cur.start - prev.end) > COVERAGE_EPS:
                raise DataError(
                    f"{self.utt_id}: gap/overlap at {prev.end:.6f} -> {cur.start:.6f}"
                )
        if duration is not None and abs(self.segments[-1].end - duration) > COVERAGE_EPS:
            raise DataError(
                f"{self.utt_id}: segmentation ends at {self.segments[-1].end:.6f}, "
                f"expected {duration:.6f}"
            )


def read_feature_sequence(path, utt_id: Optional[str] = None) -> FeatureSequence:
    """Read an FTRS feature file. The stored payload is returned unmodified."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 20:
        raise FormatError(f"{path}: file shorter than FTRS header")
    if data[:4] != FTRS_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, num_rows, dim = struct.unpack_from("<III", data, 4)
    if version != FTRS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    (frame_rate,) = struct.unpack_from("<f", data, 16)
    payload = data[20:]
    expected = num_rows * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload holds {len(payload) // 4} values, "
            f"header implies {num_rows * dim}"
        )
    frames = np.frombuffer(payload, dtype="<f4").reshape(num_rows, dim)
    if not np.all(np.isfinite(frames)):
        raise DataError(f"{path}: non-finite values in payload")
    return FeatureSequence(
        utt_id=utt_id if utt_id is not None else path.stem,
        frames=frames.copy(),
        frame_rate=float(frame_rate),
    )


def write_feature_sequence(seq: FeatureSequence, path) -> None:
    """Write an FTRS feature file; read_feature_sequence inverts it bitwise."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = np.ascontiguousarray(seq.frames, dtype="<f4")
    header = FTRS_MAGIC + struct.pack(
        "<IIIf", FTRS_VERSION, seq.num_frames, seq.dim, float(seq.frame_rate)
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(frames.tobytes())


def write_matrix(matrix: np.ndarray, path, frame_rate: float = 0.0) -> None:
    """Write a bare K x D matrix in FTRS format (frame_rate 0 = not temporal)."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = FTRS_MAGIC + struct.pack(
        "<IIIf", FTRS_VERSION, matrix.shape[0], matrix.shape[1], float(frame_rate)
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(matrix.tobytes())


def read_matrix(path) -> np.ndarray:
    """Read a bare matrix stored in FTRS format, ignoring the frame_rate field."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 20 or data[:4] != FTRS_MAGIC:
        raise FormatError(f"{path}: not an FTRS file")
    version, num_rows, dim = struct.unpack_from("<III", data, 4)
    if version != FTRS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = data[20:]
    if len(payload) != num_rows * dim * 4:
        raise FormatError(f"{path}: payload length mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(num_rows, dim).copy()


def load_manifest(path) -> CorpusManifest:
    """Load a JSON-lines corpus manifest.

    Each line is an object with ``utt_id``, ``features_a`` and optional
    ``features_b``; a missing ``features_b`` defaults to ``features_a``.
    """
    path = Path(path)
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{lineno}: bad record: {e}") from e
            if "utt_id" not in rec:
                raise ManifestError(f"{path}:{lineno}: missing utt_id")
            if "features_a" not in rec:
                raise ManifestError(
                    f"{path}:{lineno}: missing features_a for {rec['utt_id']!r}"
                )
            utt_id = rec["utt_id"]
            if utt_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate utt_id {utt_id!r}")
            seen.add(utt_id)
            entries.append(
                ManifestEntry(
                    utt_id=utt_id,
                    features_a=rec["features_a"],
                    features_b=rec.get("features_b", rec["features_a"]),
                )
            )
    return CorpusManifest(entries=entries)


def write_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for e in manifest.entries:
            rec = {"utt_id": e.utt_id, "features_a": e.features_a}
            if e.features_b != e.features_a:
                rec["features_b"] = e.features_b
            f.write(json.dumps(rec) + "\n")


def load_alignments(path) -> Dict[str, AlignmentTrack]:
    """Load a tab-separated alignment file (utt_id, start, end, label).

    Tokens are grouped per utterance and returned sorted by start time.
    """
    path = Path(path)
    per_utt: Dict[str, List[AlignmentToken]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise AlignmentError(f"{path}:{lineno}: expected 4 tab-separated fields")
            utt_id, start_s, end_s, label = parts
            try:
                start, end = float(start_s), float(end_s)
            except ValueError as e:
                raise AlignmentError(f"{path}:{lineno}: bad time value") from e
            if start >= end:
                raise AlignmentError(
                    f"{path}:{lineno}: start {start} >= end {end} for {utt_id!r}"
                )
            per_utt.setdefault(utt_id, []).append(AlignmentToken(start, end, label))
    tracks = {}
    for utt_id, tokens in per_utt.items():
        tokens.sort(key=lambda t: t.start)
        for prev, cur in zip(tokens, tokens[1:]):
            if cur.start < prev.end - COVERAGE_EPS:
                raise AlignmentError(
                    f"{path}: overlapping tokens in {utt_id!r} at {cur.start}"
                )
        tracks[utt_id] = AlignmentTrack(utt_id=utt_id, tokens=tokens)
    return tracks


def write_alignments(tracks: Dict[str, AlignmentTrack], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for utt_id in sorted(tracks):
            for tok in tracks[utt_id].tokens:
                f.write(f"{utt_id}\t{tok.start:.{TIME_DECIMALS}f}\t{tok.end:.{TIME_DECIMALS}f}\t{tok.label}\n")


def load_segmentation(path) -> Dict[str, SegmentationOutput]:
    """Load JSON-lines segmentation output keyed by utterance."""
    path = Path(path)
    out: Dict[str, SegmentationOutput] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            utt_id = rec["utt_id"]
            if utt_id in out:
                raise FormatError(f"{path}:{lineno}: duplicate utt_id {utt_id!r}")
            segments = [
                OutputSegment(
                    start=float(s["start"]),
                    end=float(s["end"]),
                    cluster_id=s.get("cluster_id"),
                )
                for s in rec["segments"]
            ]
            out[utt_id] = SegmentationOutput(utt_id=utt_id, segments=segments)
    return out


def write_segmentation(outputs: List[SegmentationOutput], path) -> None:
    """Write segmentation records, one JSON line per utterance.

    Coverage is validated before writing; serialized times are rounded to
    0.1 ms.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for out in outputs:
            out.validate_coverage()
            segs = []
            for s in out.segments:
                rec = {
                    "start": round(s.start, TIME_DECIMALS),
                    "end": round(s.end, TIME_DECIMALS),
                }
                if s.cluster_id is not None:
                    rec["cluster_id"] = int(s.cluster_id)
                segs.append(rec)
            f.write(json.dumps({"utt_id": out.utt_id, "segments": segs}) + "\n")
