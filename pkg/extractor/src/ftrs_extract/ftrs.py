"""Writer for the FTRS feature-file format consumed by the segmentation tool.

Layout (little-endian): magic ``FTRS``, u32 version = 1, u32 T, u32 D,
f32 frame rate, then T*D f32 values row-major.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FTRS_MAGIC = b"FTRS"
FTRS_VERSION = 1


def write_ftrs(frames: np.ndarray, frame_rate: float, path) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise ValueError("frames must be a T x D matrix with T,D >= 1")
    if not np.all(np.isfinite(frames)):
        raise ValueError("non-finite feature values")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = FTRS_MAGIC + struct.pack(
        "<IIIf", FTRS_VERSION, frames.shape[0], frames.shape[1], float(frame_rate)
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(frames.tobytes())
