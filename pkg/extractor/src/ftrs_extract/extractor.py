"""Layer-feature extraction with a pretrained speech transformer.

Emits two FTRS streams per utterance: layer 7 (phone-like, for unit
discovery) and layer 9 (word-like, for acoustic word embeddings), plus a
manifest the segmentation tool can load directly. The English base model is
used for all languages.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from .audio import TARGET_RATE, load_wav_16k_mono
from .ftrs import write_ftrs

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "facebook/hubert-base-ls960"
FRAME_RATE = 50.0  # 20 ms hop
CHUNK_SECONDS = 30.0


@dataclass
class ExtractionJob:
    audio_manifest: str  # JSONL: {"utt_id": ..., "audio": ...}
    out_dir: str
    layer_a: int = 7
    layer_b: int = 9
    device: str = "cpu"
    model: str = DEFAULT_MODEL
    random_init: bool = False  # seeded random weights, for offline testing
    seed: int = 0


@dataclass
class ExtractionResult:
    manifest_path: Path
    extracted: List[str] = field(default_factory=list)
    failures: Dict[str, str] = field(default_factory=dict)


def load_audio_manifest(path) -> List[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "utt_id" not in rec or "audio" not in rec:
                raise ValueError(f"{path}:{lineno}: need utt_id and audio fields")
            records.append(rec)
    return records


def build_model(job: ExtractionJob):
    from transformers import HubertConfig, HubertModel

    if job.random_init:
        torch.manual_seed(job.seed)
        model = HubertModel(HubertConfig())
        logger.warning("using randomly initialized weights (seed %d); "
                       "features are only useful for format/shape validation", job.seed)
    else:
        model = HubertModel.from_pretrained(job.model)
    model.eval()
    return model.to(job.device)


def _forward_layers(model, samples: np.ndarray, layers: List[int], device: str):
    """Hidden states for the requested layers, chunked at 30 s."""
    max_layer = max(layers)
    num_layers = model.config.num_hidden_layers
    for layer in layers:
        if not 0 <= layer <= num_layers:
            raise ValueError(f"layer {layer} invalid for a {num_layers}-layer model")
    chunk = int(CHUNK_SECONDS * TARGET_RATE)
    outputs = {layer: [] for layer in layers}
    with torch.no_grad():
        for start in range(0, len(samples), chunk):
            piece = samples[start : start + chunk]
            wav = torch.from_numpy(piece).unsqueeze(0).to(device)
            hidden = model(wav, output_hidden_states=True).hidden_states
            assert len(hidden) > max_layer
            for layer in layers:
                outputs[layer].append(hidden[layer][0].cpu().numpy())
    return {layer: np.concatenate(parts) for layer, parts in outputs.items()}


def extract(job: ExtractionJob, model=None) -> ExtractionResult:
    """Extract both feature streams for every utterance in the audio manifest.

    Per-file failures are logged and collected; the job continues.
    """
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if model is None:
        model = build_model(job)

    records = load_audio_manifest(job.audio_manifest)
    result = ExtractionResult(manifest_path=out_dir / "manifest.jsonl")
    entries = []
    for rec in records:
        utt_id = rec["utt_id"]
        try:
            samples = load_wav_16k_mono(rec["audio"])
            if len(samples) < 640:  # below one hop of context
                raise ValueError("audio too short to produce a frame")
            feats = _forward_layers(model, samples, [job.layer_a, job.layer_b], job.device)
            path_a = out_dir / f"{utt_id}.a.ftrs"
            path_b = out_dir / f"{utt_id}.b.ftrs"
            write_ftrs(feats[job.layer_a], FRAME_RATE, path_a)
            write_ftrs(feats[job.layer_b], FRAME_RATE, path_b)
            entries.append(
                {"utt_id": utt_id, "features_a": str(path_a), "features_b": str(path_b)}
            )
            result.extracted.append(utt_id)
        except Exception as e:
            logger.error("%s: %s", utt_id, e)
            result.failures[utt_id] = str(e)

    with open(result.manifest_path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(json.dumps(entry) + "\n")
    if result.failures:
        logger.warning("%d/%d utterances failed: %s",
                       len(result.failures), len(records), sorted(result.failures))
    return result
